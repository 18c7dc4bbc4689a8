//! Digital flux drives and the cables that deliver them.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// AWG sample interval.
pub const DEFAULT_DT: f64 = 1e-9;

/// 3 dB cutoff of the twisted-pair preset. Calibrated so the reference step
/// emits 0.07 of the coax photon number (see `reference::calibrate_twisted_pair`).
pub const TWISTED_PAIR_CUTOFF_HZ: f64 = 7.871_296e6;

/// Nominal twisted-pair to coax output power ratio.
pub const TWISTED_PAIR_POWER_FACTOR: f64 = 0.07;

/// Sampled flux trajectory in flux-quantum units, linearly interpolated
/// between samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxWaveform {
    samples: Vec<f64>,
    dt: f64,
    drive_end: usize,
}

impl FluxWaveform {
    /// Wraps raw samples. The drive end is taken as the first sample after
    /// which the flux no longer changes.
    pub fn new(samples: Vec<f64>, dt: f64) -> Result<Self> {
        let drive_end = settle_index(&samples);
        Self::with_drive_end(samples, dt, drive_end)
    }

    pub fn with_drive_end(samples: Vec<f64>, dt: f64, drive_end: usize) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::InvalidSpec(format!(
                "sample interval {dt} must be > 0"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidSpec(
                "a waveform needs at least 2 samples".into(),
            ));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec(
                "waveform contains non-finite flux".into(),
            ));
        }
        if drive_end >= samples.len() {
            return Err(Error::InvalidSpec(
                "drive end lies beyond the waveform".into(),
            ));
        }
        Ok(Self {
            samples,
            dt,
            drive_end,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        (self.samples.len() - 1) as f64 * self.dt
    }

    /// Index of the sample at which the programmed drive reaches its final
    /// value. Emission phases are referenced to this instant.
    pub fn drive_end(&self) -> usize {
        self.drive_end
    }

    pub fn drive_end_time(&self) -> f64 {
        self.drive_end as f64 * self.dt
    }

    pub fn final_flux(&self) -> f64 {
        *self.samples.last().expect("validated non-empty")
    }

    /// Same waveform shifted by a constant flux.
    pub fn offset(&self, by: f64) -> Self {
        Self {
            samples: self.samples.iter().map(|v| v + by).collect(),
            ..self.clone()
        }
    }

    /// Appends `duration` seconds of constant final flux.
    pub fn extend_hold(&self, duration: f64) -> Self {
        let extra = (duration / self.dt).ceil().max(0.0) as usize;
        let last = self.final_flux();
        let mut samples = self.samples.clone();
        samples.extend(std::iter::repeat_n(last, extra));
        Self {
            samples,
            ..self.clone()
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(
            w,
            &["time_s", "flux_phi0"],
            self.samples
                .iter()
                .enumerate()
                .map(|(k, v)| [k as f64 * self.dt, *v]),
        )
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = crate::io::read_columns(r, &["time_s", "flux_phi0"])?;
        if rows.len() < 2 {
            return Err(Error::InvalidSpec(
                "a waveform needs at least 2 samples".into(),
            ));
        }
        let dt = rows[1][0] - rows[0][0];
        for (k, row) in rows.iter().enumerate() {
            let expected = rows[0][0] + k as f64 * dt;
            if (row[0] - expected).abs() > 1e-6 * dt {
                return Err(Error::InvalidSpec(format!(
                    "row {k}: time samples must be uniformly spaced"
                )));
            }
        }
        Self::new(rows.into_iter().map(|r| r[1]).collect(), dt)
    }
}

fn settle_index(samples: &[f64]) -> usize {
    let Some(&last) = samples.last() else {
        return 0;
    };
    samples
        .iter()
        .rposition(|&v| v != last)
        .map_or(0, |k| k + 1)
}

/// Programmed drive shape; flux values in flux-quantum units, times in s.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveShape {
    /// Linear ramp from `start` to `end` at `slope` (Φ0/s, magnitude).
    Step { start: f64, end: f64, slope: f64 },
    /// Excursion from `base` to `peak` held for `width`, then back.
    Overshoot { base: f64, peak: f64, width: f64 },
    /// `count` overshoots spaced `delta_t` apart.
    Train {
        base: f64,
        peak: f64,
        width: f64,
        delta_t: f64,
        count: usize,
    },
}

impl DriveShape {
    /// Flux held before the drive starts.
    pub fn initial_flux(&self) -> f64 {
        match *self {
            DriveShape::Step { start, .. } => start,
            DriveShape::Overshoot { base, .. } | DriveShape::Train { base, .. } => base,
        }
    }

    /// Flux held after the drive ends.
    pub fn final_flux(&self) -> f64 {
        match *self {
            DriveShape::Step { end, .. } => end,
            DriveShape::Overshoot { base, .. } | DriveShape::Train { base, .. } => base,
        }
    }
}

/// A drive shape plus the idle time held before and after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveformSpec {
    pub shape: DriveShape,
    pub lead: f64,
    pub tail: f64,
}

impl WaveformSpec {
    pub fn new(shape: DriveShape, lead: f64, tail: f64) -> Self {
        Self { shape, lead, tail }
    }

    /// A sudden step on the given grid (slope saturated to one sample).
    pub fn sudden_step(start: f64, end: f64, dt: f64, lead: f64, tail: f64) -> Self {
        let slope = ((end - start).abs() / dt).max(1.0 / dt);
        Self::new(DriveShape::Step { start, end, slope }, lead, tail)
    }
}

fn grid_count(duration: f64, dt: f64, what: &str) -> Result<usize> {
    let n = duration / dt;
    let rounded = n.round();
    if (n - rounded).abs() > 1e-6 * n.max(1.0) {
        return Err(Error::InvalidSpec(format!(
            "{what} {duration:e} s is not a multiple of the {dt:e} s sample interval"
        )));
    }
    Ok(rounded as usize)
}

/// Samples a drive shape on a uniform grid.
pub fn build_waveform(spec: &WaveformSpec, dt: f64) -> Result<FluxWaveform> {
    let finite = |vals: &[f64]| vals.iter().all(|v| v.is_finite());
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidSpec(format!(
            "sample interval {dt} must be > 0"
        )));
    }
    if !(finite(&[spec.lead, spec.tail]) && spec.lead >= 0.0 && spec.tail >= 0.0) {
        return Err(Error::InvalidSpec(
            "lead and tail must be finite and >= 0".into(),
        ));
    }
    let lead = (spec.lead / dt).ceil() as usize;
    let tail = (spec.tail / dt).ceil() as usize;

    let (body, drive_end) = match spec.shape {
        DriveShape::Step { start, end, slope } => {
            if !finite(&[start, end, slope]) {
                return Err(Error::InvalidSpec("step parameters must be finite".into()));
            }
            if slope == 0.0 {
                return Err(Error::InvalidSpec("step slope must be non-zero".into()));
            }
            let ramp_time = (end - start).abs() / slope.abs();
            let ramp_samples = (ramp_time / dt - 1e-9).ceil().max(0.0) as usize;
            let mut body = vec![start; lead];
            for k in 0..=ramp_samples {
                let frac = if ramp_time == 0.0 {
                    1.0
                } else {
                    (k as f64 * dt / ramp_time).min(1.0)
                };
                body.push(if frac >= 1.0 {
                    end
                } else {
                    start + (end - start) * frac
                });
            }
            let drive_end = lead + ramp_samples;
            (body, drive_end)
        }
        DriveShape::Overshoot { base, peak, width } => {
            if !finite(&[base, peak, width]) {
                return Err(Error::InvalidSpec(
                    "overshoot parameters must be finite".into(),
                ));
            }
            if width < dt * (1.0 - 1e-9) {
                return Err(Error::InvalidSpec(format!(
                    "overshoot width {width:e} s is below the {dt:e} s resolution"
                )));
            }
            let w = grid_count(width, dt, "overshoot width")?;
            let mut body = vec![base; lead + 1];
            body.extend(std::iter::repeat_n(peak, w));
            body.push(base);
            let drive_end = body.len() - 1;
            (body, drive_end)
        }
        DriveShape::Train {
            base,
            peak,
            width,
            delta_t,
            count,
        } => {
            if !finite(&[base, peak, width, delta_t]) {
                return Err(Error::InvalidSpec("train parameters must be finite".into()));
            }
            if count == 0 {
                return Err(Error::InvalidSpec("train needs at least one pulse".into()));
            }
            if width < dt * (1.0 - 1e-9) {
                return Err(Error::InvalidSpec(format!(
                    "overshoot width {width:e} s is below the {dt:e} s resolution"
                )));
            }
            if delta_t < width {
                return Err(Error::InvalidSpec(
                    "train spacing must be >= overshoot width".into(),
                ));
            }
            let w = grid_count(width, dt, "overshoot width")?;
            let period = grid_count(delta_t, dt, "train spacing")?;
            if period <= w {
                return Err(Error::InvalidSpec(
                    "train spacing must leave at least one base sample between overshoots".into(),
                ));
            }
            let mut body = vec![base; lead + 1 + period * (count - 1) + w + 1];
            for p in 0..count {
                let first = lead + 1 + p * period;
                body[first..first + w].fill(peak);
            }
            let drive_end = body.len() - 1;
            (body, drive_end)
        }
    };

    let mut samples = body;
    let last = *samples.last().expect("body is never empty");
    samples.extend(std::iter::repeat_n(last, tail));
    if samples.len() < 2 {
        samples.push(last);
    }
    FluxWaveform::with_drive_end(samples, dt, drive_end)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Coax,
    TwistedPair,
}

impl std::str::FromStr for ChannelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coax" => Ok(ChannelKind::Coax),
            "twisted_pair" => Ok(ChannelKind::TwistedPair),
            other => Err(Error::Parse(format!(
                "unknown channel `{other}` (expected `coax` or `twisted_pair`)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub kind: ChannelKind,
    /// Low-pass 3 dB frequency (Hz). Unused for coax.
    pub cutoff: f64,
    /// Expected output-power ratio relative to coax.
    pub power_factor: f64,
}

impl ChannelModel {
    pub fn coax() -> Self {
        Self {
            kind: ChannelKind::Coax,
            cutoff: f64::INFINITY,
            power_factor: 1.0,
        }
    }

    pub fn twisted_pair() -> Self {
        Self::twisted_pair_with_cutoff(TWISTED_PAIR_CUTOFF_HZ)
    }

    pub fn twisted_pair_with_cutoff(cutoff: f64) -> Self {
        Self {
            kind: ChannelKind::TwistedPair,
            cutoff,
            power_factor: TWISTED_PAIR_POWER_FACTOR,
        }
    }

    pub fn preset(kind: ChannelKind) -> Self {
        match kind {
            ChannelKind::Coax => Self::coax(),
            ChannelKind::TwistedPair => Self::twisted_pair(),
        }
    }
}

/// Passes a waveform through a delivery channel.
///
/// Coax is ideal. The twisted pair is a single-pole low-pass with unit DC
/// gain, started in steady state at the first sample.
pub fn apply_channel(w: &FluxWaveform, ch: &ChannelModel) -> FluxWaveform {
    match ch.kind {
        ChannelKind::Coax => w.clone(),
        ChannelKind::TwistedPair => {
            let a = 1.0 - (-2.0 * PI * ch.cutoff * w.dt).exp();
            let mut y = w.samples[0];
            let samples = w
                .samples
                .iter()
                .map(|&x| {
                    y += a * (x - y);
                    y
                })
                .collect();
            FluxWaveform {
                samples,
                dt: w.dt,
                drive_end: w.drive_end,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    /// Interpolated crossing time (s) from the first sample.
    pub time: f64,
    /// +1 for increasing flux, -1 for decreasing.
    pub direction: i8,
    /// `n` of the crossed boundary `n + 1/2`.
    pub half_integer_index: i64,
}

/// Crossings of half-integer flux boundaries, in time order.
///
/// A boundary hit exactly at a sample counts once, in the segment that ends
/// on it.
pub fn boundary_crossings(w: &FluxWaveform) -> Vec<Crossing> {
    let mut out = Vec::new();
    for (k, pair) in w.samples.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        if a == b {
            continue;
        }
        let t0 = k as f64 * w.dt;
        // Boundaries h = n + 1/2 with h in (a, b] (rising) or [b, a) (falling).
        if b > a {
            let first = (a - 0.5).floor() as i64 + 1;
            let last = (b - 0.5).floor() as i64;
            for n in first..=last {
                let h = n as f64 + 0.5;
                out.push(Crossing {
                    time: t0 + w.dt * (h - a) / (b - a),
                    direction: 1,
                    half_integer_index: n,
                });
            }
        } else {
            let first = (a - 0.5).ceil() as i64 - 1;
            let last = (b - 0.5).ceil() as i64;
            let mut n = first;
            while n >= last {
                let h = n as f64 + 0.5;
                out.push(Crossing {
                    time: t0 + w.dt * (a - h) / (a - b),
                    direction: -1,
                    half_integer_index: n,
                });
                n -= 1;
            }
        }
    }
    out
}
