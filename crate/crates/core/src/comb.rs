//! Frequency combs from periodically repeated pulses.
//!
//! A train of identical pulses `A e^{-γτ/2} sin(ω_e τ)`, restarted every
//! `δt`, is periodic and so has lines at multiples of `δω = 2π/δt`. With
//! `f(t) = Σ c_n e^{i n δω t}` and `Γ = γ/2 + i n δω`,
//!
//! ```text
//! c_n = (A/δt) [ω_e - e^{-Γ δt} (ω_e cos ω_e δt + Γ sin ω_e δt)] / (Γ² + ω_e²)
//! ```
//!
//! which reduces to `(A/δt) ω_e (1 - e^{-Γ δt}) / (Γ² + ω_e²)` when
//! `ω_e δt` is a multiple of 2π. Here `n` is the absolute harmonic number;
//! [`CombSpectrum`] stores lines by their offset from the harmonic nearest
//! the carrier.

use std::f64::consts::PI;
use std::io::Write;
use std::ops::RangeInclusive;

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub amplitude: f64,
    /// Energy decay rate (1/s).
    pub gamma: f64,
    /// Pulse carrier (rad/s).
    pub omega_e: f64,
    /// Repetition interval (s).
    pub delta_t: f64,
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        ensure(
            self.delta_t > 0.0 && self.delta_t.is_finite(),
            "delta_t",
            "must be > 0",
        )?;
        ensure(
            self.gamma >= 0.0 && self.gamma.is_finite(),
            "gamma",
            "must be >= 0",
        )?;
        ensure(
            self.omega_e > 0.0 && self.omega_e.is_finite(),
            "omega_e",
            "must be > 0",
        )?;
        ensure(self.amplitude.is_finite(), "amplitude", "must be finite")?;
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.delta_t
    }

    /// Harmonic closest to the carrier.
    pub fn carrier_index(&self) -> i64 {
        (self.omega_e / self.spacing()).round() as i64
    }

    /// One pulse at local time `tau` in [0, δt).
    pub fn pulse(&self, tau: f64) -> f64 {
        self.amplitude * (-0.5 * self.gamma * tau).exp() * (self.omega_e * tau).sin()
    }
}

/// Samples `count` consecutive pulses on a grid of step `dt`.
pub fn synthesize_train(p: &TrainParams, count: usize, dt: f64) -> Result<Vec<f64>> {
    p.validate()?;
    if count == 0 {
        return Err(Error::InvalidSpec("pulse count must be >= 1".into()));
    }
    if !(dt > 0.0 && dt <= p.delta_t) {
        return Err(Error::InvalidSpec(
            "sample interval must lie in (0, delta_t]".into(),
        ));
    }
    let per = p.delta_t / dt;
    let samples = (count as f64 * per - 1e-9).ceil() as usize;
    let whole = per.round();
    let on_grid = (per - whole).abs() < 1e-9 * per;
    Ok((0..samples)
        .map(|k| {
            let tau = if on_grid {
                (k % whole as usize) as f64 * dt
            } else {
                let n = ((k as f64 + 1e-9) / per).floor();
                (k as f64 - n * per) * dt
            };
            p.pulse(tau.max(0.0))
        })
        .collect())
}

/// `∫_0^δt e^{-zτ} dτ = (1 - e^{-zδt}) / z`, given `e^{-zδt}` separately so
/// callers can supply it without large-phase rounding. Continuous at 0.
fn segment_integral(z: Complex64, dt: f64, e_zdt: Complex64) -> Complex64 {
    let x = z * dt;
    if x.norm() < 1e-3 {
        dt * (1.0 - x / 2.0 + x * x / 6.0 - x * x * x / 24.0)
    } else {
        (1.0 - e_zdt) / z
    }
}

/// `(A / 2iδt) [I(Γ - iω_e) - I(Γ + iω_e)]` given `e^{-(Γ ∓ iω_e)δt}`.
fn from_segments(p: &TrainParams, n: i64, e_minus: Complex64, e_plus: Complex64) -> Complex64 {
    let w = Complex64::new(0.0, p.omega_e);
    let g = Complex64::new(0.5 * p.gamma, n as f64 * p.spacing());
    let dt = p.delta_t;
    p.amplitude / (2.0 * Complex64::i() * dt)
        * (segment_integral(g - w, dt, e_minus) - segment_integral(g + w, dt, e_plus))
}

/// Fourier coefficient of absolute harmonic `n`.
///
/// Evaluated in partial fractions, which equals the closed form above but
/// stays finite where `Γ² + ω_e²` vanishes (lossless, on the carrier). The
/// phase `n δω δt = 2πn` drops out of every exponential.
pub fn coefficient(p: &TrainParams, n: i64) -> Complex64 {
    let decay = (-0.5 * p.gamma * p.delta_t).exp();
    let turn = Complex64::from_polar(1.0, p.omega_e * p.delta_t);
    from_segments(p, n, decay * turn, decay * turn.conj())
}

/// Coefficient for `ω_e δt = 2π n'`, where `e^{∓iω_e δt} = 1`.
pub fn matched_coefficient(p: &TrainParams, n: i64) -> Complex64 {
    let decay = Complex64::from((-0.5 * p.gamma * p.delta_t).exp());
    from_segments(p, n, decay, decay)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombSpectrum {
    /// Carrier of the pulses (rad/s).
    pub center: f64,
    /// Line spacing δω (rad/s).
    pub spacing: f64,
    /// Absolute harmonic of offset 0.
    pub carrier_index: i64,
    /// `(offset, c_n)` in increasing offset.
    pub coefficients: Vec<(i64, Complex64)>,
}

impl CombSpectrum {
    pub fn line_frequency(&self, offset: i64) -> f64 {
        (self.carrier_index + offset) as f64 * self.spacing
    }

    pub fn get(&self, offset: i64) -> Option<Complex64> {
        self.coefficients
            .binary_search_by_key(&offset, |&(k, _)| k)
            .ok()
            .map(|i| self.coefficients[i].1)
    }

    /// Rows of `(offset_hz, power_db)` relative to the strongest line.
    pub fn power_db(&self) -> Vec<(f64, f64)> {
        let peak = self
            .coefficients
            .iter()
            .map(|c| c.1.norm_sqr())
            .fold(0.0, f64::max);
        self.coefficients
            .iter()
            .map(|&(k, c)| {
                (
                    (self.line_frequency(k) - self.center) / (2.0 * PI),
                    10.0 * (c.norm_sqr() / peak).log10(),
                )
            })
            .collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(
            w,
            &["offset_hz", "power_db"],
            self.power_db().into_iter().map(|(a, b)| [a, b]),
        )
    }
}

/// Lines at `offsets` around the carrier harmonic.
pub fn comb_coefficients(p: &TrainParams, offsets: RangeInclusive<i64>) -> Result<CombSpectrum> {
    p.validate()?;
    let nc = p.carrier_index();
    Ok(CombSpectrum {
        center: p.omega_e,
        spacing: p.spacing(),
        carrier_index: nc,
        coefficients: offsets.map(|k| (k, coefficient(p, nc + k))).collect(),
    })
}

/// Strongest line over strongest other line, in dB.
pub fn sideband_suppression(s: &CombSpectrum) -> Result<f64> {
    let (peak_at, peak) = s
        .coefficients
        .iter()
        .map(|&(k, c)| (k, c.norm_sqr()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::NoSidebands)?;
    let side = s
        .coefficients
        .iter()
        .filter(|(k, _)| *k != peak_at)
        .map(|(_, c)| c.norm_sqr())
        .fold(f64::NAN, f64::max);
    if side.is_nan() || side == 0.0 {
        return Err(Error::NoSidebands);
    }
    Ok(10.0 * (peak / side).log10())
}

/// Distance of `x` from the nearest integer.
pub fn frac_distance(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Interval on the `grid` within `[lo, hi]` whose product with `freq_hz` is
/// closest to an integer. Ties go to the shorter interval.
pub fn matched_interval(freq_hz: f64, grid: f64, lo: f64, hi: f64) -> Result<f64> {
    ensure(
        grid > 0.0 && lo > 0.0 && hi >= lo,
        "grid",
        "need grid > 0 and 0 < lo <= hi",
    )?;
    let first = (lo / grid - 1e-9).ceil() as i64;
    let last = (hi / grid + 1e-9).floor() as i64;
    (first..=last)
        .map(|m| m as f64 * grid)
        .min_by(|a, b| frac_distance(freq_hz * a).total_cmp(&frac_distance(freq_hz * b)))
        .ok_or_else(|| Error::InvalidSpec("no grid point in the search window".into()))
}

pub fn write_train_csv<W: Write>(w: W, samples: &[f64], dt: f64) -> Result<()> {
    crate::io::write_columns(
        w,
        &["time_s", "amplitude"],
        samples.iter().enumerate().map(|(k, &v)| [k as f64 * dt, v]),
    )
}
