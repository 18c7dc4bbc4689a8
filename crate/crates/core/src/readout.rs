//! Dispersive qubit readout with an emitted pulse as the probe.
//!
//! The probe reflects off a resonator whose frequency depends on the qubit
//! state. Averaged reflected traces for each state serve as the two
//! demodulation templates `f_g`, `f_e`. They are not orthogonal, so the
//! second quadrature is corrected for their overlap angle `θ`:
//!
//! ```text
//! I = Re⟨f_g, V⟩,    Q = (Re⟨f_e, V⟩ - I cos θ) / sin θ,    cos θ = Re⟨f_g, f_e⟩
//! ```

use std::f64::consts::PI;
use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use statrs::function::erf::erfc;

use crate::emission::EmissionPulse;
use crate::error::{ensure, Error, Result};

/// Templates closer than this (rad) cannot be separated.
pub const MIN_THETA: f64 = 0.01;
/// Points per state needed by [`discriminate_and_fidelity`].
pub const MIN_POINTS: usize = 100;
const BINARY_MAGIC: &[u8; 4] = b"IQTR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QubitState {
    Ground,
    Excited,
}

impl QubitState {
    fn index(self) -> u64 {
        match self {
            QubitState::Ground => 0,
            QubitState::Excited => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersiveConfig {
    /// Bare readout resonator frequency (rad/s).
    pub omega_r: f64,
    /// Dispersive shift (rad/s): the resonance sits at `ω_r ∓ χ` for g/e.
    pub chi: f64,
    /// Total linewidth (rad/s).
    pub kappa: f64,
    pub kappa_ext: f64,
    /// Added noise in photons per unit bandwidth: `E|n|² dt` per sample.
    pub noise_photons: f64,
    pub seed: u64,
}

impl Default for DispersiveConfig {
    fn default() -> Self {
        Self {
            omega_r: 2.0 * PI * 6.54e9,
            chi: 2.0 * PI * 0.5e6,
            kappa: 2.0 * PI * 1.0e6,
            kappa_ext: 2.0 * PI * 0.95e6,
            noise_photons: 1.0,
            seed: 0,
        }
    }
}

impl DispersiveConfig {
    pub fn validate(&self) -> Result<()> {
        ensure(self.omega_r > 0.0, "omega_r", "must be > 0")?;
        ensure(
            self.chi != 0.0 && self.chi.is_finite(),
            "chi",
            "must be non-zero",
        )?;
        ensure(self.kappa_ext > 0.0, "kappa_ext", "must be > 0")?;
        ensure(
            self.kappa >= self.kappa_ext,
            "kappa",
            "must be >= kappa_ext",
        )?;
        ensure(self.noise_photons >= 0.0, "noise_photons", "must be >= 0")?;
        Ok(())
    }

    pub fn resonance(&self, state: QubitState) -> f64 {
        match state {
            QubitState::Ground => self.omega_r - self.chi,
            QubitState::Excited => self.omega_r + self.chi,
        }
    }
}

/// Single-port reflection coefficient at drive frequency `omega`.
pub fn reflection_response(omega: f64, state: QubitState, cfg: &DispersiveConfig) -> Complex64 {
    let detuning = omega - cfg.resonance(state);
    1.0 - cfg.kappa_ext / Complex64::new(0.5 * cfg.kappa, -detuning)
}

/// Complex baseband record sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct IqTrace {
    pub dt: f64,
    pub samples: Vec<Complex64>,
}

impl IqTrace {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(
            w,
            &["time_s", "i", "q"],
            self.samples
                .iter()
                .enumerate()
                .map(|(k, z)| [k as f64 * self.dt, z.re, z.im]),
        )
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let rows = crate::io::read_columns(r, &["time_s", "i", "q"])?;
        if rows.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: rows.len(),
            });
        }
        Ok(Self {
            dt: rows[1][0] - rows[0][0],
            samples: rows.iter().map(|r| Complex64::new(r[1], r[2])).collect(),
        })
    }

    /// `IQTR`, dt (f64), count (u64), then I/Q pairs (f64), little endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&self.dt.to_le_bytes())?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for z in &self.samples {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Parse("not an IQ trace record".into()));
        }
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        r.read_exact(&mut b8)?;
        let count = u64::from_le_bytes(b8) as usize;
        let mut samples = Vec::with_capacity(count.min(1 << 24));
        for _ in 0..count {
            r.read_exact(&mut b8)?;
            let re = f64::from_le_bytes(b8);
            r.read_exact(&mut b8)?;
            samples.push(Complex64::new(re, f64::from_le_bytes(b8)));
        }
        Ok(Self { dt, samples })
    }
}

/// Noise-free reflected envelope of `probe`, in the probe's frame.
///
/// The resonator field obeys `da/dt = (iΔ - κ/2) a + sqrt(κ_ext) u(t)`, with
/// `u` linear between samples, and `out = u - sqrt(κ_ext) a`.
pub fn reflected_envelope(
    probe: &EmissionPulse,
    state: QubitState,
    cfg: &DispersiveConfig,
) -> Result<Vec<Complex64>> {
    cfg.validate()?;
    let detuning = probe.carrier - cfg.resonance(state);
    if detuning.abs() > 20.0 * cfg.kappa {
        log::warn!(
            "probe is {:.1} linewidths from the resonance; the reflection carries little state information",
            detuning.abs() / cfg.kappa
        );
    }
    let h = probe.dt;
    let z = Complex64::new(-0.5 * cfg.kappa, detuning);
    let ezh = (z * h).exp();
    let e1 = (ezh - 1.0) / z;
    let e2 = (ezh - 1.0 - z * h) / (z * z);
    let sk = cfg.kappa_ext.sqrt();
    let u = &probe.envelope;
    let mut a = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(u.len());
    for k in 0..u.len() {
        out.push(u[k] - sk * a);
        if k + 1 < u.len() {
            a = ezh * a + sk * (u[k] * e1 + (u[k + 1] - u[k]) / h * e2);
        }
    }
    Ok(out)
}

/// Reflected probe plus seeded white noise.
///
/// Shot `shot` for a given state draws from its own ChaCha stream, so
/// traces can be generated in any order or in parallel.
pub fn simulate_readout_trace(
    probe: &EmissionPulse,
    state: QubitState,
    cfg: &DispersiveConfig,
    shot: u64,
) -> Result<IqTrace> {
    let clean = reflected_envelope(probe, state, cfg)?;
    Ok(IqTrace {
        dt: probe.dt,
        samples: add_noise(&clean, probe.dt, cfg, state, shot),
    })
}

fn add_noise(
    clean: &[Complex64],
    dt: f64,
    cfg: &DispersiveConfig,
    state: QubitState,
    shot: u64,
) -> Vec<Complex64> {
    if cfg.noise_photons == 0.0 {
        return clean.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(2 * shot + state.index());
    let normal = Normal::new(0.0, (0.5 * cfg.noise_photons / dt).sqrt()).expect("finite sigma");
    clean
        .iter()
        .map(|c| c + Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng)))
        .collect()
}

/// Unit-norm temporal mode: `Σ|f|² dt = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalMode {
    pub samples: Vec<Complex64>,
    pub dt: f64,
}

impl TemporalMode {
    pub fn normalized(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        let norm = (samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt).sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidParameter {
                name: "mode",
                reason: "zero envelope cannot be normalised".into(),
            });
        }
        Ok(Self {
            samples: samples.iter().map(|z| z / norm).collect(),
            dt,
        })
    }

    /// Real inner product `Re Σ conj(f) v dt`.
    pub fn project(&self, v: &[Complex64]) -> f64 {
        self.samples
            .iter()
            .zip(v)
            .map(|(f, x)| (f.conj() * x).re)
            .sum::<f64>()
            * self.dt
    }

    /// Square window over the first `len` samples.
    pub fn square(len: usize, total: usize, dt: f64) -> Result<Self> {
        let samples = (0..total)
            .map(|k| Complex64::new(if k < len { 1.0 } else { 0.0 }, 0.0))
            .collect();
        Self::normalized(samples, dt)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeTemplates {
    pub f_g: TemporalMode,
    pub f_e: TemporalMode,
    /// Overlap angle `arccos Re⟨f_g, f_e⟩`.
    pub theta: f64,
}

impl ModeTemplates {
    pub fn new(f_g: TemporalMode, f_e: TemporalMode) -> Result<Self> {
        if f_g.dt != f_e.dt || f_g.samples.len() != f_e.samples.len() {
            return Err(Error::GridMismatch("templates differ in grid".into()));
        }
        let c = f_g.project(&f_e.samples).clamp(-1.0, 1.0);
        let theta = c.acos();
        if theta < MIN_THETA {
            return Err(Error::DegenerateModes { theta });
        }
        Ok(Self { f_g, f_e, theta })
    }
}

fn average(traces: &[IqTrace]) -> Result<(Vec<Complex64>, f64)> {
    let first = traces
        .first()
        .ok_or(Error::InsufficientData { needed: 2, got: 0 })?;
    let mut acc = vec![Complex64::new(0.0, 0.0); first.samples.len()];
    for t in traces {
        if t.dt != first.dt || t.samples.len() != acc.len() {
            return Err(Error::GridMismatch("traces differ in grid".into()));
        }
        for (a, s) in acc.iter_mut().zip(&t.samples) {
            *a += s;
        }
    }
    let n = traces.len() as f64;
    Ok((acc.into_iter().map(|a| a / n).collect(), first.dt))
}

/// Averaged, normalised traces of each state as demodulation templates.
pub fn extract_mode_templates(traces_g: &[IqTrace], traces_e: &[IqTrace]) -> Result<ModeTemplates> {
    for set in [traces_g, traces_e] {
        if set.len() < 2 {
            return Err(Error::InsufficientData {
                needed: 2,
                got: set.len(),
            });
        }
    }
    let (g, dt) = average(traces_g)?;
    let (e, dt_e) = average(traces_e)?;
    if dt != dt_e || g.len() != e.len() {
        return Err(Error::GridMismatch("g and e traces differ in grid".into()));
    }
    ModeTemplates::new(
        TemporalMode::normalized(g, dt)?,
        TemporalMode::normalized(e, dt)?,
    )
}

/// Effective quadratures of one record.
pub fn project_iq(v: &[Complex64], dt: f64, t: &ModeTemplates) -> Result<(f64, f64)> {
    if v.len() != t.f_g.samples.len() || dt != t.f_g.dt {
        return Err(Error::GridMismatch(format!(
            "trace has {} samples at {dt:e} s, templates {} at {:e} s",
            v.len(),
            t.f_g.samples.len(),
            t.f_g.dt
        )));
    }
    let i = t.f_g.project(v);
    let e = t.f_e.project(v);
    Ok((i, (e - i * t.theta.cos()) / t.theta.sin()))
}

pub fn project_trace(trace: &IqTrace, t: &ModeTemplates) -> Result<(f64, f64)> {
    project_iq(&trace.samples, trace.dt, t)
}

/// `|⟨h, s⟩|² / Var⟨h, n⟩` for white noise of `noise_photons`.
pub fn template_snr(template: &TemporalMode, signal: &[Complex64], noise_photons: f64) -> f64 {
    let s: Complex64 = template
        .samples
        .iter()
        .zip(signal)
        .map(|(f, x)| f.conj() * x)
        .sum::<Complex64>()
        * template.dt;
    s.norm_sqr() / noise_photons
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutModel {
    pub mean_g: Complex64,
    pub mean_e: Complex64,
    /// Pooled per-axis standard deviation.
    pub sigma: f64,
    /// Angle between the two centroids as seen from the origin (rad).
    pub theta: f64,
    /// Midpoint of the centroids; the threshold line passes through it
    /// perpendicular to `mean_e - mean_g`.
    pub threshold: Complex64,
    pub p_e_given_g: f64,
    pub p_g_given_e: f64,
    pub fidelity: f64,
    /// Half-width of the 95% binomial interval on the fidelity.
    pub ci95: f64,
    pub samples_per_state: (usize, usize),
}

impl ReadoutModel {
    pub fn separation(&self) -> f64 {
        (self.mean_e - self.mean_g).norm()
    }

    /// True when `p` is assigned to the excited state.
    pub fn classify(&self, p: Complex64) -> bool {
        let axis = self.mean_e - self.mean_g;
        ((p - self.threshold) * axis.conj()).re > 0.0
    }

    pub fn report(&self) -> String {
        format!(
            "fidelity = {:.6}\nci95 = {:.6}\np_e_given_g = {:.6}\np_g_given_e = {:.6}\nseparation = {:e}\nsigma = {:e}\nseparation_over_sigma = {:.6}\ntheta_rad = {:.6}\nsamples_g = {}\nsamples_e = {}\n",
            self.fidelity,
            self.ci95,
            self.p_e_given_g,
            self.p_g_given_e,
            self.separation(),
            self.sigma,
            self.separation() / self.sigma,
            self.theta,
            self.samples_per_state.0,
            self.samples_per_state.1
        )
    }
}

fn mean_and_var(points: &[Complex64]) -> (Complex64, f64) {
    let n = points.len() as f64;
    let mean: Complex64 = points.iter().sum::<Complex64>() / n;
    let var = points.iter().map(|p| (p - mean).norm_sqr()).sum::<f64>() / (2.0 * (n - 1.0));
    (mean, var)
}

/// Two-Gaussian discrimination with an equal-prior threshold.
pub fn discriminate_and_fidelity(
    points_g: &[Complex64],
    points_e: &[Complex64],
) -> Result<ReadoutModel> {
    for set in [points_g, points_e] {
        if set.len() < MIN_POINTS {
            return Err(Error::InsufficientData {
                needed: MIN_POINTS,
                got: set.len(),
            });
        }
    }
    let (mean_g, var_g) = mean_and_var(points_g);
    let (mean_e, var_e) = mean_and_var(points_e);
    let mut model = ReadoutModel {
        mean_g,
        mean_e,
        sigma: (0.5 * (var_g + var_e)).sqrt(),
        theta: {
            let c = (mean_g.conj() * mean_e).re / (mean_g.norm() * mean_e.norm());
            if c.is_finite() {
                c.clamp(-1.0, 1.0).acos()
            } else {
                0.0
            }
        },
        threshold: 0.5 * (mean_g + mean_e),
        p_e_given_g: 0.0,
        p_g_given_e: 0.0,
        fidelity: 0.5,
        ci95: 0.0,
        samples_per_state: (points_g.len(), points_e.len()),
    };
    let (ng, ne) = (points_g.len() as f64, points_e.len() as f64);
    if mean_g == mean_e {
        // No axis to threshold along: every shot is a coin toss.
        model.p_e_given_g = 0.5;
        model.p_g_given_e = 0.5;
    } else {
        model.p_e_given_g = points_g.iter().filter(|&&p| model.classify(p)).count() as f64 / ng;
        model.p_g_given_e = points_e.iter().filter(|&&p| !model.classify(p)).count() as f64 / ne;
    }
    model.fidelity = 1.0 - 0.5 * (model.p_e_given_g + model.p_g_given_e);
    let se = 0.5
        * (model.p_e_given_g * (1.0 - model.p_e_given_g) / ng
            + model.p_g_given_e * (1.0 - model.p_g_given_e) / ne)
            .sqrt();
    model.ci95 = 1.96 * se;
    Ok(model)
}

/// Assignment fidelity of two isotropic Gaussians `separation/σ` apart.
pub fn gaussian_overlap_fidelity(separation_over_sigma: f64) -> f64 {
    1.0 - 0.5 * erfc(separation_over_sigma / (2.0 * 2f64.sqrt()))
}

/// Inverse of [`gaussian_overlap_fidelity`] on (0.5, 1).
pub fn separation_for_fidelity(fidelity: f64) -> Result<f64> {
    ensure(
        fidelity > 0.5 && fidelity < 1.0,
        "fidelity",
        "must lie in (0.5, 1)",
    )?;
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_overlap_fidelity(mid) < fidelity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Noise level at which the noiseless g/e responses to `probe` sit
/// `separation_over_sigma` standard deviations apart in the I/Q plane.
pub fn noise_for_separation(
    probe: &EmissionPulse,
    cfg: &DispersiveConfig,
    separation_over_sigma: f64,
) -> Result<f64> {
    let g = reflected_envelope(probe, QubitState::Ground, cfg)?;
    let e = reflected_envelope(probe, QubitState::Excited, cfg)?;
    let t = ModeTemplates::new(
        TemporalMode::normalized(g.clone(), probe.dt)?,
        TemporalMode::normalized(e.clone(), probe.dt)?,
    )?;
    let (ig, qg) = project_iq(&g, probe.dt, &t)?;
    let (ie, qe) = project_iq(&e, probe.dt, &t)?;
    let d = ((ie - ig).powi(2) + (qe - qg).powi(2)).sqrt();
    let sigma = d / separation_over_sigma;
    // Projections onto a unit mode carry variance noise/2 per axis.
    Ok(2.0 * sigma * sigma)
}

/// Frequency-resolved complex response.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub freq: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Divides the raw response by the background, point by point.
pub fn background_subtract(
    raw: &ComplexSpectrum,
    background: &ComplexSpectrum,
) -> Result<ComplexSpectrum> {
    if raw.freq.len() != background.freq.len()
        || raw.values.len() != raw.freq.len()
        || background.values.len() != background.freq.len()
    {
        return Err(Error::GridMismatch(
            "raw and background lengths differ".into(),
        ));
    }
    for (a, b) in raw.freq.iter().zip(&background.freq) {
        if (a - b).abs() > 1e-9 * a.abs().max(b.abs()).max(1.0) {
            return Err(Error::GridMismatch(format!("frequency {a:e} vs {b:e}")));
        }
    }
    let values = raw
        .values
        .iter()
        .zip(&background.values)
        .enumerate()
        .map(|(index, (r, b))| {
            if b.norm() < 1e-12 {
                Err(Error::ZeroBackground { index })
            } else {
                Ok(r / b)
            }
        })
        .collect::<Result<_>>()?;
    Ok(ComplexSpectrum {
        freq: raw.freq.clone(),
        values,
    })
}
