//! Emission of a coherent pulse from a flux quench.
//!
//! The flux shifts the equilibrium of the resonator mode. Writing the field
//! as `a = α_eq(φ) + β`, the deviation obeys
//!
//! ```text
//! dβ/dt = -(i ω(φ) + κ/2) β - dα_eq/dt,     β(0) = 0
//! ```
//!
//! A fast passage through a half-integer flux boundary moves `α_eq` faster
//! than the field can follow, leaving a displaced (coherent) state that
//! leaks out through the external port at rate `κ_ext`.
//!
//! The equation is integrated with an exponential integrator: over each
//! sub-step `ω` is frozen at its midpoint value and `α_eq` is taken linear in
//! time, for which the update is exact. Sub-steps are refined until
//! `ω h ≤ 0.5` and the boundary transition is resolved.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use statrs::function::erf::erf;

use crate::circuit::ResonatorCircuit;
use crate::error::{ensure, Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};
use crate::fluxdrive::FluxWaveform;

/// Minimum sub-steps per waveform interval while the flux is moving.
pub const MIN_SUBSTEPS: usize = 10;
/// Upper bound on sub-steps per waveform interval.
pub const MAX_SUBSTEPS: usize = 1_000_000;
/// Largest phase advance `ω h` allowed in one sub-step.
pub const MAX_PHASE_PER_SUBSTEP: f64 = 0.5;
/// Ring-down required after the drive, in units of `1/κ`.
pub const MIN_RINGDOWN: f64 = 5.0;
/// Pulses with fewer photons are not analysed.
pub const PHOTON_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveHamiltonianModel {
    pub circuit: ResonatorCircuit,
    /// Magnitude of the linear drive term at the sweet spot (rad/s).
    pub lambda_scale: f64,
    /// Width (Φ0) of the transition of the drive term across a
    /// half-integer flux boundary.
    pub transition_width: f64,
}

impl DriveHamiltonianModel {
    pub fn new(
        circuit: ResonatorCircuit,
        lambda_scale: f64,
        transition_width: f64,
    ) -> Result<Self> {
        let m = Self {
            circuit,
            lambda_scale,
            transition_width,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        self.circuit.validate()?;
        ensure(
            self.lambda_scale.is_finite() && self.lambda_scale > 0.0,
            "lambda_scale",
            "must be finite and > 0",
        )?;
        ensure(
            self.transition_width.is_finite()
                && self.transition_width > 0.0
                && self.transition_width < 0.1,
            "transition_width",
            "must lie in (0, 0.1) flux quanta",
        )?;
        Ok(())
    }

    /// Branch profile: +1 inside even branches, -1 inside odd ones, with an
    /// error-function crossover of width `transition_width` at each
    /// half-integer flux.
    pub fn branch_profile(&self, flux: f64) -> f64 {
        let reduced = flux - 2.0 * (flux / 2.0).floor();
        erf((PI * reduced).cos() / (PI * self.transition_width))
    }

    /// Equilibrium displacement magnitude deep inside a branch.
    pub fn displacement_scale(&self) -> f64 {
        self.lambda_scale / self.circuit.sweet_spot_frequency()
    }

    /// Coefficient λ(φ) of the `a + a†` term (rad/s).
    ///
    /// It follows the mode frequency inside a branch, so the equilibrium
    /// `-λ/ω` is flat away from the boundaries and flips sign across them.
    pub fn drive_term(&self, flux: f64) -> Result<f64> {
        let w = self.circuit.resonance_frequency(flux)?;
        Ok(self.displacement_scale() * self.branch_profile(flux) * w)
    }

    /// Real equilibrium displacement `α_eq = -λ(φ)/ω(φ)`.
    pub fn displacement(&self, flux: f64) -> f64 {
        -self.displacement_scale() * self.branch_profile(flux)
    }

    /// Equilibrium displacement of the shifted oscillator at `flux`.
    pub fn equilibrium_displacement(&self, flux: f64) -> Result<Complex64> {
        self.circuit.resonance_frequency(flux)?;
        Ok(Complex64::new(self.displacement(flux), 0.0))
    }

    /// Closed-form photon number for an instantaneous jump between fluxes.
    pub fn sudden_quench_photons(&self, from: f64, to: f64) -> f64 {
        let jump = self.displacement(to) - self.displacement(from);
        let kappa = self.circuit.kappa();
        jump * jump * self.circuit.kappa_ext / kappa
    }

    /// Same model with the drive term scaled by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            lambda_scale: self.lambda_scale * c,
            ..*self
        }
    }
}

pub fn equilibrium_displacement(flux: f64, m: &DriveHamiltonianModel) -> Result<Complex64> {
    m.equilibrium_displacement(flux)
}

/// Output pulse in the frame rotating at `carrier`.
///
/// `envelope[k]` is the output field `sqrt(κ_ext) β(t_k) e^{i carrier t_k}`
/// at `t_k = k dt`, so `|envelope|²` is a photon flux (1/s).
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionPulse {
    pub carrier: f64,
    pub envelope: Vec<Complex64>,
    pub dt: f64,
    pub photons: f64,
    /// Sample at which the drive reached its final value.
    pub reference_index: usize,
}

impl EmissionPulse {
    pub fn from_envelope(
        carrier: f64,
        envelope: Vec<Complex64>,
        dt: f64,
        reference_index: usize,
    ) -> Self {
        let photons = envelope.iter().map(|z| z.norm_sqr()).sum::<f64>() * dt;
        Self {
            carrier,
            envelope,
            dt,
            photons,
            reference_index,
        }
    }

    pub fn len(&self) -> usize {
        self.envelope.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envelope.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.envelope.len()).map(move |k| k as f64 * self.dt)
    }

    /// Complex amplitude at the reference instant.
    pub fn reference_amplitude(&self) -> Complex64 {
        self.envelope
            .get(self.reference_index)
            .copied()
            .unwrap_or_default()
    }

    /// Unit-norm temporal mode `f` with `Σ|f|² dt = 1`.
    pub fn normalized(&self) -> Option<Vec<Complex64>> {
        if self.photons <= 0.0 {
            return None;
        }
        let s = self.photons.sqrt();
        Some(self.envelope.iter().map(|z| z / s).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        crate::io::write_columns(
            w,
            &["time_s", "env_re", "env_im"],
            self.envelope
                .iter()
                .enumerate()
                .map(|(k, z)| [k as f64 * self.dt, z.re, z.im]),
        )
    }

    /// Sidecar metadata record.
    pub fn metadata(&self) -> String {
        format!(
            "carrier_rad_s = {:e}\ndt_s = {:e}\nphotons = {:e}\nreference_index = {}\nsamples = {}\n",
            self.carrier,
            self.dt,
            self.photons,
            self.reference_index,
            self.envelope.len()
        )
    }
}

fn distance_to_boundary(lo: f64, hi: f64) -> f64 {
    // Distance from [lo, hi] to the nearest half-integer.
    let h = (lo - 0.5).ceil() + 0.5;
    if h <= hi {
        return 0.0;
    }
    let below = (lo - 0.5).floor() + 0.5;
    (lo - below).min(h - hi)
}

/// Integrates the emission for a flux waveform.
pub fn simulate_emission(w: &FluxWaveform, m: &DriveHamiltonianModel) -> Result<EmissionPulse> {
    m.validate()?;
    let c = &m.circuit;
    let kappa = c.kappa();
    if kappa <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "kappa",
            reason: "emission needs a non-zero total loss rate".into(),
        });
    }
    let dt = w.dt();
    let s = w.samples();
    let ringdown = (s.len() - 1 - w.drive_end()) as f64 * dt;
    if ringdown * kappa < MIN_RINGDOWN * (1.0 - 1e-9) {
        return Err(Error::InvalidSpec(format!(
            "waveform leaves {:.2}/κ of ring-down after the drive; {MIN_RINGDOWN}/κ required",
            ringdown * kappa
        )));
    }

    let omega: Vec<f64> = s
        .iter()
        .map(|&f| c.resonance_frequency(f))
        .collect::<Result<_>>()?;
    let carrier = *omega.last().expect("waveform has samples");
    let sqrt_ext = c.kappa_ext.sqrt();
    let half_kappa = 0.5 * kappa;
    let refine_width = m.transition_width / 8.0;

    let mut beta = Complex64::new(0.0, 0.0);
    let mut envelope = Vec::with_capacity(s.len());
    envelope.push(beta);
    let mut hold_cache: Option<(f64, Complex64)> = None;

    for k in 0..s.len() - 1 {
        let (fa, fb) = (s[k], s[k + 1]);
        if fa == fb {
            let decay = match hold_cache {
                Some((f, d)) if f == fa => d,
                _ => {
                    let d = (-Complex64::new(half_kappa, omega[k]) * dt).exp();
                    hold_cache = Some((fa, d));
                    d
                }
            };
            beta *= decay;
        } else {
            let (lo, hi) = (fa.min(fb), fa.max(fb));
            let mut wmax = omega[k].max(omega[k + 1]);
            if lo.ceil() <= hi.floor() {
                // The interval passes a sweet spot.
                wmax = wmax.max(c.sweet_spot_frequency());
            }
            let mut steps = MIN_SUBSTEPS.max((wmax * dt / MAX_PHASE_PER_SUBSTEP).ceil() as usize);
            if distance_to_boundary(lo, hi) < 8.0 * m.transition_width {
                steps = steps.max(((hi - lo) / refine_width).ceil() as usize);
            }
            if steps > MAX_SUBSTEPS {
                return Err(Error::StepTooCoarse(format!(
                    "interval {k} needs {steps} sub-steps (limit {MAX_SUBSTEPS}); refine the waveform grid"
                )));
            }
            let h = dt / steps as f64;
            let df = (fb - fa) / steps as f64;
            let mut alpha_a = m.displacement(fa);
            for j in 0..steps {
                let f0 = fa + df * j as f64;
                let f1 = if j + 1 == steps { fb } else { f0 + df };
                let alpha_b = m.displacement(f1);
                let w_mid = c.resonance_frequency(0.5 * (f0 + f1))?;
                let z = Complex64::new(half_kappa, w_mid);
                let decay = (-z * h).exp();
                let rate = (alpha_b - alpha_a) / h;
                beta = decay * beta - rate * (1.0 - decay) / z;
                alpha_a = alpha_b;
            }
        }
        let t = (k + 1) as f64 * dt;
        envelope.push(sqrt_ext * beta * Complex64::from_polar(1.0, carrier * t));
    }

    Ok(EmissionPulse::from_envelope(
        carrier,
        envelope,
        dt,
        w.drive_end(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseMetrics {
    /// Phase at the reference instant, in [0, 2π).
    pub phase: f64,
    pub photons: f64,
    /// Emission frequency: carrier plus fitted offset (rad/s).
    pub frequency: f64,
    /// Energy decay rate (1/s).
    pub gamma: f64,
    /// Fitted output amplitude at the reference instant (1/√s).
    pub amplitude: f64,
}

/// Fits `A e^{-γ t/2} e^{i(δω t + θ)}` to the free decay after the drive.
pub fn pulse_metrics(p: &EmissionPulse) -> Result<PulseMetrics> {
    pulse_metrics_with_threshold(p, PHOTON_THRESHOLD)
}

pub fn pulse_metrics_with_threshold(p: &EmissionPulse, threshold: f64) -> Result<PulseMetrics> {
    if !(p.photons > threshold) {
        return Err(Error::BelowThreshold {
            photons: p.photons,
            threshold,
        });
    }
    let start = p.reference_index.min(p.envelope.len().saturating_sub(1));
    let data = &p.envelope[start..];
    let peak = data.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(Error::BelowThreshold {
            photons: 0.0,
            threshold,
        });
    }
    let used: Vec<(f64, Complex64)> = data
        .iter()
        .enumerate()
        .map(|(k, z)| (k as f64 * p.dt, *z))
        .take_while(|(_, z)| z.norm() > 1e-4 * peak)
        .collect();
    if used.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: used.len(),
        });
    }

    // Linear regressions on log-amplitude and unwrapped phase seed the fit.
    let n = used.len() as f64;
    let mean_t = used.iter().map(|(t, _)| t).sum::<f64>() / n;
    let var_t = used.iter().map(|(t, _)| (t - mean_t).powi(2)).sum::<f64>();
    let mut phases = Vec::with_capacity(used.len());
    let mut prev = used[0].1.arg();
    let mut unwrap = 0.0;
    for (_, z) in &used {
        let a = z.arg();
        let mut d = a - prev;
        while d > PI {
            d -= 2.0 * PI;
        }
        while d < -PI {
            d += 2.0 * PI;
        }
        unwrap += d;
        prev = a;
        phases.push(used[0].1.arg() + unwrap);
    }
    let slope_of = |ys: &[f64]| -> (f64, f64) {
        let mean_y = ys.iter().sum::<f64>() / n;
        let cov: f64 = used
            .iter()
            .zip(ys)
            .map(|((t, _), y)| (t - mean_t) * (y - mean_y))
            .sum();
        let b = cov / var_t;
        (b, mean_y - b * mean_t)
    };
    let log_amp: Vec<f64> = used.iter().map(|(_, z)| z.norm().ln()).collect();
    let (amp_slope, amp_icept) = slope_of(&log_amp);
    let (ph_slope, ph_icept) = slope_of(&phases);

    // Fit in units scaled to the pulse so the parameters are O(1).
    let t_scale = used.last().expect("len >= 4").0.max(p.dt);
    let residual = |q: &[f64]| -> Result<Vec<f64>> {
        let mut r = Vec::with_capacity(2 * used.len());
        for (t, z) in &used {
            let x = t / t_scale;
            let model = Complex64::from_polar((q[0] - 0.5 * q[1] * x).exp(), q[2] * x + q[3]);
            let d = model - z / peak;
            r.push(d.re);
            r.push(d.im);
        }
        Ok(r)
    };
    let q0 = [
        amp_icept - peak.ln(),
        -2.0 * amp_slope * t_scale,
        ph_slope * t_scale,
        ph_icept,
    ];
    let sol = levenberg_marquardt(residual, &q0, LmOptions::default())?;
    let q = sol.params;
    let gamma = q[1] / t_scale;
    let delta = q[2] / t_scale;
    if !(gamma.is_finite() && delta.is_finite()) {
        return Err(Error::FitDiverged(
            "pulse fit produced non-finite parameters".into(),
        ));
    }
    Ok(PulseMetrics {
        phase: q[3].rem_euclid(2.0 * PI),
        photons: p.photons,
        frequency: p.carrier + delta,
        gamma,
        amplitude: peak * q[0].exp(),
    })
}
