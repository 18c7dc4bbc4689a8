//! Electrical model of the SQUID-embedded half-wave resonator.
//!
//! The SQUID acts as a flux-tunable inductor in series with the resonator
//! inductance. Flux is always given in units of the flux quantum.

use std::f64::consts::PI;
use std::io::{Read, Write};

use crate::error::{ensure, Error, Result};
use crate::fit::{levenberg_marquardt, LmOptions};

/// Flux quantum h/2e in webers.
pub const FLUX_QUANTUM: f64 = 2.067_833_848_461_929e-15;

/// Distance from a half-integer flux inside which a symmetric SQUID is
/// treated as divergent.
pub const HALF_FLUX_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorCircuit {
    /// Resonator inductance (H).
    pub l_r: f64,
    /// Resonator capacitance (F).
    pub c_r: f64,
    /// Junction critical current (A).
    pub i_c: f64,
    /// Junction asymmetry `d` in [0, 1).
    pub asymmetry: f64,
    /// External coupling rate (rad/s).
    pub kappa_ext: f64,
    /// Internal loss rate (rad/s).
    pub kappa_int: f64,
}

impl ResonatorCircuit {
    pub fn new(
        l_r: f64,
        c_r: f64,
        i_c: f64,
        asymmetry: f64,
        kappa_ext: f64,
        kappa_int: f64,
    ) -> Result<Self> {
        let c = Self {
            l_r,
            c_r,
            i_c,
            asymmetry,
            kappa_ext,
            kappa_int,
        };
        c.validate()?;
        let frac = c.squid_fraction();
        if !(1e-3..=0.5).contains(&frac) {
            log::warn!(
                "SQUID holds {:.3}% of the total inductance at zero flux, outside [0.1%, 50%]",
                100.0 * frac
            );
        }
        Ok(c)
    }

    /// Critical current giving the requested SQUID inductance at zero flux.
    pub fn critical_current_for(l_j0: f64) -> f64 {
        FLUX_QUANTUM / (2.0 * PI * l_j0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_pos = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        ensure(finite_pos(self.l_r), "l_r", "must be finite and > 0")?;
        ensure(finite_pos(self.c_r), "c_r", "must be finite and > 0")?;
        ensure(finite_pos(self.i_c), "i_c", "must be finite and > 0")?;
        ensure(
            self.asymmetry.is_finite() && (0.0..1.0).contains(&self.asymmetry),
            "asymmetry",
            "must lie in [0, 1)",
        )?;
        ensure(
            finite_nonneg(self.kappa_ext),
            "kappa_ext",
            "must be finite and >= 0",
        )?;
        ensure(
            finite_nonneg(self.kappa_int),
            "kappa_int",
            "must be finite and >= 0",
        )?;
        Ok(())
    }

    /// Total loss rate; also the energy decay rate of an emitted pulse.
    pub fn kappa(&self) -> f64 {
        self.kappa_ext + self.kappa_int
    }

    /// SQUID inductance at zero flux.
    pub fn squid_inductance_zero(&self) -> f64 {
        FLUX_QUANTUM / (2.0 * PI * self.i_c)
    }

    /// Fraction of the total inductance held by the SQUID at zero flux.
    pub fn squid_fraction(&self) -> f64 {
        let lj = self.squid_inductance_zero();
        lj / (lj + self.l_r)
    }

    /// Flux-dependent SQUID inductance.
    ///
    /// `L_j = Φ0 / (2π I_c sqrt(cos²(πΦ) + d² sin²(πΦ)))`; for `d = 0` this
    /// is the symmetric `Φ0 / (2π I_c |cos(πΦ)|)`.
    pub fn squid_inductance(&self, flux: f64) -> Result<f64> {
        if !flux.is_finite() {
            return Err(Error::InvalidParameter {
                name: "flux",
                reason: "must be finite".into(),
            });
        }
        let reduced = flux - flux.floor();
        if self.asymmetry == 0.0 && (reduced - 0.5).abs() < HALF_FLUX_GUARD {
            return Err(Error::DivergentInductance { flux });
        }
        // Reduce to [0, 1) first so periodicity is exact in floating point.
        let (s, c) = (PI * reduced).sin_cos();
        let d = self.asymmetry;
        let factor = (c * c + d * d * s * s).sqrt();
        Ok(self.squid_inductance_zero() / factor)
    }

    /// Angular resonance frequency of the fundamental mode.
    pub fn resonance_frequency(&self, flux: f64) -> Result<f64> {
        let lj = self.squid_inductance(flux)?;
        Ok(1.0 / ((self.l_r + lj) * self.c_r).sqrt())
    }

    /// Resonance frequency at the integer-flux sweet spot.
    pub fn sweet_spot_frequency(&self) -> f64 {
        1.0 / ((self.l_r + self.squid_inductance_zero()) * self.c_r).sqrt()
    }

    /// Flux inside `[branch - 1/2, branch]` whose resonance equals `omega`.
    ///
    /// Returns `None` when `omega` is outside the range covered by that half
    /// branch.
    pub fn flux_for_frequency(&self, omega: f64, branch: i64) -> Option<f64> {
        let lo_flux = branch as f64 - 0.5 + 1e-7;
        let hi_flux = branch as f64;
        let f = |x: f64| self.resonance_frequency(x).map(|w| w - omega).ok();
        let (mut lo, mut hi) = (lo_flux, hi_flux);
        let (flo, fhi) = (f(lo)?, f(hi)?);
        if flo > 0.0 || fhi < 0.0 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(0.5 * (lo + hi))
    }
}

pub fn squid_inductance(flux: f64, c: &ResonatorCircuit) -> Result<f64> {
    c.squid_inductance(flux)
}

pub fn resonance_frequency(flux: f64, c: &ResonatorCircuit) -> Result<f64> {
    c.resonance_frequency(flux)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningCurveSample {
    /// Applied flux in flux-quantum units, as read off the bias axis.
    pub flux: f64,
    /// Measured resonance frequency (Hz).
    pub frequency: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuningFit {
    /// Circuit with fitted `i_c` and `l_r`; `c_r`, asymmetry and loss rates
    /// are carried over from the initial guess.
    pub circuit: ResonatorCircuit,
    /// Bias value corresponding to zero loop flux.
    pub flux_offset: f64,
    /// Loop flux per unit of bias (1.0 for a perfectly calibrated axis).
    pub flux_scale: f64,
    /// Norm of the relative frequency residuals.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl TuningFit {
    /// Product `L_r C_r` of the fitted circuit.
    pub fn lc_product(&self) -> f64 {
        self.circuit.l_r * self.circuit.c_r
    }

    /// Model frequency (Hz) at a bias value.
    pub fn frequency_at(&self, bias: f64) -> Result<f64> {
        let w = self
            .circuit
            .resonance_frequency((bias - self.flux_offset) * self.flux_scale)?;
        Ok(w / (2.0 * PI))
    }
}

/// Generates noiseless tuning-curve samples (Hz) at the given bias points.
pub fn generate_tuning_curve(
    c: &ResonatorCircuit,
    fluxes: &[f64],
) -> Result<Vec<TuningCurveSample>> {
    fluxes
        .iter()
        .map(|&flux| {
            Ok(TuningCurveSample {
                flux,
                frequency: c.resonance_frequency(flux)? / (2.0 * PI),
            })
        })
        .collect()
}

/// Least-squares fit of the tuning curve.
///
/// Fits `I_c`, `L_r`, a bias offset and a bias scale; `C_r` and the junction
/// asymmetry are held at their initial-guess values because only `L_r C_r`
/// and `L_j/L_r` are separately identifiable from frequencies alone.
/// Positivity is enforced through a log parametrisation.
pub fn fit_tuning_curve(
    samples: &[TuningCurveSample],
    initial_guess: &ResonatorCircuit,
) -> Result<TuningFit> {
    if samples.len() < 4 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    initial_guess.validate()?;
    let (min_f, max_f) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| {
            (a.min(s.flux), b.max(s.flux))
        });
    if max_f - min_f < 0.5 {
        return Err(Error::InsufficientData {
            needed: 4,
            got: samples.len(),
        });
    }
    if samples
        .iter()
        .any(|s| !(s.frequency > 0.0 && s.frequency.is_finite()))
    {
        return Err(Error::InvalidParameter {
            name: "frequency",
            reason: "tuning-curve frequencies must be finite and > 0".into(),
        });
    }

    // Start the offset at the sample with the highest frequency (sweet spot).
    let top = samples
        .iter()
        .max_by(|a, b| a.frequency.total_cmp(&b.frequency))
        .expect("non-empty");
    let offset0 = top.flux - top.flux.round();

    let build = |p: &[f64]| -> Result<ResonatorCircuit> {
        let c = ResonatorCircuit {
            i_c: p[0].exp(),
            l_r: p[1].exp(),
            ..*initial_guess
        };
        if !(c.i_c.is_finite() && c.l_r.is_finite()) {
            return Err(Error::FitDiverged("parameters left their bounds".into()));
        }
        Ok(c)
    };
    let residuals = |p: &[f64]| -> Result<Vec<f64>> {
        let c = build(p)?;
        let scale = p[3].exp();
        samples
            .iter()
            .map(|s| {
                let w = c.resonance_frequency((s.flux - p[2]) * scale)?;
                Ok(w / (2.0 * PI) / s.frequency - 1.0)
            })
            .collect()
    };

    let p0 = [initial_guess.i_c.ln(), initial_guess.l_r.ln(), offset0, 0.0];
    let sol = levenberg_marquardt(residuals, &p0, LmOptions::default())?;
    let circuit = build(&sol.params)?;
    let scale = sol.params[3].exp();
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::FitDiverged("flux scale left its bounds".into()));
    }
    Ok(TuningFit {
        circuit,
        flux_offset: sol.params[2],
        flux_scale: scale,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
    })
}

pub fn write_tuning_csv<W: Write>(w: W, samples: &[TuningCurveSample]) -> Result<()> {
    crate::io::write_columns(
        w,
        &["flux_phi0", "frequency_hz"],
        samples.iter().map(|s| [s.flux, s.frequency]),
    )
}

pub fn read_tuning_csv<R: Read>(r: R) -> Result<Vec<TuningCurveSample>> {
    let rows = crate::io::read_columns(r, &["flux_phi0", "frequency_hz"])?;
    Ok(rows
        .into_iter()
        .map(|row| TuningCurveSample {
            flux: row[0],
            frequency: row[1],
        })
        .collect())
}
