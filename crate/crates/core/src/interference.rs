//! Coherent superposition of pulses from one or more sources.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;

use crate::emission::{simulate_emission, DriveHamiltonianModel, EmissionPulse};
use crate::error::{Error, Result};
use crate::fluxdrive::{build_waveform, FluxWaveform, WaveformSpec};

/// Photon phase tolerance of [`phase_preserving_max`] (rad).
pub const PHASE_TOLERANCE: f64 = 0.02;
/// Required fraction of the achievable photon number.
pub const ENERGY_FRACTION: f64 = 0.99;
/// Default number of initial-flux samples per source map.
pub const MAP_POINTS: usize = 1024;

fn check_grid(a: &EmissionPulse, b: &EmissionPulse) -> Result<()> {
    if a.dt != b.dt {
        return Err(Error::GridMismatch(format!("dt {:e} vs {:e}", a.dt, b.dt)));
    }
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} samples",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Envelope of `p` expressed in a frame rotating at `carrier`.
fn reframe(p: &EmissionPulse, carrier: f64) -> Vec<Complex64> {
    let dw = carrier - p.carrier;
    if dw == 0.0 {
        return p.envelope.clone();
    }
    p.envelope
        .iter()
        .enumerate()
        .map(|(k, z)| z * Complex64::from_polar(1.0, dw * k as f64 * p.dt))
        .collect()
}

/// Temporal mode overlap `⟨f1, f2⟩` of the unit-normalised lab-frame fields.
pub fn mode_overlap(p1: &EmissionPulse, p2: &EmissionPulse) -> Result<Complex64> {
    check_grid(p1, p2)?;
    if p1.photons <= 0.0 || p2.photons <= 0.0 {
        return Err(Error::BelowThreshold {
            photons: p1.photons.min(p2.photons),
            threshold: 0.0,
        });
    }
    let f2 = reframe(p2, p1.carrier);
    let s: Complex64 = p1.envelope.iter().zip(&f2).map(|(a, b)| a.conj() * b).sum();
    Ok(s * p1.dt / (p1.photons * p2.photons).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    pub overlap: Complex64,
    /// Largest total photon number over the relative phase.
    pub n_max: f64,
    pub n_min: f64,
    /// Extremes of the photon number found in the mode of the first pulse.
    pub projected_max: f64,
    pub projected_min: f64,
}

pub fn overlap_report(p1: &EmissionPulse, p2: &EmissionPulse) -> Result<OverlapReport> {
    let m = mode_overlap(p1, p2)?;
    let (n1, n2) = (p1.photons, p2.photons);
    let cross = 2.0 * m.norm() * (n1 * n2).sqrt();
    let proj = |s: f64| (n1.sqrt() + s * m.norm() * n2.sqrt()).powi(2);
    Ok(OverlapReport {
        overlap: m,
        n_max: n1 + n2 + cross,
        n_min: (n1 + n2 - cross).max(0.0),
        projected_max: proj(1.0),
        projected_min: proj(-1.0),
    })
}

/// Pointwise field sum in the frame of the first pulse.
///
/// Carriers must agree within `carrier_tolerance` (rad/s); κ/100 is the
/// usual choice.
pub fn superpose(pulses: &[EmissionPulse], carrier_tolerance: f64) -> Result<EmissionPulse> {
    let first = pulses
        .first()
        .ok_or_else(|| Error::InvalidSpec("no pulses to superpose".into()))?;
    let mut sum = first.envelope.clone();
    let mut reference_index = first.reference_index;
    for p in &pulses[1..] {
        check_grid(first, p)?;
        let delta = (p.carrier - first.carrier).abs();
        if delta > carrier_tolerance {
            return Err(Error::CarrierMismatch {
                delta,
                tolerance: carrier_tolerance,
            });
        }
        for (s, z) in sum.iter_mut().zip(reframe(p, first.carrier)) {
            *s += z;
        }
        reference_index = reference_index.max(p.reference_index);
    }
    Ok(EmissionPulse::from_envelope(
        first.carrier,
        sum,
        first.dt,
        reference_index,
    ))
}

/// Photon number of `p` found in the temporal mode of `mode`.
pub fn projected_photons(mode: &EmissionPulse, p: &EmissionPulse) -> Result<f64> {
    let m = mode_overlap(mode, p)?;
    Ok(m.norm_sqr() * p.photons)
}

/// Same pulse with the field rotated by `phase`.
pub fn rotate(p: &EmissionPulse, phase: f64) -> EmissionPulse {
    let r = Complex64::from_polar(1.0, phase);
    EmissionPulse {
        envelope: p.envelope.iter().map(|z| z * r).collect(),
        ..p.clone()
    }
}

/// Superposed photon number as the second pulse is rotated through `points`
/// equally spaced relative phases in [0, 2π).
pub fn phase_sweep(
    p1: &EmissionPulse,
    p2: &EmissionPulse,
    points: usize,
    carrier_tolerance: f64,
) -> Result<Vec<(f64, f64)>> {
    (0..points)
        .map(|k| {
            let phase = 2.0 * PI * k as f64 / points as f64;
            let s = superpose(&[p1.clone(), rotate(p2, phase)], carrier_tolerance)?;
            Ok((phase, s.photons))
        })
        .collect()
}

/// `count` copies of `p` in phase, each starting where the previous one has
/// released [`ENERGY_FRACTION`] of its photons.
pub fn back_to_back(p: &EmissionPulse, count: usize) -> Result<EmissionPulse> {
    if count == 0 {
        return Err(Error::InvalidSpec("need at least one pulse".into()));
    }
    if p.photons <= 0.0 {
        return Err(Error::BelowThreshold {
            photons: p.photons,
            threshold: 0.0,
        });
    }
    let mut acc = 0.0;
    let spacing = p
        .envelope
        .iter()
        .position(|z| {
            acc += z.norm_sqr() * p.dt;
            acc >= ENERGY_FRACTION * p.photons
        })
        .map_or(p.len(), |k| k + 1);
    let mut env = vec![Complex64::default(); p.len() + (count - 1) * spacing];
    for c in 0..count {
        for (slot, z) in env[c * spacing..].iter_mut().zip(&p.envelope) {
            *slot += z;
        }
    }
    Ok(EmissionPulse::from_envelope(
        p.carrier,
        env,
        p.dt,
        p.reference_index,
    ))
}

pub fn write_sweep_csv<W: Write>(w: W, sweep: &[(f64, f64)]) -> Result<()> {
    crate::io::write_columns(
        w,
        &["rel_phase_rad", "photons"],
        sweep.iter().map(|&(a, b)| [a, b]),
    )
}

/// One pulse source driven by sudden steps into a fixed end flux.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseSource {
    pub model: DriveHamiltonianModel,
    pub end_flux: f64,
    pub dt: f64,
    pub lead: f64,
    pub tail: f64,
}

impl PulseSource {
    pub fn waveform(&self, initial_flux: f64) -> Result<FluxWaveform> {
        build_waveform(
            &WaveformSpec::sudden_step(initial_flux, self.end_flux, self.dt, self.lead, self.tail),
            self.dt,
        )
    }

    pub fn emit(&self, initial_flux: f64) -> Result<EmissionPulse> {
        simulate_emission(&self.waveform(initial_flux)?, &self.model)
    }

    pub fn carrier(&self) -> Result<f64> {
        self.model.circuit.resonance_frequency(self.end_flux)
    }
}

/// Reference amplitude of a source as a function of its initial flux.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub initial_flux: Vec<f64>,
    pub amplitude: Vec<Complex64>,
    pub photons: Vec<f64>,
}

impl PhaseMap {
    /// Samples `points` initial fluxes at cell centres of `[lo, hi)`.
    pub fn compute(src: &PulseSource, lo: f64, hi: f64, points: usize) -> Result<Self> {
        if points < 3 || !(hi > lo) {
            return Err(Error::InvalidParameter {
                name: "points",
                reason: "need at least 3 points over a non-empty range".into(),
            });
        }
        let step = (hi - lo) / points as f64;
        let mut map = Self {
            initial_flux: Vec::with_capacity(points),
            amplitude: Vec::with_capacity(points),
            photons: Vec::with_capacity(points),
        };
        for k in 0..points {
            let f = lo + (k as f64 + 0.5) * step;
            let p = src.emit(f)?;
            map.initial_flux.push(f);
            map.amplitude.push(p.reference_amplitude());
            map.photons.push(p.photons);
        }
        Ok(map)
    }

    pub fn max_photons(&self) -> f64 {
        self.photons.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteeredPulse {
    pub initial_fluxes: Vec<f64>,
    pub pulse: EmissionPulse,
    /// Phase of the superposed reference amplitude, in [0, 2π).
    pub phase: f64,
    /// Upper bound on the photon number reachable by the bank.
    pub achievable: f64,
}

fn projection(c: Complex64, target: f64) -> f64 {
    (c * Complex64::from_polar(1.0, -target)).re
}

/// Golden-section maximisation of the in-phase amplitude on `[a, b]`.
fn polish(src: &PulseSource, target: f64, mut a: f64, mut b: f64) -> Result<f64> {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let eval =
        |f: f64| -> Result<f64> { Ok(projection(src.emit(f)?.reference_amplitude(), target)) };
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (eval(x1)?, eval(x2)?);
    for _ in 0..50 {
        if (b - a).abs() < 1e-12 {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = eval(x2)?;
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = eval(x1)?;
        }
    }
    Ok(0.5 * (a + b))
}

fn wrap(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

/// Chooses initial fluxes so the superposed pulse has `target_phase` at the
/// reference instant with (near) maximal photon number.
///
/// Each source contributes most when its own amplitude points along the
/// target, so the search separates: the best map cell per source is refined
/// by golden section.
pub fn phase_preserving_max(
    sources: &[PulseSource],
    maps: &[PhaseMap],
    target_phase: f64,
    carrier_tolerance: f64,
) -> Result<SteeredPulse> {
    if sources.is_empty() || sources.len() != maps.len() {
        return Err(Error::InvalidSpec("need one phase map per source".into()));
    }
    let steer = |aim: f64| -> Result<(Vec<f64>, Vec<EmissionPulse>)> {
        let mut fluxes = Vec::with_capacity(sources.len());
        for (src, map) in sources.iter().zip(maps) {
            let n = map.initial_flux.len();
            let best = (0..n)
                .max_by(|&i, &j| {
                    projection(map.amplitude[i], aim).total_cmp(&projection(map.amplitude[j], aim))
                })
                .ok_or_else(|| Error::InvalidSpec("empty phase map".into()))?;
            let lo = map.initial_flux[best.saturating_sub(1)];
            let hi = map.initial_flux[(best + 1).min(n - 1)];
            fluxes.push(polish(src, aim, lo, hi)?);
        }
        let pulses = sources
            .iter()
            .zip(&fluxes)
            .map(|(s, &f)| s.emit(f))
            .collect::<Result<Vec<_>>>()?;
        Ok((fluxes, pulses))
    };
    let total =
        |ps: &[EmissionPulse]| -> Complex64 { ps.iter().map(|p| p.reference_amplitude()).sum() };
    let err = |ps: &[EmissionPulse]| wrap(total(ps).arg() - target_phase);

    // Secant on the aimed phase absorbs any residual phase error while
    // keeping every source at its own projection maximum.
    let (mut fluxes, mut pulses) = steer(target_phase)?;
    let mut best_err = err(&pulses);
    let (mut a0, mut e0) = (target_phase, best_err);
    let mut a1 = target_phase - e0;
    for _ in 0..8 {
        if best_err.abs() < 1e-6 {
            break;
        }
        let (f1, p1) = steer(a1)?;
        let e1 = err(&p1);
        if e1.abs() < best_err.abs() {
            best_err = e1;
            fluxes = f1;
            pulses = p1;
        }
        if (e1 - e0).abs() < 1e-15 {
            break;
        }
        let a2 = a1 - e1 * (a1 - a0) / (e1 - e0);
        (a0, e0, a1) = (a1, e1, a2);
    }

    let pulse = superpose(&pulses, carrier_tolerance)?;
    let phase = total(&pulses).arg().rem_euclid(2.0 * PI);

    // Bound: every source at its map maximum, all fields aligned in the mode
    // shape of the chosen pulses.
    let mut achievable = 0.0;
    for i in 0..pulses.len() {
        for j in 0..pulses.len() {
            let m = if i == j {
                1.0
            } else {
                mode_overlap(&pulses[i], &pulses[j])?.norm()
            };
            achievable += m * (maps[i].max_photons() * maps[j].max_photons()).sqrt();
        }
    }

    let phase_error = wrap(phase - target_phase).abs();
    if phase_error > PHASE_TOLERANCE || pulse.photons < ENERGY_FRACTION * achievable {
        return Err(Error::Unreachable(format!(
            "best setting gives phase error {phase_error:.3} rad and {:.1}% of the achievable photons",
            100.0 * pulse.photons / achievable
        )));
    }
    Ok(SteeredPulse {
        initial_fluxes: fluxes,
        pulse,
        phase,
        achievable,
    })
}
