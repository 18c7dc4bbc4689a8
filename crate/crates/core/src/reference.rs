//! Reference device and drive used for calibration.
//!
//! The constants below were produced by [`calibrate_lambda_scale`] and
//! [`calibrate_twisted_pair`] on the reference step and are checked by the
//! tests in this module.

use std::f64::consts::PI;

use crate::circuit::ResonatorCircuit;
use crate::emission::{simulate_emission, DriveHamiltonianModel};
use crate::error::{Error, Result};
use crate::fluxdrive::{
    apply_channel, build_waveform, ChannelModel, FluxWaveform, WaveformSpec, DEFAULT_DT,
};

pub const RESONATOR_INDUCTANCE: f64 = 1.8e-9;
pub const SQUID_INDUCTANCE: f64 = 100e-12;
pub const SWEET_SPOT_HZ: f64 = 6.5401e9;
pub const ASYMMETRY: f64 = 0.1;
pub const KAPPA_EXT: f64 = 2.0 * PI * 0.95e6;
pub const KAPPA_INT: f64 = 2.0 * PI * 0.05e6;
pub const TRANSITION_WIDTH: f64 = 1e-3;
/// Drive-term scale giving [`TARGET_PHOTONS`] for the reference step.
pub const LAMBDA_SCALE: f64 = 6.671_470e11;
pub const TARGET_PHOTONS: f64 = 1000.0;

pub const STEP_START: f64 = 0.2;
pub const STEP_END: f64 = 0.8;
pub const STEP_LEAD: f64 = 10e-9;
/// Ring-down after the reference step, in units of `1/κ`.
pub const STEP_RINGDOWN: f64 = 12.0;

pub fn circuit() -> ResonatorCircuit {
    let l_total = RESONATOR_INDUCTANCE + SQUID_INDUCTANCE;
    let w = 2.0 * PI * SWEET_SPOT_HZ;
    ResonatorCircuit {
        l_r: RESONATOR_INDUCTANCE,
        c_r: 1.0 / (w * w * l_total),
        i_c: ResonatorCircuit::critical_current_for(SQUID_INDUCTANCE),
        asymmetry: ASYMMETRY,
        kappa_ext: KAPPA_EXT,
        kappa_int: KAPPA_INT,
    }
}

pub fn drive_model() -> DriveHamiltonianModel {
    DriveHamiltonianModel {
        circuit: circuit(),
        lambda_scale: LAMBDA_SCALE,
        transition_width: TRANSITION_WIDTH,
    }
}

/// Sudden 0.2 → 0.8 step on the given grid with a long ring-down.
pub fn step_waveform(kappa: f64, dt: f64) -> Result<FluxWaveform> {
    build_waveform(
        &WaveformSpec::sudden_step(STEP_START, STEP_END, dt, STEP_LEAD, STEP_RINGDOWN / kappa),
        dt,
    )
}

/// Reference step on the default 1 ns grid.
pub fn reference_step() -> FluxWaveform {
    step_waveform(circuit().kappa(), DEFAULT_DT).expect("reference step is valid")
}

/// Scale that makes the reference step emit `target` photons.
///
/// Photon number is quadratic in the scale, so one probe run suffices.
pub fn calibrate_lambda_scale(
    circuit: ResonatorCircuit,
    transition_width: f64,
    target: f64,
) -> Result<f64> {
    let probe =
        DriveHamiltonianModel::new(circuit, circuit.sweet_spot_frequency(), transition_width)?;
    let w = step_waveform(circuit.kappa(), DEFAULT_DT)?;
    let n = simulate_emission(&w, &probe)?.photons;
    if n <= 0.0 {
        return Err(Error::Unreachable("reference step emits nothing".into()));
    }
    Ok(probe.lambda_scale * (target / n).sqrt())
}

/// Photon ratio of the reference step through `channel` relative to coax.
pub fn channel_power_ratio(m: &DriveHamiltonianModel, channel: &ChannelModel) -> Result<f64> {
    let w = step_waveform(m.circuit.kappa(), DEFAULT_DT)?;
    let coax = simulate_emission(&w, m)?.photons;
    let filtered = simulate_emission(&apply_channel(&w, channel), m)?.photons;
    Ok(filtered / coax)
}

/// Low-pass cutoff (Hz) at which the reference step keeps `ratio` of its
/// coax photon number. Bisection in log-frequency.
pub fn calibrate_twisted_pair(m: &DriveHamiltonianModel, ratio: f64) -> Result<f64> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidParameter {
            name: "ratio",
            reason: "must lie in (0, 1)".into(),
        });
    }
    let eval = |f: f64| channel_power_ratio(m, &ChannelModel::twisted_pair_with_cutoff(f));
    let (mut lo, mut hi) = (1e5_f64, 1e11_f64);
    if eval(lo)? > ratio || eval(hi)? < ratio {
        return Err(Error::Unreachable(format!(
            "ratio {ratio} not bracketed by [{lo:e}, {hi:e}] Hz"
        )));
    }
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if eval(mid)? < ratio {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-7 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}
