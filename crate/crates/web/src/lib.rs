//! Browser bindings for three interactive views: the resonator tuning
//! curve, a single emitted pulse, and the comb spectrum of a pulse train.
//!
//! Each view has a plain Rust function returning flat `f64` arrays, which
//! the `#[wasm_bindgen]` wrappers hand to JavaScript as `Float64Array`s.

use std::f64::consts::PI;

use squidpulse::circuit::ResonatorCircuit;
use squidpulse::comb::{comb_coefficients, sideband_suppression, TrainParams};
use squidpulse::emission::simulate_emission;
use squidpulse::fluxdrive::{build_waveform, WaveformSpec, DEFAULT_DT};
use squidpulse::reference;
use wasm_bindgen::prelude::*;

/// Interleaved `(flux, frequency_ghz)` pairs over `[-1, 1]`.
pub fn tuning_curve(asymmetry: f64, points: usize) -> Result<Vec<f64>, String> {
    if points < 2 {
        return Err("need at least 2 points".into());
    }
    let c = ResonatorCircuit {
        asymmetry,
        ..reference::circuit()
    };
    c.validate().map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * points);
    for k in 0..points {
        let flux = -1.0 + 2.0 * k as f64 / (points - 1) as f64;
        let w = c.resonance_frequency(flux).map_err(|e| e.to_string())?;
        out.extend([flux, w / (2.0 * PI) / 1e9]);
    }
    Ok(out)
}

/// One sudden step of the reference source.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    photons: f64,
    carrier_ghz: f64,
    samples: Vec<f64>,
}

#[wasm_bindgen]
impl Pulse {
    #[wasm_bindgen(getter)]
    pub fn photons(&self) -> f64 {
        self.photons
    }

    #[wasm_bindgen(getter)]
    pub fn carrier_ghz(&self) -> f64 {
        self.carrier_ghz
    }

    /// Interleaved `(time_ns, re, im)` of the output field, with `re² + im²`
    /// in photons per microsecond. Starts at the end of the drive.
    #[wasm_bindgen(getter)]
    pub fn samples(&self) -> Vec<f64> {
        self.samples.clone()
    }
}

pub fn emit_pulse(initial_flux: f64, end_flux: f64) -> Result<Pulse, String> {
    let m = reference::drive_model();
    let tail = reference::STEP_RINGDOWN / m.circuit.kappa();
    let spec = WaveformSpec::sudden_step(
        initial_flux,
        end_flux,
        DEFAULT_DT,
        reference::STEP_LEAD,
        tail,
    );
    let w = build_waveform(&spec, DEFAULT_DT).map_err(|e| e.to_string())?;
    let p = simulate_emission(&w, &m).map_err(|e| e.to_string())?;
    let start = p.reference_index.min(p.envelope.len());
    let samples = p.envelope[start..]
        .iter()
        .enumerate()
        .flat_map(|(k, z)| {
            let z = z * 1e-3;
            [k as f64 * p.dt * 1e9, z.re, z.im]
        })
        .collect();
    Ok(Pulse {
        photons: p.photons,
        carrier_ghz: p.carrier / (2.0 * PI) / 1e9,
        samples,
    })
}

/// Comb lines around the carrier and the sideband suppression.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct Comb {
    suppression_db: f64,
    lines: Vec<f64>,
}

#[wasm_bindgen]
impl Comb {
    #[wasm_bindgen(getter)]
    pub fn suppression_db(&self) -> f64 {
        self.suppression_db
    }

    /// Interleaved `(offset_mhz, power_db)`, relative to the strongest line.
    #[wasm_bindgen(getter)]
    pub fn lines(&self) -> Vec<f64> {
        self.lines.clone()
    }
}

pub fn comb(
    carrier_ghz: f64,
    delta_t_ns: f64,
    linewidth_mhz: f64,
    lines: u32,
) -> Result<Comb, String> {
    let p = TrainParams {
        amplitude: 1.0,
        gamma: 2.0 * PI * linewidth_mhz * 1e6,
        omega_e: 2.0 * PI * carrier_ghz * 1e9,
        delta_t: delta_t_ns * 1e-9,
    };
    let n = lines as i64;
    let s = comb_coefficients(&p, -n..=n).map_err(|e| e.to_string())?;
    let suppression_db = sideband_suppression(&s).map_err(|e| e.to_string())?;
    let lines = s
        .power_db()
        .into_iter()
        .flat_map(|(f, db)| [f / 1e6, db])
        .collect();
    Ok(Comb {
        suppression_db,
        lines,
    })
}

#[wasm_bindgen(js_name = tuningCurve)]
pub fn tuning_curve_js(asymmetry: f64, points: usize) -> Result<Vec<f64>, JsError> {
    tuning_curve(asymmetry, points).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = emitPulse)]
pub fn emit_pulse_js(initial_flux: f64, end_flux: f64) -> Result<Pulse, JsError> {
    emit_pulse(initial_flux, end_flux).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = combSpectrum)]
pub fn comb_js(
    carrier_ghz: f64,
    delta_t_ns: f64,
    linewidth_mhz: f64,
    lines: u32,
) -> Result<Comb, JsError> {
    comb(carrier_ghz, delta_t_ns, linewidth_mhz, lines).map_err(|e| JsError::new(&e))
}
