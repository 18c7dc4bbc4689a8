//! Scenario files.
//!
//! A scenario is a TOML document. Every section and key is optional and
//! falls back to the reference device. Frequencies given in Hz are cyclic;
//! they are converted to rad/s internally. Flux values are in units of the
//! flux quantum, times in seconds.
//!
//! ```toml
//! name = "reference"
//! seed = 7
//!
//! [circuit]
//! sweet_spot_hz = 6.5401e9
//! kappa_ext_hz = 0.95e6
//!
//! [emit]
//! initial_flux = 0.2
//! end_flux = 0.8
//! ```

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use squidpulse::circuit::ResonatorCircuit;
use squidpulse::emission::DriveHamiltonianModel;
use squidpulse::fluxdrive::{ChannelKind, ChannelModel};
use squidpulse::reference;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub circuit: CircuitConfig,
    pub source: SourceConfig,
    pub tuning: TuningConfig,
    pub emit: EmitConfig,
    pub interfere: InterfereConfig,
    pub comb: CombConfig,
    pub linewidth: LinewidthConfig,
    pub readout: ReadoutConfig,
    pub rabi: RabiConfig,
}

impl Default for Scenario {
    fn default() -> Self {
        Self {
            name: "scenario".into(),
            seed: 0,
            out: None,
            circuit: CircuitConfig::default(),
            source: SourceConfig::default(),
            tuning: TuningConfig::default(),
            emit: EmitConfig::default(),
            interfere: InterfereConfig::default(),
            comb: CombConfig::default(),
            linewidth: LinewidthConfig::default(),
            readout: ReadoutConfig::default(),
            rabi: RabiConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircuitConfig {
    /// Linear resonator inductance (H).
    pub resonator_inductance: f64,
    /// SQUID inductance at zero flux (H).
    pub squid_inductance: f64,
    /// Resonance at integer flux; fixes the resonator capacitance.
    pub sweet_spot_hz: f64,
    pub asymmetry: f64,
    pub kappa_ext_hz: f64,
    pub kappa_int_hz: f64,
}

impl Default for CircuitConfig {
    fn default() -> Self {
        Self {
            resonator_inductance: reference::RESONATOR_INDUCTANCE,
            squid_inductance: reference::SQUID_INDUCTANCE,
            sweet_spot_hz: reference::SWEET_SPOT_HZ,
            asymmetry: reference::ASYMMETRY,
            kappa_ext_hz: reference::KAPPA_EXT / (2.0 * PI),
            kappa_int_hz: reference::KAPPA_INT / (2.0 * PI),
        }
    }
}

impl CircuitConfig {
    pub fn build(&self) -> Result<ResonatorCircuit, CliError> {
        for (v, key) in [
            (self.resonator_inductance, "circuit.resonator_inductance"),
            (self.squid_inductance, "circuit.squid_inductance"),
            (self.sweet_spot_hz, "circuit.sweet_spot_hz"),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("`{key}` must be > 0")));
            }
        }
        let l_total = self.resonator_inductance + self.squid_inductance;
        let w = 2.0 * PI * self.sweet_spot_hz;
        let c = ResonatorCircuit {
            l_r: self.resonator_inductance,
            c_r: 1.0 / (w * w * l_total),
            i_c: ResonatorCircuit::critical_current_for(self.squid_inductance),
            asymmetry: self.asymmetry,
            kappa_ext: 2.0 * PI * self.kappa_ext_hz,
            kappa_int: 2.0 * PI * self.kappa_int_hz,
        };
        c.validate()
            .map_err(|e| CliError::Config(format!("[circuit]: {e}")))?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Coax,
    TwistedPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SourceConfig {
    /// Drive-term scale (rad/s).
    pub lambda_scale: f64,
    /// Width of the branch transition (flux quanta).
    pub transition_width: f64,
    /// Flux-drive sample interval (s).
    pub dt: f64,
    pub channel: Channel,
    pub twisted_pair_cutoff_hz: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            lambda_scale: reference::LAMBDA_SCALE,
            transition_width: reference::TRANSITION_WIDTH,
            dt: squidpulse::fluxdrive::DEFAULT_DT,
            channel: Channel::Coax,
            twisted_pair_cutoff_hz: squidpulse::fluxdrive::TWISTED_PAIR_CUTOFF_HZ,
        }
    }
}

impl SourceConfig {
    pub fn model(&self, circuit: ResonatorCircuit) -> Result<DriveHamiltonianModel, CliError> {
        DriveHamiltonianModel::new(circuit, self.lambda_scale, self.transition_width)
            .map_err(|e| CliError::Config(format!("[source]: {e}")))
    }

    pub fn channel(&self) -> ChannelModel {
        match self.channel {
            Channel::Coax => ChannelModel::preset(ChannelKind::Coax),
            Channel::TwistedPair => {
                ChannelModel::twisted_pair_with_cutoff(self.twisted_pair_cutoff_hz)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TuningConfig {
    pub flux_min: f64,
    pub flux_max: f64,
    pub points: usize,
    /// Relative Gaussian noise added to each frequency.
    pub noise: f64,
    pub fit: bool,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            flux_min: -1.0,
            flux_max: 1.0,
            points: 400,
            noise: 1e-3,
            fit: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmitConfig {
    pub initial_flux: f64,
    pub end_flux: f64,
    /// Ramp rate (flux quanta per second); 0 selects a one-sample step.
    pub slope: f64,
    pub lead: f64,
    /// Ring-down kept after the drive, in units of 1/κ.
    pub ringdown: f64,
    /// Initial-flux sweep over one period starting at `sweep_start`.
    pub sweep_points: usize,
    pub sweep_start: f64,
    /// End fluxes for the carrier-frequency sweep.
    pub end_sweep: Vec<f64>,
}

impl Default for EmitConfig {
    fn default() -> Self {
        Self {
            initial_flux: reference::STEP_START,
            end_flux: reference::STEP_END,
            slope: 0.0,
            lead: reference::STEP_LEAD,
            ringdown: reference::STEP_RINGDOWN,
            sweep_points: 0,
            sweep_start: -0.5,
            end_sweep: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InterfereConfig {
    pub end_flux: f64,
    pub initial_a: f64,
    pub initial_b: f64,
    pub phase_points: usize,
    /// Target phases for constant-energy steering (0 disables).
    pub steer_points: usize,
    pub map_points: usize,
    /// Allowed carrier difference between the two sources (Hz).
    pub carrier_tolerance_hz: f64,
}

impl Default for InterfereConfig {
    fn default() -> Self {
        Self {
            end_flux: 0.8,
            initial_a: 0.2,
            initial_b: 0.3,
            phase_points: 361,
            steer_points: 8,
            map_points: 256,
            carrier_tolerance_hz: 1e3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CombConfig {
    pub frequency_hz: f64,
    /// Pulse energy decay rate (1/s); defaults to the circuit's κ.
    pub gamma: Option<f64>,
    pub amplitude: f64,
    /// Grid the repetition interval is quantised to (s).
    pub grid: f64,
    pub delta_t_min: f64,
    pub delta_t_max: f64,
    /// Lines kept on each side of the carrier.
    pub lines: i64,
    pub train_pulses: usize,
    pub train_dt: f64,
}

impl Default for CombConfig {
    fn default() -> Self {
        Self {
            frequency_hz: reference::SWEET_SPOT_HZ,
            gamma: None,
            amplitude: 1.0,
            grid: 1e-9,
            delta_t_min: 90e-9,
            delta_t_max: 110e-9,
            lines: 20,
            train_pulses: 4,
            train_dt: 10e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinewidthConfig {
    /// Measured spectrum, CSV `freq_hz,power_dbm`. Synthesised when absent.
    pub input: Option<PathBuf>,
    pub gaussian_fwhm_hz: f64,
    pub lorentzian_fwhm_hz: f64,
    pub span_hz: f64,
    pub points: usize,
    /// Relative Gaussian noise on the synthesised spectrum.
    pub noise: f64,
    /// Gaussian resolution width assumed by the bound (Hz).
    pub rbw_hz: f64,
    pub candidates_hz: Vec<f64>,
}

impl Default for LinewidthConfig {
    fn default() -> Self {
        Self {
            input: None,
            gaussian_fwhm_hz: 0.93,
            lorentzian_fwhm_hz: 1e-3,
            span_hz: 10.0,
            points: 4001,
            noise: 0.0,
            rbw_hz: 0.93,
            candidates_hz: vec![0.5e-3, 2e-3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadoutConfig {
    pub chi_hz: f64,
    pub kappa_hz: f64,
    pub kappa_ext_hz: f64,
    /// Probe carrier minus the bare readout resonance (Hz).
    pub probe_detuning_hz: f64,
    /// Added noise; when absent it is set from `target_fidelity`.
    pub noise_photons: Option<f64>,
    pub target_fidelity: f64,
    pub shots: usize,
    pub template_shots: usize,
    /// Identical emitted pulses sent back to back as one probe.
    pub probe_pulses: usize,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            chi_hz: 0.5e6,
            kappa_hz: 1e6,
            kappa_ext_hz: 0.95e6,
            probe_detuning_hz: 0.0,
            noise_photons: None,
            target_fidelity: 0.973,
            shots: 5000,
            template_shots: 20000,
            probe_pulses: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RabiConfig {
    pub g_hz: f64,
    pub qubit_hz: f64,
    pub photons: Vec<f64>,
    pub gamma_ext: f64,
    pub e_c_hz: f64,
    pub z0: f64,
    pub resonator_capacitance: f64,
    pub resonator_impedance: f64,
}

impl Default for RabiConfig {
    fn default() -> Self {
        Self {
            g_hz: 0.49e6,
            qubit_hz: 6e9,
            photons: vec![10.0, 30.0, 71.0, 100.0, 300.0, 662.0, 1017.0],
            gamma_ext: 1000.0,
            e_c_hz: 220e6,
            z0: 50.0,
            resonator_capacitance: 0.4e-12,
            resonator_impedance: 50.0,
        }
    }
}

/// Parsed scenario plus the keys that matched no field.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub scenario: Scenario,
    pub unknown_keys: Vec<String>,
}

pub fn parse(text: &str) -> Result<Loaded, CliError> {
    let de = toml::Deserializer::parse(text).map_err(|e| CliError::Config(e.to_string()))?;
    let mut unknown_keys = Vec::new();
    let scenario: Scenario =
        serde_ignored::deserialize(de, |path| unknown_keys.push(path.to_string()))
            .map_err(|e| CliError::Config(e.to_string()))?;
    Ok(Loaded {
        scenario,
        unknown_keys,
    })
}

/// Reads a scenario; unknown keys are an error under `strict`, otherwise a
/// warning.
pub fn load(path: &Path, strict: bool) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let loaded = parse(&text)?;
    if let Some(key) = loaded.unknown_keys.first() {
        if strict {
            return Err(CliError::Config(format!("unknown key `{key}`")));
        }
        for key in &loaded.unknown_keys {
            log::warn!("ignoring unknown key `{key}`");
        }
    }
    Ok(loaded.scenario)
}

pub fn to_toml(s: &Scenario) -> String {
    toml::to_string(s).expect("scenario serialises")
}
