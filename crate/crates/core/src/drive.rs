//! Qubit drive estimates for the emitted field.
//!
//! Two routes: an open waveguide carrying the pulse to the qubit, and direct
//! capacitive coupling of the qubit to the source resonator, simulated with a
//! Jaynes-Cummings model on a truncated Fock space.

use std::f64::consts::PI;
use std::io::Write;

use statrs::function::gamma::ln_gamma;

use crate::error::{ensure, Error, Result};
use crate::readout::QubitState;

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Population allowed in the two highest Fock levels.
pub const LEAK_TOLERANCE: f64 = 1e-6;

/// Rabi rate (rad/s) for a photon flux `n_dot` (1/s) through a waveguide
/// coupled to the qubit at `gamma_ext` (1/s).
pub fn waveguide_rabi_from_flux(n_dot: f64, gamma_ext: f64) -> f64 {
    2.0 * (n_dot * gamma_ext).sqrt()
}

/// Rabi rate (rad/s) when `n` photons are spent on one π rotation.
pub fn waveguide_rabi_from_photons(n: f64, gamma_ext: f64) -> f64 {
    4.0 / PI * n * gamma_ext
}

/// Photons delivered during a π rotation at flux `n_dot`.
pub fn photons_per_pi(n_dot: f64, gamma_ext: f64) -> f64 {
    n_dot * PI / waveguide_rabi_from_flux(n_dot, gamma_ext)
}

/// Qubit capacitance for charging energy `e_c` (Hz).
pub fn qubit_capacitance(e_c: f64) -> f64 {
    ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * PLANCK * e_c)
}

/// Capacitive coupling between qubit, source resonator and waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingChain {
    pub c_q: f64,
    pub c_r: f64,
    pub z_0: f64,
    pub z_q: f64,
    pub z_r: f64,
    pub gamma_ext: f64,
    pub c_c: f64,
    /// Qubit-resonator coupling (rad/s).
    pub g: f64,
}

impl CouplingChain {
    pub fn g_hz(&self) -> f64 {
        self.g / (2.0 * PI)
    }

    /// Waveguide coupling rate implied by `c_c` at qubit frequency `omega_q`.
    pub fn gamma_from_capacitance(c_c: f64, c_q: f64, omega_q: f64, z_0: f64) -> f64 {
        c_c * c_c * omega_q * omega_q * z_0 / c_q
    }
}

/// Source resonator as seen by the qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResonatorPort {
    pub c_r: f64,
    pub z_r: f64,
}

pub fn coupling_chain(
    gamma_ext: f64,
    omega_q: f64,
    e_c: f64,
    z_0: f64,
    resonator: ResonatorPort,
) -> Result<CouplingChain> {
    for (v, name) in [
        (gamma_ext, "gamma_ext"),
        (omega_q, "omega_q"),
        (e_c, "e_c"),
        (z_0, "z_0"),
        (resonator.c_r, "c_r"),
        (resonator.z_r, "z_r"),
    ] {
        ensure(v > 0.0 && v.is_finite(), name, "must be > 0")?;
    }
    let c_q = qubit_capacitance(e_c);
    let c_c = (c_q * gamma_ext / (omega_q * omega_q * z_0)).sqrt();
    let z_q = 1.0 / (omega_q * c_q);
    let g = c_c / (2.0 * c_q * resonator.c_r) * (1.0 / (resonator.z_r * z_q)).sqrt();
    Ok(CouplingChain {
        c_q,
        c_r: resonator.c_r,
        z_0,
        z_q,
        z_r: resonator.z_r,
        gamma_ext,
        c_c,
        g,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcConfig {
    pub omega_q: f64,
    pub omega_r: f64,
    /// Coupling (rad/s).
    pub g: f64,
    /// Mean photon number of the initial coherent state.
    pub n_bar: f64,
    pub truncation: usize,
    pub qubit: QubitState,
}

impl JcConfig {
    /// Resonant configuration with the smallest admissible truncation.
    pub fn resonant(omega: f64, g: f64, n_bar: f64, qubit: QubitState) -> Self {
        Self {
            omega_q: omega,
            omega_r: omega,
            g,
            n_bar,
            truncation: min_truncation(n_bar),
            qubit,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.g > 0.0 && self.g.is_finite(), "g", "must be > 0")?;
        ensure(
            self.n_bar >= 0.0 && self.n_bar.is_finite(),
            "n_bar",
            "must be >= 0",
        )?;
        ensure(
            self.omega_q > 0.0 && self.omega_r > 0.0,
            "omega",
            "frequencies must be > 0",
        )?;
        ensure(self.truncation >= 3, "truncation", "must be >= 3")?;
        // Zero-crossing spacing equals half a Rabi period only on resonance.
        ensure(
            (self.omega_q - self.omega_r).abs() <= 1e-9 * self.omega_r,
            "omega_q",
            "qubit and resonator must be resonant",
        )?;
        Ok(())
    }
}

pub fn min_truncation(n_bar: f64) -> usize {
    (n_bar + 10.0 * n_bar.sqrt() + 10.0).ceil() as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcRabi {
    /// Rabi frequency (rad/s).
    pub omega: f64,
    /// First two zero crossings of `⟨σz⟩` (s).
    pub crossings: (f64, f64),
    /// Largest deviation of the state norm from 1 over the propagation.
    pub norm_error: f64,
    /// Initial population in the two highest Fock levels and beyond.
    pub leaked: f64,
}

impl JcRabi {
    pub fn hz(&self) -> f64 {
        self.omega / (2.0 * PI)
    }
}

/// Excitation-number blocks of the JC Hamiltonian in the frame rotating at
/// `ω_r`. Block `k ≥ 1` spans `|e,k-1⟩, |g,k⟩` with
/// `H_k = [[Δ/2, g√k], [g√k, -Δ/2]]`.
struct Blocks {
    half_detuning: f64,
    coupling: Vec<f64>,
    /// Amplitudes `(|e,k-1⟩, |g,k⟩)` at t = 0; entry 0 holds `|g,0⟩` only.
    initial: Vec<[num_complex::Complex64; 2]>,
}

type C = num_complex::Complex64;

impl Blocks {
    fn new(cfg: &JcConfig) -> (Self, f64) {
        let n = cfg.truncation;
        let amp = |k: usize| -> f64 {
            if cfg.n_bar == 0.0 {
                return if k == 0 { 1.0 } else { 0.0 };
            }
            (-0.5 * cfg.n_bar + 0.5 * k as f64 * cfg.n_bar.ln() - 0.5 * ln_gamma(k as f64 + 1.0))
                .exp()
        };
        let mut initial = vec![[C::new(0.0, 0.0); 2]; n];
        let mut kept = 0.0;
        let mut top = 0.0;
        for (k, slot) in initial.iter_mut().enumerate() {
            let a = amp(k);
            kept += a * a;
            if k + 2 >= n {
                top += a * a;
            }
            match cfg.qubit {
                // |g,k⟩ sits in block k.
                QubitState::Ground => slot[1] = C::new(a, 0.0),
                // |e,k⟩ sits in block k+1; the last one has no partner inside
                // the space and is dropped with the tail.
                QubitState::Excited => {}
            }
        }
        if cfg.qubit == QubitState::Excited {
            for k in 0..n - 1 {
                initial[k + 1][0] = C::new(amp(k), 0.0);
            }
            top += amp(n - 1).powi(2);
        }
        let coupling = (0..n).map(|k| cfg.g * (k as f64).sqrt()).collect();
        let leaked = top + (1.0 - kept).max(0.0);
        (
            Self {
                half_detuning: 0.5 * (cfg.omega_q - cfg.omega_r),
                coupling,
                initial,
            },
            leaked,
        )
    }

    /// Propagator of block `k` over time `t`.
    fn propagator(&self, k: usize, t: f64) -> [[C; 2]; 2] {
        let d = self.half_detuning;
        let gk = self.coupling[k];
        let w = (gk * gk + d * d).sqrt();
        if w == 0.0 {
            return [
                [C::new(1.0, 0.0), C::new(0.0, 0.0)],
                [C::new(0.0, 0.0), C::new(1.0, 0.0)],
            ];
        }
        let (s, c) = (w * t).sin_cos();
        let f = s / w;
        [
            [C::new(c, -f * d), C::new(0.0, -f * gk)],
            [C::new(0.0, -f * gk), C::new(c, f * d)],
        ]
    }

    fn sigma_z(state: &[[C; 2]]) -> f64 {
        state.iter().map(|[e, g]| e.norm_sqr() - g.norm_sqr()).sum()
    }

    fn exact_sigma_z(&self, t: f64) -> f64 {
        let mut sz = 0.0;
        for (k, [e, g]) in self.initial.iter().enumerate() {
            let u = self.propagator(k, t);
            let e1 = u[0][0] * e + u[0][1] * g;
            let g1 = u[1][0] * e + u[1][1] * g;
            sz += e1.norm_sqr() - g1.norm_sqr();
        }
        sz
    }
}

/// Rabi frequency of the qubit coupled to a coherent resonator field.
///
/// The state is propagated in fixed steps no longer than
/// `1/(50 g sqrt(truncation))`; the frequency is `π` over the spacing of the
/// first two zero crossings of `⟨σz⟩`, each refined on the exact evolution.
pub fn jc_rabi(cfg: &JcConfig) -> Result<JcRabi> {
    cfg.validate()?;
    let (blocks, leaked) = Blocks::new(cfg);
    if leaked > LEAK_TOLERANCE || cfg.truncation < min_truncation(cfg.n_bar) {
        return Err(Error::TruncationTooSmall { leaked });
    }
    let n_eff = cfg.n_bar.max(1.0);
    let nominal = (4.0 * cfg.g * cfg.g * n_eff + 4.0 * blocks.half_detuning.powi(2)).sqrt();
    let h = 1.0 / (50.0 * cfg.g * (cfg.truncation as f64).sqrt());
    let t_max = 4.0 * 2.0 * PI / nominal;
    let steps: Vec<[[C; 2]; 2]> = (0..blocks.coupling.len())
        .map(|k| blocks.propagator(k, h))
        .collect();

    let mut state = blocks.initial.clone();
    let norm0: f64 = state.iter().map(|[e, g]| e.norm_sqr() + g.norm_sqr()).sum();
    let mut norm_error: f64 = 0.0;
    let mut prev = Blocks::sigma_z(&state);
    let mut crossings = Vec::with_capacity(2);
    let mut t = 0.0;
    while crossings.len() < 2 && t < t_max {
        for (s, u) in state.iter_mut().zip(&steps) {
            let [e, g] = *s;
            *s = [u[0][0] * e + u[0][1] * g, u[1][0] * e + u[1][1] * g];
        }
        t += h;
        let norm: f64 = state.iter().map(|[e, g]| e.norm_sqr() + g.norm_sqr()).sum();
        norm_error = norm_error.max((norm / norm0 - 1.0).abs());
        let sz = Blocks::sigma_z(&state);
        if prev.signum() != sz.signum() && prev != 0.0 {
            crossings.push(refine_crossing(&blocks, t - h, t));
        }
        prev = sz;
    }
    if crossings.len() < 2 {
        return Err(Error::FitDiverged(format!(
            "no Rabi oscillation of <sigma_z> within {t_max:e} s"
        )));
    }
    Ok(JcRabi {
        omega: PI / (crossings[1] - crossings[0]),
        crossings: (crossings[0], crossings[1]),
        norm_error,
        leaked,
    })
}

fn refine_crossing(b: &Blocks, mut lo: f64, mut hi: f64) -> f64 {
    let f_lo = b.exact_sigma_z(lo);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if b.exact_sigma_z(mid).signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Rabi frequency (Hz) against photon number, one JC run per point.
pub fn rabi_sweep(base: &JcConfig, n_photons: &[f64]) -> Result<Vec<(f64, f64)>> {
    n_photons
        .iter()
        .map(|&n| {
            let cfg = JcConfig {
                n_bar: n,
                truncation: base.truncation.max(min_truncation(n)),
                ..*base
            };
            jc_rabi(&cfg).map(|r| (n, r.hz()))
        })
        .collect()
}

/// CSV `n_photons,rabi_hz`.
pub fn write_rabi_csv<W: Write>(w: W, rows: &[(f64, f64)]) -> Result<()> {
    crate::io::write_columns(
        w,
        &["n_photons", "rabi_hz"],
        rows.iter().map(|&(n, f)| [n, f]),
    )
}
