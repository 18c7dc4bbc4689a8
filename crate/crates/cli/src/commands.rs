//! One function per subcommand. Each returns its artifacts in memory; the
//! caller writes them together with the manifest.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use squidpulse::circuit::{
    fit_tuning_curve, generate_tuning_curve, write_tuning_csv, ResonatorCircuit, TuningCurveSample,
};
use squidpulse::comb::{
    comb_coefficients, matched_interval, sideband_suppression, synthesize_train, write_train_csv,
    TrainParams,
};
use squidpulse::drive::{
    coupling_chain, jc_rabi, waveguide_rabi_from_photons, write_rabi_csv, JcConfig, ResonatorPort,
};
use squidpulse::emission::{
    pulse_metrics, simulate_emission, DriveHamiltonianModel, EmissionPulse, PulseMetrics,
};
use squidpulse::fluxdrive::{
    apply_channel, build_waveform, DriveShape, FluxWaveform, WaveformSpec,
};
use squidpulse::interference::{
    back_to_back, overlap_report, phase_preserving_max, phase_sweep, write_sweep_csv, PhaseMap,
    PulseSource,
};
use squidpulse::io::{read_columns, write_columns};
use squidpulse::readout::{
    discriminate_and_fidelity, extract_mode_templates, noise_for_separation, project_trace,
    separation_for_fidelity, simulate_readout_trace, DispersiveConfig, IqTrace, QubitState,
};
use squidpulse::spectral::{lorentzian_bound, voigt_model};
use squidpulse::{Complex64, Error};

use crate::config::{EmitConfig, Scenario};
use crate::manifest::{substream, Artifacts};
use crate::{CliError, Command};

pub fn execute(cmd: Command, s: &Scenario) -> Result<Artifacts, CliError> {
    match cmd {
        Command::TuningCurve => tuning_curve(s),
        Command::Emit => emit(s),
        Command::Interfere => interfere(s),
        Command::Comb => comb(s),
        Command::Linewidth => linewidth(s),
        Command::Readout => readout(s),
        Command::Rabi => rabi(s),
    }
}

fn key_error(key: &str, reason: &str) -> CliError {
    CliError::Config(format!("`{key}` {reason}"))
}

fn text(pairs: &[(&str, String)]) -> Vec<u8> {
    pairs
        .iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect::<String>()
        .into_bytes()
}

fn tuning_curve(s: &Scenario) -> Result<Artifacts, CliError> {
    let cfg = &s.tuning;
    if cfg.points < 2 || !(cfg.flux_max > cfg.flux_min) {
        return Err(key_error(
            "tuning.points",
            "needs >= 2 points over flux_min < flux_max",
        ));
    }
    let circuit = s.circuit.build()?;
    let fluxes: Vec<f64> = (0..cfg.points)
        .map(|k| cfg.flux_min + (cfg.flux_max - cfg.flux_min) * k as f64 / (cfg.points - 1) as f64)
        .collect();
    let mut samples = generate_tuning_curve(&circuit, &fluxes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(substream(s.seed, "tuning"));
    for p in &mut samples {
        let z: f64 = StandardNormal.sample(&mut rng);
        p.frequency *= 1.0 + cfg.noise * z;
    }
    let mut a = Artifacts::default();
    a.write_with("tuning.csv", |w| write_tuning_csv(w, &samples))?;
    if cfg.fit {
        let guess = ResonatorCircuit {
            i_c: circuit.i_c * 1.2,
            l_r: circuit.l_r * 0.9,
            ..circuit
        };
        let fit = fit_tuning_curve(&samples, &guess)?;
        let model = fluxes
            .iter()
            .map(|&f| {
                Ok(TuningCurveSample {
                    flux: f,
                    frequency: fit.frequency_at(f)?,
                })
            })
            .collect::<squidpulse::Result<Vec<_>>>()?;
        a.write_with("tuning_fit.csv", |w| write_tuning_csv(w, &model))?;
        a.add(
            "tuning_fit.txt",
            text(&[
                ("critical_current_a", format!("{:e}", fit.circuit.i_c)),
                ("resonator_inductance_h", format!("{:e}", fit.circuit.l_r)),
                ("flux_offset_phi0", format!("{:e}", fit.flux_offset)),
                ("flux_scale", format!("{:e}", fit.flux_scale)),
                ("residual_norm", format!("{:e}", fit.residual_norm)),
                ("iterations", fit.iterations.to_string()),
            ]),
        );
    }
    Ok(a)
}

fn step_waveform(
    e: &EmitConfig,
    initial: f64,
    end: f64,
    dt: f64,
    kappa: f64,
) -> Result<FluxWaveform, CliError> {
    let tail = e.ringdown / kappa;
    let spec = if e.slope == 0.0 {
        WaveformSpec::sudden_step(initial, end, dt, e.lead, tail)
    } else {
        WaveformSpec::new(
            DriveShape::Step {
                start: initial,
                end,
                slope: e.slope,
            },
            e.lead,
            tail,
        )
    };
    Ok(build_waveform(&spec, dt)?)
}

fn emit_one(
    s: &Scenario,
    m: &DriveHamiltonianModel,
    initial: f64,
    end: f64,
) -> Result<EmissionPulse, CliError> {
    let w = step_waveform(&s.emit, initial, end, s.source.dt, m.circuit.kappa())?;
    Ok(simulate_emission(
        &apply_channel(&w, &s.source.channel()),
        m,
    )?)
}

fn metrics_or_none(p: &EmissionPulse) -> Result<Option<PulseMetrics>, CliError> {
    match pulse_metrics(p) {
        Ok(m) => Ok(Some(m)),
        Err(Error::BelowThreshold { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn emit(s: &Scenario) -> Result<Artifacts, CliError> {
    let e = &s.emit;
    let m = s.source.model(s.circuit.build()?)?;
    let mut a = Artifacts::default();

    let w = step_waveform(
        e,
        e.initial_flux,
        e.end_flux,
        s.source.dt,
        m.circuit.kappa(),
    )?;
    let w = apply_channel(&w, &s.source.channel());
    let pulse = simulate_emission(&w, &m)?;
    a.write_with("drive.csv", |out| w.write_csv(out))?;
    a.write_with("pulse.csv", |out| pulse.write_csv(out))?;
    a.add("pulse_meta.txt", pulse.metadata().into_bytes());
    match metrics_or_none(&pulse)? {
        Some(pm) => a.add("metrics.txt", metrics_text(&pm)),
        None => a.note(format!(
            "zero emission: {:e} photons, drive does not cross a half-integer flux boundary",
            pulse.photons
        )),
    }

    if e.sweep_points > 0 {
        let n = e.sweep_points;
        let rows = (0..n)
            .into_par_iter()
            .map(|k| {
                let f = e.sweep_start + (k as f64 + 0.5) / n as f64;
                let p = emit_one(s, &m, f, e.end_flux)?;
                let phase = metrics_or_none(&p)?.map_or(f64::NAN, |pm| pm.phase);
                Ok([f, phase, p.photons])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        a.write_with("phase_sweep.csv", |out| {
            write_columns(out, &["initial_flux_phi0", "phase_rad", "photons"], &rows)
        })?;
    }
    if !e.end_sweep.is_empty() {
        let rows = e
            .end_sweep
            .par_iter()
            .map(|&end| {
                let p = emit_one(s, &m, e.initial_flux, end)?;
                let fitted = metrics_or_none(&p)?.map_or(f64::NAN, |pm| pm.frequency / (2.0 * PI));
                Ok([
                    end,
                    fitted,
                    m.circuit.resonance_frequency(end)? / (2.0 * PI),
                ])
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        a.write_with("frequency_sweep.csv", |out| {
            write_columns(
                out,
                &["end_flux_phi0", "frequency_hz", "resonance_hz"],
                &rows,
            )
        })?;
    }
    Ok(a)
}

fn metrics_text(pm: &PulseMetrics) -> Vec<u8> {
    text(&[
        ("phase_rad", format!("{:e}", pm.phase)),
        ("photons", format!("{:e}", pm.photons)),
        ("frequency_hz", format!("{:e}", pm.frequency / (2.0 * PI))),
        ("gamma_per_s", format!("{:e}", pm.gamma)),
        ("amplitude", format!("{:e}", pm.amplitude)),
    ])
}

fn interfere(s: &Scenario) -> Result<Artifacts, CliError> {
    let c = &s.interfere;
    let model = s.source.model(s.circuit.build()?)?;
    let src = PulseSource {
        model,
        end_flux: c.end_flux,
        dt: s.source.dt,
        lead: s.emit.lead,
        tail: s.emit.ringdown / model.circuit.kappa(),
    };
    let tol = 2.0 * PI * c.carrier_tolerance_hz;
    let p1 = src.emit(c.initial_a)?;
    let p2 = src.emit(c.initial_b)?;
    let r = overlap_report(&p1, &p2)?;
    let mut a = Artifacts::default();
    a.add(
        "overlap.txt",
        text(&[
            ("photons_a", format!("{:e}", p1.photons)),
            ("photons_b", format!("{:e}", p2.photons)),
            ("overlap_abs", format!("{:e}", r.overlap.norm())),
            ("overlap_arg_rad", format!("{:e}", r.overlap.arg())),
            ("total_max", format!("{:e}", r.n_max)),
            ("total_min", format!("{:e}", r.n_min)),
            ("projected_max", format!("{:e}", r.projected_max)),
            ("projected_min", format!("{:e}", r.projected_min)),
        ]),
    );
    if c.phase_points > 0 {
        let sweep = phase_sweep(&p1, &p2, c.phase_points, tol)?;
        a.write_with("phase_sweep.csv", |w| write_sweep_csv(w, &sweep))?;
    }
    if c.steer_points > 0 {
        // Initial fluxes from the period just below the boundary under the
        // end flux, so every map cell crosses exactly one boundary.
        let hi = (c.end_flux - 0.5).floor() + 0.5;
        let map = PhaseMap::compute(&src, hi - 1.0, hi, c.map_points.max(3))?;
        let sources = [src, src];
        let maps = [map.clone(), map];
        let rows = (0..c.steer_points)
            .into_par_iter()
            .map(|k| {
                let target = 2.0 * PI * k as f64 / c.steer_points as f64;
                match phase_preserving_max(&sources, &maps, target, tol) {
                    Ok(st) => Ok([
                        target,
                        st.phase,
                        st.pulse.photons,
                        st.initial_fluxes[0],
                        st.initial_fluxes[1],
                    ]),
                    Err(Error::Unreachable(_)) => {
                        Ok([target, f64::NAN, f64::NAN, f64::NAN, f64::NAN])
                    }
                    Err(e) => Err(CliError::from(e)),
                }
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let missed = rows.iter().filter(|r| r[1].is_nan()).count();
        if missed > 0 {
            a.note(format!(
                "{missed} steering targets unreachable within tolerance"
            ));
        }
        a.write_with("steering.csv", |w| {
            write_columns(
                w,
                &[
                    "target_phase_rad",
                    "phase_rad",
                    "photons",
                    "initial_flux_a",
                    "initial_flux_b",
                ],
                &rows,
            )
        })?;
    }
    Ok(a)
}

fn comb(s: &Scenario) -> Result<Artifacts, CliError> {
    let c = &s.comb;
    let circuit = s.circuit.build()?;
    let delta_t = matched_interval(c.frequency_hz, c.grid, c.delta_t_min, c.delta_t_max)?;
    let p = TrainParams {
        amplitude: c.amplitude,
        gamma: c.gamma.unwrap_or(circuit.kappa()),
        omega_e: 2.0 * PI * c.frequency_hz,
        delta_t,
    };
    if c.lines < 1 {
        return Err(key_error("comb.lines", "must be >= 1"));
    }
    let spectrum = comb_coefficients(&p, -c.lines..=c.lines)?;
    let suppression = sideband_suppression(&spectrum)?;
    let mut a = Artifacts::default();
    a.write_with("comb.csv", |w| spectrum.write_csv(w))?;
    if c.train_pulses > 0 {
        let train = synthesize_train(&p, c.train_pulses, c.train_dt)?;
        a.write_with("train.csv", |w| write_train_csv(w, &train, c.train_dt))?;
    }
    a.add(
        "comb.txt",
        text(&[
            ("delta_t_s", format!("{delta_t:e}")),
            ("line_spacing_hz", format!("{:e}", 1.0 / delta_t)),
            ("carrier_harmonic", spectrum.carrier_index.to_string()),
            ("sideband_suppression_db", format!("{suppression:.6}")),
        ]),
    );
    Ok(a)
}

fn linewidth(s: &Scenario) -> Result<Artifacts, CliError> {
    let c = &s.linewidth;
    let (freq, power): (Vec<f64>, Vec<f64>) = match &c.input {
        Some(path) => {
            let file = std::fs::File::open(path).map_err(|e| {
                CliError::Config(format!("`linewidth.input` {}: {e}", path.display()))
            })?;
            let rows = read_columns(file, &["freq_hz", "power_dbm"])?;
            let freq = rows.iter().map(|r| r[0]).collect();
            let power = rows
                .iter()
                .map(|r| 10f64.powf((r[1] - 30.0) / 10.0))
                .collect();
            (freq, power)
        }
        None => {
            if c.points < 9 {
                return Err(key_error("linewidth.points", "must be >= 9"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(substream(s.seed, "linewidth"));
            let freq: Vec<f64> = (0..c.points)
                .map(|k| c.span_hz * (k as f64 / (c.points - 1) as f64 - 0.5))
                .collect();
            let power = freq
                .iter()
                .map(|&f| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    1e-12
                        * voigt_model(f, c.gaussian_fwhm_hz, c.lorentzian_fwhm_hz)
                        * (1.0 + c.noise * z)
                })
                .collect();
            (freq, power)
        }
    };
    let fit = lorentzian_bound(&freq, &power, c.rbw_hz, &c.candidates_hz)?;
    let mut a = Artifacts::default();
    a.write_with("spectrum.csv", |w| {
        write_columns(
            w,
            &["freq_hz", "power_dbm"],
            freq.iter()
                .zip(&power)
                .map(|(&f, &p): (&f64, &f64)| [f, 10.0 * p.max(1e-300).log10() + 30.0]),
        )
    })?;
    a.add("linewidth.txt", fit.report().into_bytes());
    Ok(a)
}

fn readout(s: &Scenario) -> Result<Artifacts, CliError> {
    let c = &s.readout;
    if c.template_shots < 2 || c.shots < squidpulse::readout::MIN_POINTS {
        return Err(key_error(
            "readout.shots",
            "needs template_shots >= 2 and shots >= 100",
        ));
    }
    let m = s.source.model(s.circuit.build()?)?;
    if c.probe_pulses == 0 {
        return Err(key_error("readout.probe_pulses", "must be >= 1"));
    }
    let probe = back_to_back(
        &emit_one(s, &m, s.emit.initial_flux, s.emit.end_flux)?,
        c.probe_pulses,
    )?;
    let mut cfg = DispersiveConfig {
        omega_r: probe.carrier - 2.0 * PI * c.probe_detuning_hz,
        chi: 2.0 * PI * c.chi_hz,
        kappa: 2.0 * PI * c.kappa_hz,
        kappa_ext: 2.0 * PI * c.kappa_ext_hz,
        noise_photons: 0.0,
        seed: substream(s.seed, "readout"),
    };
    cfg.validate()
        .map_err(|e| CliError::Config(format!("[readout]: {e}")))?;
    cfg.noise_photons = match c.noise_photons {
        Some(n) => n,
        None => noise_for_separation(&probe, &cfg, separation_for_fidelity(c.target_fidelity)?)?,
    };

    let traces =
        |state: QubitState, shots: std::ops::Range<u64>| -> Result<Vec<IqTrace>, CliError> {
            shots
                .into_par_iter()
                .map(|k| simulate_readout_trace(&probe, state, &cfg, k).map_err(CliError::from))
                .collect()
        };
    let n_t = c.template_shots as u64;
    let tg = traces(QubitState::Ground, 0..n_t)?;
    let te = traces(QubitState::Excited, 0..n_t)?;
    let templates = extract_mode_templates(&tg, &te)?;

    let points = |state: QubitState| -> Result<Vec<Complex64>, CliError> {
        (n_t..n_t + c.shots as u64)
            .into_par_iter()
            .map(|k| {
                let t = simulate_readout_trace(&probe, state, &cfg, k)?;
                let (i, q) = project_trace(&t, &templates)?;
                Ok(Complex64::new(i, q))
            })
            .collect()
    };
    let pg = points(QubitState::Ground)?;
    let pe = points(QubitState::Excited)?;
    let model = discriminate_and_fidelity(&pg, &pe)?;

    let mut a = Artifacts::default();
    let rows = pg
        .iter()
        .map(|z| [0.0, z.re, z.im])
        .chain(pe.iter().map(|z| [1.0, z.re, z.im]));
    a.write_with("iq_points.csv", |w| {
        write_columns(w, &["state", "i", "q"], rows)
    })?;
    a.write_with("templates.csv", |w| {
        write_columns(
            w,
            &["time_s", "fg_re", "fg_im", "fe_re", "fe_im"],
            templates
                .f_g
                .samples
                .iter()
                .zip(&templates.f_e.samples)
                .enumerate()
                .map(|(k, (g, e))| [k as f64 * probe.dt, g.re, g.im, e.re, e.im]),
        )
    })?;
    a.write_with("trace_g.csv", |w| tg[0].write_csv(w))?;
    a.write_with("trace_e.csv", |w| te[0].write_csv(w))?;
    a.write_with("trace_g.iq", |w| tg[0].write_binary(w))?;
    a.write_with("trace_e.iq", |w| te[0].write_binary(w))?;
    let mut report = model.report();
    report.push_str(&format!(
        "template_theta_rad = {:.6}\nnoise_photons = {:e}\nprobe_photons = {:e}\n",
        templates.theta, cfg.noise_photons, probe.photons
    ));
    a.add("readout.txt", report.into_bytes());
    Ok(a)
}

fn rabi(s: &Scenario) -> Result<Artifacts, CliError> {
    let c = &s.rabi;
    let omega_q = 2.0 * PI * c.qubit_hz;
    let chain = coupling_chain(
        c.gamma_ext,
        omega_q,
        c.e_c_hz,
        c.z0,
        ResonatorPort {
            c_r: c.resonator_capacitance,
            z_r: c.resonator_impedance,
        },
    )?;
    let base = JcConfig::resonant(omega_q, 2.0 * PI * c.g_hz, 0.0, QubitState::Ground);
    let jc = c
        .photons
        .par_iter()
        .map(|&n| {
            let cfg = JcConfig::resonant(base.omega_q, base.g, n, QubitState::Ground);
            Ok((n, jc_rabi(&cfg)?.hz()))
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let guide: Vec<(f64, f64)> = c
        .photons
        .iter()
        .map(|&n| (n, waveguide_rabi_from_photons(n, c.gamma_ext) / (2.0 * PI)))
        .collect();
    let mut a = Artifacts::default();
    a.write_with("rabi.csv", |w| write_rabi_csv(w, &jc))?;
    a.write_with("waveguide_rabi.csv", |w| write_rabi_csv(w, &guide))?;
    a.add(
        "coupling.txt",
        text(&[
            ("qubit_capacitance_f", format!("{:e}", chain.c_q)),
            ("coupling_capacitance_f", format!("{:e}", chain.c_c)),
            ("qubit_impedance_ohm", format!("{:e}", chain.z_q)),
            ("g_from_chain_hz", format!("{:e}", chain.g_hz())),
            ("g_used_hz", format!("{:e}", c.g_hz)),
        ]),
    );
    Ok(a)
}
