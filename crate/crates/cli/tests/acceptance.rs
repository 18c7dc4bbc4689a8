//! Acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion reports
//! even when an earlier one fails. Exits non-zero if any check fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use squidpulse::Complex64;

use squidpulse::circuit::{
    fit_tuning_curve, generate_tuning_curve, ResonatorCircuit, TuningCurveSample,
};
use squidpulse::comb::{
    coefficient, comb_coefficients, matched_coefficient, matched_interval, sideband_suppression,
    synthesize_train, TrainParams,
};
use squidpulse::drive::{coupling_chain, jc_rabi, min_truncation, JcConfig, ResonatorPort};
use squidpulse::emission::{pulse_metrics, simulate_emission, DriveHamiltonianModel};
use squidpulse::fluxdrive::{
    boundary_crossings, build_waveform, ChannelModel, DriveShape, FluxWaveform, WaveformSpec,
    DEFAULT_DT,
};
use squidpulse::interference::{
    mode_overlap, overlap_report, phase_preserving_max, phase_sweep, projected_photons, rotate,
    superpose, PhaseMap, PulseSource,
};
use squidpulse::readout::{
    discriminate_and_fidelity, extract_mode_templates, noise_for_separation, project_iq,
    project_trace, reflected_envelope, separation_for_fidelity, simulate_readout_trace,
    template_snr, DispersiveConfig, IqTrace, ModeTemplates, QubitState, TemporalMode,
};
use squidpulse::reference;
use squidpulse::spectral::{lorentzian_bound, periodogram, Window};

type Outcome = Result<String, String>;

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn ringdown(m: &DriveHamiltonianModel) -> f64 {
    reference::STEP_RINGDOWN / m.circuit.kappa()
}

/// Composite Simpson over `[a, b]` with `n` (even) intervals.
fn simpson<T, F>(f: F, a: f64, b: f64, n: usize) -> T
where
    T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    F: Fn(f64) -> T,
{
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for j in 1..n {
        s = s + f(a + j as f64 * h) * if j % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

/// Least-squares `a + b cos φ + c sin φ` on a uniform full-period grid,
/// where the basis is discretely orthogonal. Returns `(a, amplitude, max residual)`.
fn cosine_fit(sweep: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = sweep.len() as f64;
    let a = sweep.iter().map(|s| s.1).sum::<f64>() / n;
    let b = 2.0 / n * sweep.iter().map(|(p, y)| y * p.cos()).sum::<f64>();
    let c = 2.0 / n * sweep.iter().map(|(p, y)| y * p.sin()).sum::<f64>();
    let res = sweep
        .iter()
        .map(|(p, y)| (y - a - b * p.cos() - c * p.sin()).abs())
        .fold(0.0, f64::max);
    (a, b.hypot(c), res)
}

fn c1_tuning_curve() -> Outcome {
    let c = reference::circuit();
    let fluxes: Vec<f64> = (0..97).map(|k| -0.48 + 0.01 * k as f64).collect();
    let mut worst_period = 0.0f64;
    for &f in &fluxes {
        let w = c.resonance_frequency(f).map_err(e2s)?;
        for shift in [1.0, -1.0, 3.0] {
            let v = c.resonance_frequency(f + shift).map_err(e2s)?;
            worst_period = worst_period.max((v / w - 1.0).abs());
        }
    }
    check(worst_period <= 1e-12, || {
        format!("periodicity error {worst_period:e}")
    })?;

    let sym = ResonatorCircuit {
        asymmetry: 0.0,
        ..c
    };
    let mut worst_sym = 0.0f64;
    for &f in fluxes.iter().filter(|f| f.abs() < 0.45) {
        let a = sym.resonance_frequency(f).map_err(e2s)?;
        let b = sym.resonance_frequency(-f).map_err(e2s)?;
        worst_sym = worst_sym.max((a / b - 1.0).abs());
    }
    check(worst_sym <= 1e-12, || {
        format!("symmetry error {worst_sym:e}")
    })?;

    let bias: Vec<f64> = (0..401).map(|k| -1.0 + 2.0 * k as f64 / 400.0).collect();
    let clean = generate_tuning_curve(&c, &bias).map_err(e2s)?;
    let guess = ResonatorCircuit {
        i_c: 1.2 * c.i_c,
        l_r: 0.9 * c.l_r,
        ..c
    };
    let errors: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy: Vec<TuningCurveSample> = clean
                .iter()
                .map(|s| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    TuningCurveSample {
                        flux: s.flux,
                        frequency: s.frequency * (1.0 + 1e-3 * z),
                    }
                })
                .collect();
            let fit = fit_tuning_curve(&noisy, &guess).map_err(e2s)?;
            Ok((
                (fit.circuit.i_c / c.i_c - 1.0).abs(),
                (fit.circuit.l_r / c.l_r - 1.0).abs(),
            ))
        })
        .collect::<Result<_, String>>()?;
    let worst_ic = errors.iter().map(|e| e.0).fold(0.0, f64::max);
    let worst_lr = errors.iter().map(|e| e.1).fold(0.0, f64::max);
    check(worst_ic < 0.01 && worst_lr < 0.01, || {
        format!("worst fit error I_c {worst_ic:.2e}, L_r {worst_lr:.2e}")
    })?;
    Ok(format!(
        "period {worst_period:.1e}, symmetry {worst_sym:.1e}, 100 fits: I_c {worst_ic:.1e}, L_r {worst_lr:.1e}"
    ))
}

fn c2_emission_needs_a_crossing() -> Outcome {
    let m = reference::drive_model();
    let tail = ringdown(&m);
    let rows: Vec<(usize, f64)> = (0..200)
        .into_par_iter()
        .map(|k| {
            let start = -1.0 + (k as f64 + 0.5) * 0.01;
            let shape = DriveShape::Step {
                start,
                end: reference::STEP_END,
                slope: 0.1 / DEFAULT_DT,
            };
            let w =
                build_waveform(&WaveformSpec::new(shape, 10e-9, tail), DEFAULT_DT).map_err(e2s)?;
            let n = simulate_emission(&w, &m).map_err(e2s)?.photons;
            Ok((boundary_crossings(&w).len(), n))
        })
        .collect::<Result<_, String>>()?;
    let silent: Vec<f64> = rows.iter().filter(|r| r.0 == 0).map(|r| r.1).collect();
    let emitting: Vec<f64> = rows.iter().filter(|r| r.0 > 0).map(|r| r.1).collect();
    check(!silent.is_empty() && !emitting.is_empty(), || {
        "sweep lacks one of the two classes".into()
    })?;
    let loudest_silent = silent.iter().copied().fold(0.0, f64::max);
    let quietest = emitting.iter().copied().fold(f64::INFINITY, f64::min);
    check(loudest_silent < 1e-9, || {
        format!("drive without crossing emitted {loudest_silent:e}")
    })?;
    check(quietest > 0.0, || {
        "drive with a crossing emitted nothing".into()
    })?;
    Ok(format!(
        "{} silent drives max {loudest_silent:.1e}, {} crossing drives min {quietest:.3e}",
        silent.len(),
        emitting.len()
    ))
}

fn c3_sudden_quench_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let base = reference::drive_model();
    let mut cases = Vec::new();
    while cases.len() < 20 {
        let from: f64 = rng.random_range(-1.0..1.0);
        let to: f64 = rng.random_range(-1.0..1.0);
        let near = |f: f64| (f - 0.5 - (f - 0.5).round()).abs() < 0.02;
        if near(from) || near(to) {
            continue;
        }
        let mut m = base.scaled(rng.random_range(0.3..3.0));
        m.circuit.kappa_ext = 2.0 * PI * rng.random_range(0.5e6..2.0e6);
        m.circuit.kappa_int = 2.0 * PI * rng.random_range(0.0..0.2e6);
        let dalpha = m.equilibrium_displacement(to).map_err(e2s)?
            - m.equilibrium_displacement(from).map_err(e2s)?;
        let expect = dalpha.norm_sqr() * m.circuit.kappa_ext / m.circuit.kappa();
        if expect < 1.0 {
            continue;
        }
        cases.push((m, from, to, expect));
    }
    let dt = 10e-12;
    let ratios: Vec<f64> = cases
        .par_iter()
        .map(|(m, from, to, expect)| {
            let spec = WaveformSpec::sudden_step(*from, *to, dt, 100.0 * dt, ringdown(m));
            let w = build_waveform(&spec, dt).map_err(e2s)?;
            Ok(simulate_emission(&w, m).map_err(e2s)?.photons / expect)
        })
        .collect::<Result<_, String>>()?;
    let worst = ratios.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    check(worst < 0.01, || format!("worst relative error {worst:.3e}"))?;
    Ok(format!(
        "20 random steps at 10 ps, worst relative error {worst:.2e}"
    ))
}

fn reference_source() -> PulseSource {
    let model = reference::drive_model();
    PulseSource {
        model,
        end_flux: reference::STEP_END,
        dt: DEFAULT_DT,
        lead: reference::STEP_LEAD,
        tail: ringdown(&model),
    }
}

fn c4_phase_coverage() -> Outcome {
    let src = reference_source();
    let points = 2000;
    let mut phases: Vec<f64> = (0..points)
        .into_par_iter()
        .map(|k| {
            let initial = -0.5 + (k as f64 + 0.5) / points as f64;
            let p = src.emit(initial).map_err(e2s)?;
            Ok(pulse_metrics(&p).map_err(e2s)?.phase)
        })
        .collect::<Result<_, String>>()?;
    phases.sort_by(f64::total_cmp);
    let mut gap = phases[0] + 2.0 * PI - phases[phases.len() - 1];
    for w in phases.windows(2) {
        gap = gap.max(w[1] - w[0]);
    }
    check(gap < 0.1, || format!("largest phase gap {gap:.4} rad"))?;
    Ok(format!(
        "{points} initial fluxes over one period, largest gap {gap:.2e} rad"
    ))
}

fn c5_frequency_control() -> Outcome {
    let m = reference::drive_model();
    let kappa = m.circuit.kappa();
    let ends: Vec<f64> = (0..46).map(|k| 0.55 + 0.01 * k as f64).collect();
    let rows: Vec<(f64, f64)> = ends
        .par_iter()
        .map(|&end| {
            let spec = WaveformSpec::sudden_step(
                reference::STEP_START,
                end,
                DEFAULT_DT,
                reference::STEP_LEAD,
                ringdown(&m),
            );
            let w = build_waveform(&spec, DEFAULT_DT).map_err(e2s)?;
            let fit = pulse_metrics(&simulate_emission(&w, &m).map_err(e2s)?).map_err(e2s)?;
            Ok((
                fit.frequency,
                m.circuit.resonance_frequency(end).map_err(e2s)?,
            ))
        })
        .collect::<Result<_, String>>()?;
    let worst = rows.iter().map(|(f, r)| (f - r).abs()).fold(0.0, f64::max);
    let lo = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
    let hi = rows.iter().map(|r| r.1).fold(0.0, f64::max);
    let span_mhz = (hi - lo) / (2.0 * PI) / 1e6;
    check(span_mhz > 200.0, || {
        format!("tuning span only {span_mhz:.1} MHz")
    })?;
    check(worst < kappa / 10.0, || {
        format!("carrier off resonance by {:.3e} Hz", worst / (2.0 * PI))
    })?;
    Ok(format!(
        "span {span_mhz:.1} MHz, worst carrier error {:.2e} Hz (limit {:.0} Hz)",
        worst / (2.0 * PI),
        kappa / 10.0 / (2.0 * PI)
    ))
}

fn c6_calibrated_magnitudes() -> Outcome {
    let m = reference::drive_model();
    let n = simulate_emission(&reference::reference_step(), &m)
        .map_err(e2s)?
        .photons;
    check((n - 1000.0).abs() <= 50.0, || {
        format!("reference step emits {n:.1} photons")
    })?;
    let ratio = reference::channel_power_ratio(&m, &ChannelModel::twisted_pair()).map_err(e2s)?;
    check((ratio - 0.07).abs() <= 0.02, || {
        format!("twisted-pair ratio {ratio:.4}")
    })?;
    Ok(format!("{n:.2} photons, twisted-pair ratio {ratio:.4}"))
}

fn delayed(w: &FluxWaveform, by: usize) -> FluxWaveform {
    let s = w.samples();
    let mut shifted = vec![s[0]; by];
    shifted.extend_from_slice(&s[..s.len() - by]);
    FluxWaveform::with_drive_end(shifted, w.dt(), w.drive_end() + by).expect("valid shift")
}

fn c7_interference() -> Outcome {
    let m = reference::drive_model();
    let w1 = reference::reference_step();
    // Second source: weaker and 300 ns later, so |M| is well below 1.
    let w2 = delayed(&w1, 300);
    let p1 = simulate_emission(&w1, &m).map_err(e2s)?;
    let p2 = simulate_emission(&w2, &m.scaled(0.6)).map_err(e2s)?;
    let tol = m.circuit.kappa() / 100.0;
    let (n1, n2) = (p1.photons, p2.photons);
    let mm = mode_overlap(&p1, &p2).map_err(e2s)?.norm();

    let total = phase_sweep(&p1, &p2, 361, tol).map_err(e2s)?;
    let (a, amp, res) = cosine_fit(&total);
    check(res <= 1e-9 * a, || {
        format!("total sweep deviates from a + b cos by {:.2e}", res / a)
    })?;
    let (tmax, tmin) = (
        n1 + n2 + 2.0 * mm * (n1 * n2).sqrt(),
        n1 + n2 - 2.0 * mm * (n1 * n2).sqrt(),
    );
    check(
        ((a + amp) / tmax - 1.0).abs() < 1e-9 && ((a - amp) / tmin - 1.0).abs() < 1e-9,
        || {
            format!(
                "total extremes {} / {} vs {tmax} / {tmin}",
                a + amp,
                a - amp
            )
        },
    )?;

    let projected: Vec<(f64, f64)> = (0..360)
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 360.0;
            let s = superpose(&[p1.clone(), rotate(&p2, phi)], tol).map_err(e2s)?;
            Ok((phi, projected_photons(&p1, &s).map_err(e2s)?))
        })
        .collect::<Result<_, String>>()?;
    let (pa, pamp, pres) = cosine_fit(&projected);
    check(pres <= 1e-9 * pa, || {
        format!("projected sweep deviates by {:.2e}", pres / pa)
    })?;
    let pmax = (n1.sqrt() + mm * n2.sqrt()).powi(2);
    let pmin = (n1.sqrt() - mm * n2.sqrt()).powi(2);
    check(
        ((pa + pamp) / pmax - 1.0).abs() < 1e-9 && ((pa - pamp) / pmin - 1.0).abs() < 1e-9,
        || {
            format!(
                "projected extremes {} / {} vs {pmax} / {pmin}",
                pa + pamp,
                pa - pamp
            )
        },
    )?;
    let report = overlap_report(&p1, &p2).map_err(e2s)?;
    check(
        (report.n_max / tmax - 1.0).abs() < 1e-12
            && (report.projected_min / pmin - 1.0).abs() < 1e-12,
        || "overlap report disagrees with the sweep".into(),
    )?;

    let src = reference_source();
    let sources = [src, src];
    let map = PhaseMap::compute(&src, -0.5, 0.5, 256).map_err(e2s)?;
    let maps = [map.clone(), map];
    let steered: Vec<f64> = (0..16)
        .into_par_iter()
        .map(|k| {
            let target = 2.0 * PI * k as f64 / 16.0;
            Ok(phase_preserving_max(&sources, &maps, target, tol)
                .map_err(e2s)?
                .pulse
                .photons)
        })
        .collect::<Result<_, String>>()?;
    let lo = steered.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = steered.iter().copied().fold(0.0, f64::max);
    check(hi / lo - 1.0 < 0.01, || {
        format!("steered photons vary {:.3}%", 100.0 * (hi / lo - 1.0))
    })?;
    Ok(format!(
        "|M| {mm:.4}, fit residual {:.1e}, steering over 16 targets varies {:.3}%",
        (res / a).max(pres / pa),
        100.0 * (hi / lo - 1.0)
    ))
}

fn c8_comb() -> Outcome {
    let delta_t = matched_interval(reference::SWEET_SPOT_HZ, 1e-9, 90e-9, 110e-9).map_err(e2s)?;
    let p = TrainParams {
        amplitude: 1.0,
        gamma: reference::circuit().kappa(),
        omega_e: 2.0 * PI * reference::SWEET_SPOT_HZ,
        delta_t,
    };
    let quadrature = |p: &TrainParams, n: i64| -> Complex64 {
        let w = n as f64 * 2.0 * PI / p.delta_t;
        let f = |t: f64| Complex64::from_polar(p.pulse(t), -w * t);
        simpson(f, 0.0, p.delta_t, 1 << 21) / p.delta_t
    };
    let mut worst_q = 0.0f64;
    for q in [
        p,
        TrainParams {
            delta_t: 37e-9,
            gamma: 2.0 * PI * 4e6,
            ..p
        },
    ] {
        let nc = q.carrier_index();
        for k in [-2, -1, 0, 1, 2] {
            let exact = coefficient(&q, nc + k);
            worst_q = worst_q.max((exact - quadrature(&q, nc + k)).norm() / exact.norm());
        }
    }
    check(worst_q < 1e-8, || {
        format!("closed form vs quadrature {worst_q:e}")
    })?;

    let matched = TrainParams {
        omega_e: 2.0 * PI * 6.5e9,
        delta_t: 100e-9,
        ..p
    };
    let mut worst_m = 0.0f64;
    for k in -5..=5 {
        let n = matched.carrier_index() + k;
        let b = matched_coefficient(&matched, n);
        worst_m = worst_m.max((coefficient(&matched, n) - b).norm() / b.norm());
    }
    check(worst_m < 1e-12, || {
        format!("matched specialisation {worst_m:e}")
    })?;

    let train_dt = 10e-12;
    let train = synthesize_train(&p, 20, train_dt).map_err(e2s)?;
    let psd = periodogram(&train, train_dt, Window::Rectangular).map_err(e2s)?;
    let centre = (reference::SWEET_SPOT_HZ / psd.df).round() as usize;
    let mut peaks: Vec<usize> = (centre - 100..=centre + 100)
        .filter(|&k| psd.power[k] > psd.power[k - 1] && psd.power[k] >= psd.power[k + 1])
        .collect();
    peaks.sort_by(|&a, &b| psd.power[b].total_cmp(&psd.power[a]));
    peaks.truncate(5);
    let worst_bin = peaks
        .iter()
        .map(|&k| {
            let f = psd.freq[k];
            (f - (f * delta_t).round() / delta_t).abs() / psd.df
        })
        .fold(0.0, f64::max);
    check(peaks.len() == 5 && worst_bin <= 1.0, || {
        format!("FFT peaks off the n/δt grid by {worst_bin} bins")
    })?;

    let side_ratio = |gamma: f64| {
        let q = TrainParams { gamma, ..matched };
        let nc = q.carrier_index();
        coefficient(&q, nc + 1)
            .norm()
            .max(coefficient(&q, nc - 1).norm())
            / coefficient(&q, nc).norm()
    };
    let mut prev = f64::INFINITY;
    for gamma in [1e6, 1e4, 1e2, 1.0] {
        let ratio = side_ratio(gamma);
        check(ratio < prev, || {
            format!("sidebands do not shrink at γ = {gamma}")
        })?;
        prev = ratio;
    }
    check(prev < 1e-6, || {
        format!("sideband ratio {prev:e} at γ = 1/s")
    })?;
    let lossless = side_ratio(0.0);
    check(lossless < 1e-12, || {
        format!("lossless sideband ratio {lossless:e}")
    })?;

    let spectrum = comb_coefficients(&p, -20..=20).map_err(e2s)?;
    let db = sideband_suppression(&spectrum).map_err(e2s)?;
    check((20.0..=30.0).contains(&db), || {
        format!("suppression {db:.2} dB")
    })?;
    Ok(format!(
        "δt {:.0} ns, quadrature {worst_q:.1e}, matched {worst_m:.1e}, peaks within {worst_bin:.2} bin, suppression {db:.2} dB",
        delta_t * 1e9
    ))
}

/// Gaussian (FWHM `g`) convolved with a Lorentzian (FWHM `l`) by direct
/// quadrature, split where each factor is sharp.
fn voigt_by_quadrature(x: f64, g: f64, l: f64) -> f64 {
    let sigma = g / (8.0 * 2f64.ln()).sqrt();
    let hw = 0.5 * l;
    let gauss = |u: f64| (-0.5 * (u / sigma).powi(2)).exp();
    let lorentz = |y: f64| hw / PI / (y * y + hw * hw);
    let y0 = 20.0 * l;
    // Core: y = hw tan θ absorbs the Lorentzian peak.
    let t0 = (y0 / hw).atan();
    let core = simpson(|t: f64| gauss(x - hw * t.tan()), -t0, t0, 400) / PI;
    // Wings: y = ±e^s, resolving both the 1/y² tail and the Gaussian.
    let y1 = x.abs() + 10.0 * sigma;
    let wing = |sign: f64| {
        simpson(
            |s: f64| {
                let y = sign * s.exp();
                gauss(x - y) * lorentz(y) * y.abs()
            },
            y0.ln(),
            y1.ln(),
            4000,
        )
    };
    core + wing(1.0) + wing(-1.0)
}

fn c9_linewidth_bound() -> Outcome {
    let (g, l) = (0.93, 1e-3);
    let points = 4001;
    let freq: Vec<f64> = (0..points)
        .map(|k| 10.0 * (k as f64 / (points - 1) as f64 - 0.5))
        .collect();
    let power: Vec<f64> = freq
        .par_iter()
        .map(|&f| 1e-12 * voigt_by_quadrature(f, g, l))
        .collect();
    let fit = lorentzian_bound(&freq, &power, g, &[0.5e-3, 2e-3]).map_err(e2s)?;
    check(fit.bracket == (0.5e-3, 2e-3), || {
        format!("bracket {:?}", fit.bracket)
    })?;
    let ratio = fit.lorentzian_fwhm / l;
    check((0.5..=2.0).contains(&ratio), || {
        format!("estimate {:.3e} Hz", fit.lorentzian_fwhm)
    })?;
    Ok(format!(
        "bracket [{:.1}, {:.1}] mHz, estimate {:.3} mHz",
        fit.bracket.0 * 1e3,
        fit.bracket.1 * 1e3,
        fit.lorentzian_fwhm * 1e3
    ))
}

/// Φ(x) by Simpson on the normal density; independent of any erf routine.
fn normal_cdf(x: f64) -> f64 {
    0.5 + simpson(|t: f64| (-0.5 * t * t).exp(), 0.0, x, 2000) / (2.0 * PI).sqrt()
}

fn c10_readout() -> Outcome {
    let probe =
        simulate_emission(&reference::reference_step(), &reference::drive_model()).map_err(e2s)?;
    let mut cfg = DispersiveConfig {
        omega_r: probe.carrier,
        noise_photons: 0.0,
        ..DispersiveConfig::default()
    };

    let f_g = TemporalMode::normalized(
        reflected_envelope(&probe, QubitState::Ground, &cfg).map_err(e2s)?,
        probe.dt,
    )
    .map_err(e2s)?;
    let f_e = TemporalMode::normalized(
        reflected_envelope(&probe, QubitState::Excited, &cfg).map_err(e2s)?,
        probe.dt,
    )
    .map_err(e2s)?;
    let direct: f64 = f_g
        .samples
        .iter()
        .zip(&f_e.samples)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
        * probe.dt;
    let t = ModeTemplates::new(f_g.clone(), f_e.clone()).map_err(e2s)?;
    let (ig, qg) = project_iq(&f_g.samples, probe.dt, &t).map_err(e2s)?;
    let (ie, qe) = project_iq(&f_e.samples, probe.dt, &t).map_err(e2s)?;
    let basis_err = [
        (ig - 1.0).abs(),
        qg.abs(),
        (ie - t.theta.cos()).abs(),
        (qe - t.theta.sin()).abs(),
        (t.theta.cos() - direct).abs(),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    check(basis_err < 1e-12, || {
        format!("basis identities off by {basis_err:e}")
    })?;

    for gamma_t in [0.2, 0.6, 2.0, 5.0] {
        let (n, dt) = (1000, 1e-9);
        let gamma = gamma_t / (n as f64 * dt);
        let s: Vec<Complex64> = (0..n)
            .map(|k| Complex64::new((-0.5 * gamma * k as f64 * dt).exp(), 0.0))
            .collect();
        let matched = template_snr(
            &TemporalMode::normalized(s.clone(), dt).map_err(e2s)?,
            &s,
            1.0,
        );
        let square = template_snr(&TemporalMode::square(n, n, dt).map_err(e2s)?, &s, 1.0);
        check(matched >= square, || {
            format!("square window wins at γT = {gamma_t}")
        })?;
        if gamma_t > 0.5 {
            check(matched > square * (1.0 + 1e-6), || {
                format!("no strict gain at γT = {gamma_t}")
            })?;
        }
    }

    let d = separation_for_fidelity(0.973).map_err(e2s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut cloud = |c: Complex64| -> Vec<Complex64> {
        (0..50_000)
            .map(|_| {
                c + Complex64::new(
                    StandardNormal.sample(&mut rng),
                    StandardNormal.sample(&mut rng),
                )
            })
            .collect()
    };
    let (g, e) = (
        cloud(Complex64::new(0.3, -1.0)),
        cloud(Complex64::new(0.3 + 0.8 * d, -1.0 + 0.6 * d)),
    );
    let est = discriminate_and_fidelity(&g, &e).map_err(e2s)?.fidelity;
    let exact = normal_cdf(0.5 * d);
    check((est - exact).abs() < 0.005, || {
        format!("estimator {est:.5} vs closed form {exact:.5}")
    })?;

    cfg.seed = 0x5eed;
    cfg.noise_photons = noise_for_separation(&probe, &cfg, d).map_err(e2s)?;
    let n_t = 50_000u64;
    let traces = |state| -> Result<Vec<IqTrace>, String> {
        (0..n_t)
            .into_par_iter()
            .map(|k| simulate_readout_trace(&probe, state, &cfg, k).map_err(e2s))
            .collect()
    };
    let templates = {
        let tg = traces(QubitState::Ground)?;
        let te = traces(QubitState::Excited)?;
        extract_mode_templates(&tg, &te).map_err(e2s)?
    };
    let points = |state| -> Result<Vec<Complex64>, String> {
        (n_t..2 * n_t)
            .into_par_iter()
            .map(|k| {
                let tr = simulate_readout_trace(&probe, state, &cfg, k).map_err(e2s)?;
                let (i, q) = project_trace(&tr, &templates).map_err(e2s)?;
                Ok(Complex64::new(i, q))
            })
            .collect()
    };
    let model =
        discriminate_and_fidelity(&points(QubitState::Ground)?, &points(QubitState::Excited)?)
            .map_err(e2s)?;
    check((model.fidelity - 0.973).abs() <= 0.003, || {
        format!(
            "pipeline fidelity {:.4} (ci95 {:.4})",
            model.fidelity, model.ci95
        )
    })?;
    Ok(format!(
        "basis {basis_err:.1e}, estimator {est:.4} vs {exact:.4}, pipeline {:.2}% ± {:.2}%",
        100.0 * model.fidelity,
        100.0 * model.ci95
    ))
}

fn c11_drive_chain() -> Outcome {
    let omega_q = 2.0 * PI * 6e9;
    let chain = coupling_chain(
        1000.0,
        omega_q,
        220e6,
        50.0,
        ResonatorPort {
            c_r: 0.4e-12,
            z_r: 50.0,
        },
    )
    .map_err(e2s)?;
    check((chain.c_c - 35e-18).abs() <= 1e-18, || {
        format!("C_c = {:.2} aF", chain.c_c * 1e18)
    })?;

    let g = 2.0 * PI * 0.49e6;
    let vacuum = jc_rabi(&JcConfig::resonant(omega_q, g, 0.0, QubitState::Excited)).map_err(e2s)?;
    let vac_err = (vacuum.omega / (2.0 * g) - 1.0).abs();
    check(vac_err < 1e-3, || {
        format!("vacuum Rabi off by {vac_err:.2e}")
    })?;

    let cases = [(1017.0, 30.8e6), (71.0, 8.23e6), (662.0, 24.9e6)];
    let runs: Vec<(f64, f64, f64)> = cases
        .par_iter()
        .map(|&(n, want)| {
            let cfg = JcConfig {
                truncation: min_truncation(n).max(1200),
                ..JcConfig::resonant(omega_q, g, n, QubitState::Ground)
            };
            let r = jc_rabi(&cfg).map_err(e2s)?;
            Ok((r.hz() / want - 1.0, r.norm_error, r.hz()))
        })
        .collect::<Result<_, String>>()?;
    let worst = runs.iter().map(|r| r.0.abs()).fold(0.0, f64::max);
    let norm = runs.iter().map(|r| r.1).fold(vacuum.norm_error, f64::max);
    check(worst < 0.03, || {
        format!(
            "Rabi rates {:?} MHz",
            runs.iter().map(|r| r.2 / 1e6).collect::<Vec<_>>()
        )
    })?;
    check(norm <= 1e-9, || format!("norm drift {norm:e}"))?;
    Ok(format!(
        "C_c {:.2} aF, vacuum {vac_err:.1e}, Rabi {:.2}/{:.2}/{:.2} MHz (worst {:.2}%), norm {norm:.1e}",
        chain.c_c * 1e18,
        runs[0].2 / 1e6,
        runs[1].2 / 1e6,
        runs[2].2 / 1e6,
        100.0 * worst
    ))
}

const SCENARIO: &str = r#"
name = "determinism"
seed = 4242

[readout]
shots = 300
template_shots = 3000

[interfere]
phase_points = 73
steer_points = 3
map_points = 64

[emit]
sweep_points = 16
end_sweep = [0.6, 0.7, 0.8]

[linewidth]
noise = 1e-7
"#;

fn run_cli(cmd: &str, config: &Path, out: &Path, threads: &str) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_squidpulse"))
        .args([cmd, "--threads", threads, "--config"])
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(e2s)?;
    check(status.status.success(), || {
        format!("{cmd} failed: {}", String::from_utf8_lossy(&status.stderr))
    })
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut v = Vec::new();
    for e in std::fs::read_dir(dir).map_err(e2s)? {
        let e = e.map_err(e2s)?;
        v.push((
            e.file_name().to_string_lossy().into_owned(),
            std::fs::read(e.path()).map_err(e2s)?,
        ));
    }
    v.sort();
    Ok(v)
}

fn c12_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(e2s)?;
    let config = tmp.path().join("scenario.toml");
    std::fs::write(&config, SCENARIO).map_err(e2s)?;
    let mut files = 0;
    for cmd in [
        "tuning-curve",
        "emit",
        "interfere",
        "comb",
        "linewidth",
        "readout",
        "rabi",
    ] {
        let a = tmp.path().join(format!("{cmd}-a"));
        let b = tmp.path().join(format!("{cmd}-b"));
        run_cli(cmd, &config, &a, "1")?;
        run_cli(cmd, &config, &b, "4")?;
        let (sa, sb) = (snapshot(&a)?, snapshot(&b)?);
        check(sa == sb, || {
            format!("{cmd} artifacts differ between reruns")
        })?;
        files += sa.len();
    }
    Ok(format!(
        "7 subcommands, {files} artifacts byte-identical across reruns"
    ))
}

struct Criterion {
    id: &'static str,
    title: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            id: "1",
            title: "tuning curve and fit",
            budget: Some(Duration::from_secs(5)),
            run: c1_tuning_curve,
        },
        Criterion {
            id: "2",
            title: "emission needs a boundary crossing",
            budget: Some(Duration::from_secs(30)),
            run: c2_emission_needs_a_crossing,
        },
        Criterion {
            id: "3",
            title: "sudden-quench oracle",
            budget: None,
            run: c3_sudden_quench_oracle,
        },
        Criterion {
            id: "4",
            title: "phase coverage",
            budget: None,
            run: c4_phase_coverage,
        },
        Criterion {
            id: "5",
            title: "frequency control",
            budget: None,
            run: c5_frequency_control,
        },
        Criterion {
            id: "6",
            title: "calibrated magnitudes",
            budget: None,
            run: c6_calibrated_magnitudes,
        },
        Criterion {
            id: "7",
            title: "interference and steering",
            budget: None,
            run: c7_interference,
        },
        Criterion {
            id: "8",
            title: "comb spectrum",
            budget: Some(Duration::from_secs(60)),
            run: c8_comb,
        },
        Criterion {
            id: "9",
            title: "linewidth bound",
            budget: None,
            run: c9_linewidth_bound,
        },
        Criterion {
            id: "10",
            title: "readout pipeline",
            budget: None,
            run: c10_readout,
        },
        Criterion {
            id: "11",
            title: "drive chain",
            budget: Some(Duration::from_secs(120)),
            run: c11_drive_chain,
        },
        Criterion {
            id: "12",
            title: "CLI determinism",
            budget: None,
            run: c12_determinism,
        },
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match (outcome, c.budget) {
            (Ok(_), Some(b)) if elapsed > b => Err(format!(
                "took {:.1} s, budget {} s",
                elapsed.as_secs_f64(),
                b.as_secs()
            )),
            (o, _) => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {:>2} {}: {detail} [{:.1} s]",
            c.id,
            c.title,
            elapsed.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
