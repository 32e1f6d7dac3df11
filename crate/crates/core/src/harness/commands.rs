use nalgebra::DVector;
use num::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::output::{self, num, write_atomic, write_json};
use super::{spectral_problem, ExperimentConfig, Format, HarnessError, Init, RunManifest};
use crate::bounds::{certify, empirical_rate};
use crate::coeff_dynamics::simulate;
use crate::report::{Family, Slack, VerificationReport};
use crate::rng::random_spectrum;
use crate::solvers::{run_bb, run_sd, Method, SolverConfig, SolverTrajectory, TerminationReason};
use crate::worst_case::{
    embed_orbit_check, format_rational, orbit_rate, rational_from_f64, run_orbit_exact,
    run_orbit_float, symmetric_prefix, symmetry_break_horizon, Arithmetic, OrbitCheck, OrbitError,
    RATE_TOLERANCE,
};

/// Spectrum of the four-dimensional coefficient-trajectory preset.
pub const FIGURE1_SPECTRUM: [f64; 4] = [0.001, 0.01, 0.1, 1.0];

/// A peak is a local maximum at least this many times its predecessor.
pub const PEAK_FACTOR: f64 = 10.0;

/// Worst-case sweep rows stop here, well inside the floating-point symmetry horizon.
pub const WORST_CASE_SWEEP_ITERS: usize = 30;

fn solver_config(iters: usize, tol: f64) -> SolverConfig {
    SolverConfig {
        max_iters: iters,
        grad_tol: tol,
        record_coefficients: true,
    }
}

fn run_method(
    method: Method,
    p: &crate::problem::SpectralProblem,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverTrajectory, HarnessError> {
    Ok(match method {
        Method::BarzilaiBorwein => run_bb(p, x0, cfg)?,
        Method::SteepestDescent => run_sd(p, x0, cfg)?,
    })
}

fn reached_tolerance(t: &SolverTrajectory) -> bool {
    matches!(
        t.termination,
        TerminationReason::Converged | TerminationReason::ExactZeroGradient
    )
}

/// Rate estimate for a run. Worst-case runs are cut at the end of their symmetric
/// stretch, past which rounding has pushed them off the two-mode orbit.
fn measured_rate(
    t: &SolverTrajectory,
    p: &crate::problem::SpectralProblem,
    init: Init,
) -> Option<f64> {
    let norms = t.grad_norms();
    let usable = match init {
        Init::Uniform01 => norms.len(),
        Init::WorstCase if p.lambda_min() < p.lambda_max() => {
            symmetric_prefix(&norms, orbit_rate(p), RATE_TOLERANCE)
        }
        Init::WorstCase => norms.len(),
    };
    empirical_rate(&norms[..usable]).ok()
}

fn opt(x: Option<f64>) -> serde_json::Value {
    x.map_or(serde_json::Value::Null, |v| json!(v))
}

/// Runs the selected solver(s) per seed and writes one trajectory file per run.
pub fn cmd_solve(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    let mut m = RunManifest::new("solve", config);
    let cfg = solver_config(config.iters, config.tol);
    let mut runs = Vec::new();
    for &seed in &config.seeds {
        let p = config.problem(seed)?;
        let x0 = config.initial_point(&p, seed)?;
        for method in config.solver.methods() {
            let name = method.short_name();
            let t = m.time(&format!("{name} seed {seed}"), || {
                run_method(method, &p, &x0, &cfg)
            })?;
            let stem = format!("trajectory_{name}_seed{seed}");
            if config.wants(Format::Csv) {
                let path = m.out_dir.join(format!("{stem}.csv"));
                write_atomic(&path, &output::trajectory_csv(&t)?)?;
                m.files.push(path);
            }
            if config.wants(Format::Json) {
                let path = m.out_dir.join(format!("{stem}.json"));
                write_json(&path, &t)?;
                m.files.push(path);
            }
            let rate = measured_rate(&t, &p, config.init);
            m.messages.push(format!(
                "{name} seed {seed}: {} iterations, ‖g_k‖/‖g_0‖ = {:.3e} ({:?})",
                t.iterations(),
                t.relative_residual(),
                t.termination
            ));
            runs.push(json!({
                "seed": seed,
                "solver": name,
                "iterations": t.iterations(),
                "termination": t.termination,
                "relative_residual": t.relative_residual(),
                "empirical_rate": opt(rate),
            }));
        }
    }
    m.summary = json!({ "runs": runs });
    m.finish()
}

/// Certifies the bound families per seed. The manifest is unsuccessful iff any
/// checked inequality fails.
pub fn cmd_verify(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    let mut m = RunManifest::new("verify", config);
    let cfg = solver_config(config.iters, config.tol);
    let slack = Slack::default();
    let mut merged = VerificationReport::new();
    let mut per_seed = Vec::new();
    for &seed in &config.seeds {
        let p = config.problem(seed)?;
        let lambda = p.eigenvalues().to_vec();
        let x0 = config.initial_point(&p, seed)?;
        let bb = m.time(&format!("bb seed {seed}"), || run_bb(&p, &x0, &cfg))?;
        let trace = match config.trace {
            super::TraceSource::Recurrence => {
                let d0 = p.to_coefficients(&p.gradient(&x0)?)?;
                let sim = m.time(&format!("simulate seed {seed}"), || {
                    simulate(&lambda, d0.as_slice(), config.iters)
                })?;
                if config.wants(Format::Csv) {
                    let path = m.out_dir.join(format!("simulation_seed{seed}.csv"));
                    write_atomic(&path, &output::simulation_csv(&sim)?)?;
                    m.files.push(path);
                }
                sim.trace()
            }
            super::TraceSource::Solver => bb.coefficient_trace().expect("coefficients recorded"),
        };
        let report = m.time(&format!("certify seed {seed}"), || {
            certify(&lambda, &trace, &slack)
        })?;
        if config.wants(Format::Csv) {
            let path = m.out_dir.join(format!("verification_seed{seed}.csv"));
            let mut buf = Vec::new();
            report
                .write_entries_csv(&mut buf)
                .map_err(|e| HarnessError::Numeric(e.to_string()))?;
            write_atomic(&path, &buf)?;
            m.files.push(path);
        }
        let rate = measured_rate(&bb, &p, config.init);
        let kappa = p.condition_number();
        m.messages.push(format!(
            "seed {seed}: {} checks, {} failures, empirical rate {}",
            report.entries.len(),
            report.failure_count(),
            rate.map_or("n/a".to_string(), |r| format!("{r:.6}"))
        ));
        per_seed.push(json!({
            "seed": seed,
            "kappa": kappa,
            "theta": 1.0 - 1.0 / kappa,
            "orbit_rate": (kappa - 1.0) / (kappa + 1.0),
            "empirical_rate": opt(rate),
            "checks": report.entries.len(),
            "failures": report.failure_count(),
        }));
        merged.merge(report);
    }
    let verification = merged.to_summary_json();
    let path = m.out_dir.join("verification.json");
    write_json(
        &path,
        &json!({ "summary": verification, "seeds": per_seed }),
    )?;
    m.files.push(path);
    m.success = merged.is_success();
    m.messages.push(format!(
        "{} seeds, {} failures",
        config.seeds.len(),
        merged.failure_count()
    ));
    m.verification = Some(verification);
    m.summary = json!({ "seeds": per_seed });
    m.finish()
}

/// A sharp local maximum of one coefficient magnitude and what followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakDrop {
    /// 1-based eigen-index.
    pub index: usize,
    pub k: usize,
    pub pre_peak: f64,
    pub peak: f64,
    /// First iteration within two steps of the peak where the magnitude fell below
    /// `pre_peak`.
    pub drop_k: Option<usize>,
}

impl PeakDrop {
    pub fn dropped(&self) -> bool {
        self.drop_k.is_some()
    }
}

/// Sharp peaks in `|d_k^j|`: `|d_k| ≥ PEAK_FACTOR·|d_{k−1}| > 0` and `|d_k| ≥ |d_{k+1}|`.
pub fn peak_drops(trace: &[Vec<f64>]) -> Vec<PeakDrop> {
    let Some(n) = trace.first().map(Vec::len) else {
        return Vec::new();
    };
    let mut peaks = Vec::new();
    for j in 0..n {
        let mag: Vec<f64> = trace.iter().map(|d| d[j].abs()).collect();
        for k in 1..mag.len().saturating_sub(1) {
            let (pre, peak) = (mag[k - 1], mag[k]);
            if pre > 0.0 && peak >= PEAK_FACTOR * pre && peak >= mag[k + 1] {
                let drop_k = (k + 1..=(k + 2).min(mag.len() - 1)).find(|&m| mag[m] < pre);
                peaks.push(PeakDrop {
                    index: j + 1,
                    k,
                    pre_peak: pre,
                    peak,
                    drop_k,
                });
            }
        }
    }
    peaks.sort_by_key(|p| (p.k, p.index));
    peaks
}

/// The four-dimensional coefficient-trajectory preset: BB from a seeded uniform `x0`
/// on `λ = (0.001, 0.01, 0.1, 1)`.
pub fn cmd_figure1(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    if config.iters == 0 {
        return Err(HarnessError::Usage("iters must be at least 1".into()));
    }
    let mut preset = config.clone();
    preset.spectrum = Some(FIGURE1_SPECTRUM.to_vec());
    preset.problem_file = None;
    preset.kappa = None;
    preset.init = Init::Uniform01;
    let mut m = RunManifest::new("figure1", &preset);
    let seed = preset.seeds.first().copied().unwrap_or_default();
    let p = spectral_problem(&FIGURE1_SPECTRUM, preset.basis, seed)?;
    let x0 = preset.initial_point(&p, seed)?;
    let t = m.time("bb", || {
        run_bb(&p, &x0, &solver_config(preset.iters, preset.tol))
    })?;
    let trace = t.coefficient_trace().expect("coefficients recorded");
    let n = FIGURE1_SPECTRUM.len();

    let csv_path = m.out_dir.join("figure1.csv");
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let mut header = vec!["k".to_string(), "grad_norm".into()];
        header.extend((1..=n).map(|i| format!("abs_d_{i}")));
        let rows = t.records.iter().zip(&trace).map(|(r, d)| {
            let mut row = vec![r.k.to_string(), num(r.grad_norm)];
            row.extend(d.iter().map(|x| num(x.abs())));
            row
        });
        std::iter::once(header)
            .chain(rows)
            .try_for_each(|row| w.write_record(&row))
            .and_then(|_| w.flush().map_err(csv::Error::from))
            .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    }
    write_atomic(&csv_path, &buf)?;
    m.files.push(csv_path);

    let labels: Vec<String> = FIGURE1_SPECTRUM
        .iter()
        .enumerate()
        .map(|(i, l)| format!("|d^{}| (λ={l})", i + 1))
        .collect();
    let series: Vec<Vec<f64>> = (0..n)
        .map(|j| trace.iter().map(|d| d[j].abs()).collect())
        .collect();
    let svg_path = m.out_dir.join("figure1.svg");
    let svg = output::log_chart_svg("BB coefficient magnitudes |d_k^j|", &labels, &series);
    write_atomic(&svg_path, svg.as_bytes())?;
    m.files.push(svg_path);

    let peaks = peak_drops(&trace);
    let peaks_path = m.out_dir.join("figure1_peaks.csv");
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let rows = peaks.iter().map(|p| {
            vec![
                p.index.to_string(),
                p.k.to_string(),
                num(p.pre_peak),
                num(p.peak),
                p.drop_k.map(|k| k.to_string()).unwrap_or_default(),
                p.dropped().to_string(),
            ]
        });
        std::iter::once(
            ["index", "k", "pre_peak", "peak", "drop_k", "dropped"]
                .map(String::from)
                .to_vec(),
        )
        .chain(rows)
        .try_for_each(|row| w.write_record(&row))
        .and_then(|_| w.flush().map_err(csv::Error::from))
        .map_err(|e| HarnessError::Numeric(e.to_string()))?;
    }
    write_atomic(&peaks_path, &buf)?;
    m.files.push(peaks_path);

    let d1: Vec<f64> = series[0].clone();
    let purple_non_increasing = d1.windows(2).skip(1).all(|w| w[1] <= w[0]);
    let report = if trace.len() >= 2 {
        Some(certify(&FIGURE1_SPECTRUM, &trace, &Slack::default())?)
    } else {
        None
    };
    let index1_contraction = report.as_ref().map(|r| {
        r.entries
            .iter()
            .filter(|e| e.family == Family::ConditionalContraction && e.i == 1)
            .all(|e| e.pass)
    });
    let observations = json!({
        "seed": seed,
        "iterations": t.iterations(),
        "termination": t.termination,
        "relative_residual": t.relative_residual(),
        "purple_non_increasing_after_k1": purple_non_increasing,
        "index1_theta_contraction": index1_contraction,
        "peaks": peaks.len(),
        "peaks_dropped_within_two": peaks.iter().filter(|p| p.dropped()).count(),
    });
    if preset.wants(Format::Json) {
        let path = m.out_dir.join("figure1.json");
        write_json(
            &path,
            &json!({ "observations": observations, "peaks": peaks }),
        )?;
        m.files.push(path);
    }
    m.messages.push(format!(
        "figure1 seed {seed}: {} iterations, ‖g_k‖/‖g_0‖ = {:.3e}, |d^1| non-increasing: {}, peaks dropped within two steps: {}/{}",
        t.iterations(),
        t.relative_residual(),
        purple_non_increasing,
        peaks.iter().filter(|p| p.dropped()).count(),
        peaks.len()
    ));
    m.verification = report.map(|r| r.to_summary_json());
    m.summary = observations;
    m.finish()
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub seed: u64,
    pub solver: String,
    pub init: String,
    pub empirical_rate: Option<f64>,
    pub theta: f64,
    pub sd_rate_bound: f64,
    pub iters_to_tol: Option<usize>,
}

fn sweep_cell(
    config: &ExperimentConfig,
    kappa: f64,
    seed: u64,
    method: Method,
    init: Init,
) -> Result<SweepRow, HarnessError> {
    let lambda = random_spectrum(config.dim, kappa, seed).ok_or_else(|| {
        HarnessError::Config(format!(
            "no spectrum with n = {} and κ = {kappa}",
            config.dim
        ))
    })?;
    let p = spectral_problem(&lambda, config.basis, seed)?;
    let x0 = super::initial_point(&p, init, seed)?;
    let cfg = match init {
        Init::Uniform01 => solver_config(config.iters, config.tol),
        Init::WorstCase => solver_config(config.iters.min(WORST_CASE_SWEEP_ITERS), 0.0),
    };
    let t = run_method(method, &p, &x0, &cfg)?;
    Ok(SweepRow {
        kappa,
        seed,
        solver: method.short_name().to_string(),
        init: init.name().to_string(),
        empirical_rate: measured_rate(&t, &p, init),
        theta: 1.0 - 1.0 / kappa,
        sd_rate_bound: (kappa - 1.0) / (kappa + 1.0),
        iters_to_tol: reached_tolerance(&t).then(|| t.iterations()),
    })
}

/// κ × seed × solver grid on random spectra of dimension `dim`, plus worst-case rows.
/// Cells run in parallel; rows come out in grid order.
pub fn cmd_sweep(config: &ExperimentConfig) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    if config.kappas.is_empty() {
        return Err(HarnessError::Usage("kappa grid is empty".into()));
    }
    let mut m = RunManifest::new("sweep", config);
    let mut cells = Vec::new();
    for init in [Init::Uniform01, Init::WorstCase] {
        if init == Init::WorstCase && config.dim < 2 {
            continue;
        }
        for &kappa in &config.kappas {
            for &seed in &config.seeds {
                for method in config.solver.methods() {
                    cells.push((kappa, seed, method, init));
                }
            }
        }
    }
    let rows = m.time("grid", || {
        cells
            .par_iter()
            .map(|&(kappa, seed, method, init)| sweep_cell(config, kappa, seed, method, init))
            .collect::<Result<Vec<_>, _>>()
    })?;

    if config.wants(Format::Csv) {
        let mut buf = Vec::new();
        {
            let mut w = csv::Writer::from_writer(&mut buf);
            let header = [
                "kappa",
                "seed",
                "solver",
                "init",
                "empirical_rate",
                "theta",
                "sd_rate_bound",
                "iters_to_tol",
            ];
            let body = rows.iter().map(|r| {
                vec![
                    r.kappa.to_string(),
                    r.seed.to_string(),
                    r.solver.clone(),
                    r.init.clone(),
                    r.empirical_rate.map(num).unwrap_or_default(),
                    num(r.theta),
                    num(r.sd_rate_bound),
                    r.iters_to_tol.map(|k| k.to_string()).unwrap_or_default(),
                ]
            });
            std::iter::once(header.map(String::from).to_vec())
                .chain(body)
                .try_for_each(|row| w.write_record(&row))
                .and_then(|_| w.flush().map_err(csv::Error::from))
                .map_err(|e| HarnessError::Numeric(e.to_string()))?;
        }
        let path = m.out_dir.join("sweep.csv");
        write_atomic(&path, &buf)?;
        m.files.push(path);
    }
    if config.wants(Format::Json) {
        let path = m.out_dir.join("sweep.json");
        write_json(&path, &rows)?;
        m.files.push(path);
    }
    let above_theta = rows
        .iter()
        .filter(|r| r.init == "uniform01" && r.empirical_rate.is_some_and(|e| e > r.theta))
        .count();
    m.messages.push(format!(
        "{} cells, {above_theta} uniform-init rates above θ",
        rows.len()
    ));
    m.summary = json!({ "cells": rows.len(), "uniform_rates_above_theta": above_theta });
    m.finish()
}

/// Two-mode worst-case orbit in the requested arithmetic, plus the full-dimensional
/// check from `x0 = A⁻¹(c + v_1 + v_n)` up to the measured symmetry-break horizon.
///
/// `exact_spectrum` carries the eigenvalues as rationals when they were given as
/// text; otherwise the exact values of the binary64 eigenvalues are used.
pub fn cmd_orbit(
    config: &ExperimentConfig,
    exact_spectrum: Option<&[BigRational]>,
) -> Result<RunManifest, HarnessError> {
    config.validate()?;
    let mut m = RunManifest::new("orbit", config);
    let lambda = match (&config.spectrum, config.kappa) {
        (Some(l), _) => l.clone(),
        (None, Some(kappa)) => vec![1.0, kappa],
        (None, None) if config.problem_file.is_none() => vec![1.0, 3.0],
        (None, None) => config.problem(0)?.eigenvalues().to_vec(),
    };
    if lambda.len() < 2 {
        return Err(OrbitError::DimensionTooSmall(lambda.len()).into());
    }
    let (lo, hi) = (lambda[0], lambda[lambda.len() - 1]);
    let seed = config.seeds[0];
    let mut summary = serde_json::Map::new();

    if lo < hi {
        let path = m.out_dir.join("orbit.csv");
        match Arithmetic::from(config.arithmetic) {
            Arithmetic::ExactRational => {
                let (qlo, qhi) = match exact_spectrum {
                    Some(q) if q.len() == lambda.len() => (q[0].clone(), q[q.len() - 1].clone()),
                    _ => (
                        rational_from_f64(lo).ok_or_else(|| HarnessError::Config("λ_1".into()))?,
                        rational_from_f64(hi).ok_or_else(|| HarnessError::Config("λ_n".into()))?,
                    ),
                };
                let orbit = m.time("exact orbit", || run_orbit_exact(&qlo, &qhi, config.iters))?;
                write_atomic(&path, &output::orbit_csv_exact(&orbit)?)?;
                summary.insert("arithmetic".into(), json!("exact_rational"));
                summary.insert("rate".into(), json!(format_rational(&orbit.rate())));
                summary.insert("symmetric".into(), json!(orbit.is_symmetric()));
                summary.insert("closed_form".into(), json!(orbit.matches_closed_form()));
                m.messages.push(format!(
                    "exact orbit: rate {}, a_k² = b_k² at every step: {}, closed form: {}",
                    format_rational(&orbit.rate()),
                    orbit.is_symmetric(),
                    orbit.matches_closed_form()
                ));
            }
            Arithmetic::Float64 => {
                let orbit = m.time("float orbit", || run_orbit_float(lo, hi, config.iters))?;
                write_atomic(&path, &output::orbit_csv_float(&orbit)?)?;
                let divergence = orbit.divergence_from_closed_form(RATE_TOLERANCE);
                summary.insert("arithmetic".into(), json!("float64"));
                summary.insert("rate".into(), json!(orbit.rate()));
                summary.insert("closed_form_divergence".into(), json!(divergence));
                m.messages.push(format!(
                    "float orbit: rate {:.12}, leaves closed form at k = {:?}",
                    orbit.rate(),
                    divergence
                ));
            }
        }
        m.files.push(path);
    }

    let p = spectral_problem(&lambda, config.basis, seed)?;
    let horizon = if lo < hi {
        symmetry_break_horizon(&p, config.iters, RATE_TOLERANCE)?
    } else {
        None
    };
    let check_iters = horizon.map_or(config.iters, |h| h.saturating_sub(1)).max(1);
    let report = m.time("embedded check", || {
        embed_orbit_check(&p, &OrbitCheck::new(check_iters))
    })?;
    summary.insert("symmetry_break_horizon".into(), json!(horizon));
    summary.insert("checked_iterations".into(), json!(check_iters));
    m.messages.push(if lo < hi {
        format!(
            "embedded run: symmetry holds to 1e-6 through k = {}, {} checks, {} failures",
            check_iters,
            report.entries.len(),
            report.failure_count()
        )
    } else {
        format!(
            "single-point spectrum: {} checks of g_k = 0, {} failures",
            report.entries.len(),
            report.failure_count()
        )
    });
    if config.wants(Format::Csv) {
        let path = m.out_dir.join("orbit_check.csv");
        let mut buf = Vec::new();
        report
            .write_entries_csv(&mut buf)
            .map_err(|e| HarnessError::Numeric(e.to_string()))?;
        write_atomic(&path, &buf)?;
        m.files.push(path);
    }
    m.success = report.is_success();
    m.verification = Some(report.to_summary_json());
    m.summary = serde_json::Value::Object(summary);
    m.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peak_detection() {
        let trace: Vec<Vec<f64>> = [1.0, 0.5, 8.0, 6.0, 0.1, 0.1, 2.0, 1.5, 1.0]
            .iter()
            .map(|x| vec![*x, 1.0])
            .collect();
        let peaks = peak_drops(&trace);
        assert_eq!(peaks.len(), 2);
        assert_eq!(
            (peaks[0].index, peaks[0].k, peaks[0].drop_k),
            (1, 2, Some(4))
        );
        assert_eq!((peaks[1].k, peaks[1].drop_k), (6, None));
        assert!(peak_drops(&[]).is_empty());
    }
}
