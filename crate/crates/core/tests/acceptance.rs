//! Exit criteria. Each criterion prints one `PASS`/`FAIL` line; the process exits
//! nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};

use bbdyn::bounds::certify;
use bbdyn::coeff_dynamics::simulate;
use bbdyn::harness::{
    cmd_figure1, cmd_sweep, cmd_verify, Basis, ExperimentConfig, Init, SolverChoice, TraceSource,
};
use bbdyn::problem::{synthesize, SpectralProblem};
use bbdyn::report::{Family, Slack};
use bbdyn::rng::{random_spectrum, uniform01};
use bbdyn::solvers::{run_bb, run_sd, SolverConfig, TerminationReason};
use bbdyn::worst_case::{run_orbit_exact, symmetry_break_horizon, worst_case_x0};
use nalgebra::DVector;
use num::{BigInt, BigRational, One};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// `n ∈ {2..8}`, `κ` log-uniform in `[2, 1e4]`, random basis, uniform `[0, 1)` start.
fn random_case(seed: u64) -> (SpectralProblem, DVector<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=8usize);
    let kappa = 2.0 * 5000f64.powf(rng.random::<f64>());
    let lambda = random_spectrum(n, kappa, seed).expect("valid spectrum");
    let p = synthesize(&lambda, seed, DVector::zeros(n)).expect("valid problem");
    let x0 = DVector::from_vec(uniform01(seed, n));
    (p, x0)
}

fn initial_coefficients(p: &SpectralProblem, x0: &DVector<f64>) -> Vec<f64> {
    p.to_coefficients(&p.gradient(x0).unwrap())
        .unwrap()
        .as_slice()
        .to_vec()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Vector-space BB and the coefficient recurrence, 50 problems, 100 iterations,
/// `max_i |d_bb − d_rec| ≤ 1e-9 · max_i |d_rec|` at every recorded k.
fn oracle_equivalence() -> Outcome {
    const TOL: f64 = 1e-9;
    let cfg = SolverConfig {
        max_iters: 100,
        grad_tol: 0.0,
        record_coefficients: true,
    };
    let mut failing = 0;
    let mut worst: f64 = 0.0;
    let mut earliest = usize::MAX;
    for seed in 0..50 {
        let (p, x0) = random_case(seed);
        let bb = run_bb(&p, &x0, &cfg).unwrap().coefficient_trace().unwrap();
        let rec = simulate(p.eigenvalues(), &bb[0], 100).unwrap().trace();
        let mut ok = true;
        for (k, (a, b)) in bb.iter().zip(&rec).enumerate() {
            let diff = a
                .iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
            let scale = max_abs(b);
            let rel = if scale > 0.0 { diff / scale } else { diff };
            worst = worst.max(rel);
            if rel > TOL || rel.is_nan() {
                if ok {
                    earliest = earliest.min(k);
                }
                ok = false;
            }
        }
        failing += usize::from(!ok);
    }
    outcome(
        failing == 0,
        format!(
            "{failing}/50 problems exceed 1e-9 relative; worst {worst:.2e}; earliest departure at k = {earliest}"
        ),
    )
}

/// Per-step bounds on 100 random problems × 200 iterations.
fn per_step_bounds() -> Outcome {
    let slack = Slack::default();
    let (mut ratio, mut contraction, mut failures) = (0, 0, 0);
    for seed in 0..100 {
        let (p, x0) = random_case(1000 + seed);
        let trace = simulate(p.eigenvalues(), &initial_coefficients(&p, &x0), 200)
            .unwrap()
            .trace();
        let report = certify(p.eigenvalues(), &trace, &slack).unwrap();
        for s in report.summaries() {
            match s.family {
                Family::GeneralRatio => ratio += s.checked,
                Family::ConditionalContraction => contraction += s.checked,
                _ => continue,
            }
            failures += s.checked - s.passed;
        }
    }
    outcome(
        failures == 0 && ratio > 0 && contraction > 0,
        format!(
            "{ratio} ratio checks, {contraction} gated contraction checks, {failures} failures"
        ),
    )
}

/// `|d_k^i| ≤ F_i θ^k`, n = 6, κ = 100, 100 seeds, 500 iterations.
fn envelope() -> Outcome {
    let slack = Slack::default();
    let (mut checked, mut failures) = (0, 0);
    let mut worst_ratio: f64 = 0.0;
    for seed in 0..100 {
        let lambda = random_spectrum(6, 100.0, seed).unwrap();
        let p = synthesize(&lambda, seed, DVector::zeros(6)).unwrap();
        let x0 = DVector::from_vec(uniform01(seed, 6));
        let trace = simulate(&lambda, &initial_coefficients(&p, &x0), 500)
            .unwrap()
            .trace();
        let report = certify(&lambda, &trace, &slack).unwrap();
        let s = report.summary(Family::Envelope).unwrap();
        checked += s.checked;
        failures += s.checked - s.passed;
        worst_ratio = worst_ratio.max(s.max_ratio.unwrap_or(0.0));
    }
    outcome(
        failures == 0 && checked > 0,
        format!(
            "{checked} envelope checks, {failures} failures, max |d|/(Fθ^k) = {worst_ratio:.4}"
        ),
    )
}

/// Exact orbit for λ = (1, 3) through k = 64, and the float n = 2 run through k = 30.
fn exact_rate() -> Outcome {
    let one = BigRational::one();
    let three = BigRational::from_integer(BigInt::from(3));
    let orbit = run_orbit_exact(&one, &three, 64).unwrap();
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let mut power = BigRational::one();
    let mut exact_ok = true;
    for p in &orbit.points {
        let b = if p.k % 2 == 0 {
            power.clone()
        } else {
            -power.clone()
        };
        exact_ok &= p.a == power && p.b == b && &p.a * &p.a == &p.b * &p.b;
        power *= &half;
    }

    let cfg = SolverConfig {
        max_iters: 30,
        grad_tol: 0.0,
        record_coefficients: false,
    };
    let mut worst: f64 = 0.0;
    let problems = [
        SpectralProblem::diagonal(vec![1.0, 3.0], DVector::zeros(2)).unwrap(),
        synthesize(&[1.0, 3.0], 0, DVector::zeros(2)).unwrap(),
    ];
    for p in &problems {
        let t = run_bb(p, &worst_case_x0(p).unwrap(), &cfg).unwrap();
        for w in t.records.windows(2) {
            worst = worst.max((w[1].grad_norm / w[0].grad_norm - 0.5).abs());
        }
    }
    let horizon = symmetry_break_horizon(&problems[1], 400, 1e-6).unwrap();
    outcome(
        exact_ok && worst <= 1e-10 && horizon == Some(62),
        format!(
            "exact |a_k| = 2^-k for k ≤ 64: {exact_ok}; float max |ratio − 0.5| over k ≤ 30 = {worst:.2e}; 1e-6 horizon (random basis, seed 0) = {horizon:?}"
        ),
    )
}

/// Worst-case rows of the sweep for κ ∈ {3, 10, 100}.
fn rate_dominance() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        kappas: vec![3.0, 10.0, 100.0],
        seeds: (0..5).collect(),
        dim: 6,
        basis: Basis::Random,
        solver: SolverChoice::Bb,
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let manifest = cmd_sweep(&config).unwrap();
    let table = std::fs::read_to_string(&manifest.files[0]).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let mut rows = 0;
    let mut bad = Vec::new();
    let mut worst: f64 = 0.0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        if &rec[3] != "worst_case" {
            continue;
        }
        rows += 1;
        let kappa: f64 = rec[0].parse().unwrap();
        let rate: f64 = rec[4].parse().unwrap();
        let target = (kappa - 1.0) / (kappa + 1.0);
        let theta = 1.0 - 1.0 / kappa;
        worst = worst.max((rate - target).abs());
        if !((rate - target).abs() <= 1e-6 && rate < theta) {
            bad.push(format!("κ={kappa} seed={}", &rec[1]));
        }
    }
    outcome(
        bad.is_empty() && rows == 15,
        format!(
            "{rows} worst-case rows, max |rate − (κ−1)/(κ+1)| = {worst:.2e}, violations {bad:?}"
        ),
    )
}

/// λ = (0.001, 0.01, 0.1, 1), seeded uniform start.
fn figure1_preset() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = ExperimentConfig {
        out_dir: Some(dir.path().to_path_buf()),
        ..Default::default()
    };
    let manifest = cmd_figure1(&config).unwrap();
    let table = std::fs::read_to_string(dir.path().join("figure1.csv")).unwrap();
    let mut reader = csv::Reader::from_reader(table.as_bytes());
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    let theta = 1.0 - 1.0 / 1000.0;
    let d1: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let non_increasing = d1.windows(2).skip(1).all(|w| w[1] <= w[0]);
    let contracts = d1
        .windows(2)
        .skip(1)
        .all(|w| w[1] <= theta * w[0] * (1.0 + 1e-9));
    let certified = manifest
        .verification
        .as_ref()
        .and_then(|v| v["success"].as_bool())
        .unwrap_or(false);
    let residual = rows.last().unwrap()[1] / rows[0][1];
    let peaks = dir.path().join("figure1_peaks.csv");
    let peak_report = peaks.exists() && manifest.files.contains(&peaks);
    outcome(
        non_increasing && contracts && certified && residual <= 1e-10 && peak_report,
        format!(
            "|d^1| non-increasing: {non_increasing}; θ-contraction: {contracts}; bounds certified: {certified}; ‖g_K‖/‖g_0‖ = {residual:.2e} after {} iterations; peak table: {peak_report}",
            rows.len() - 1
        ),
    )
}

/// n = 1 and κ = 1 terminate after one step with a zero gradient, and verify runs.
fn degenerate_cases() -> Outcome {
    let cfg = SolverConfig::default();
    let cases = [
        SpectralProblem::diagonal(vec![2.5], DVector::from_vec(vec![0.7])).unwrap(),
        synthesize(&[3.0, 3.0, 3.0], 5, DVector::from_vec(vec![1.0, -2.0, 0.5])).unwrap(),
    ];
    let mut ok = true;
    for p in &cases {
        let x0 = DVector::from_vec(uniform01(9, p.dim()));
        for t in [run_bb(p, &x0, &cfg).unwrap(), run_sd(p, &x0, &cfg).unwrap()] {
            let last = t.records.last().unwrap();
            ok &= t.iterations() == 1
                && t.termination == TerminationReason::ExactZeroGradient
                && last.gradient.iter().all(|g| *g == 0.0);
        }
    }
    let dir = tempfile::tempdir().unwrap();
    for (spectrum, basis) in [
        (vec![2.5], Basis::Diagonal),
        (vec![3.0, 3.0, 3.0], Basis::Random),
    ] {
        for trace in [TraceSource::Recurrence, TraceSource::Solver] {
            let config = ExperimentConfig {
                spectrum: Some(spectrum.clone()),
                basis,
                trace,
                init: Init::Uniform01,
                out_dir: Some(dir.path().to_path_buf()),
                ..Default::default()
            };
            ok &= cmd_verify(&config).map(|m| m.success).unwrap_or(false);
        }
    }
    outcome(
        ok,
        "n = 1 and κ = 1: one step to g = 0 for BB and SD; verify succeeds on both traces",
    )
}

fn main() {
    let criteria: [Criterion; 7] = [
        (
            "1 oracle equivalence (solver vs recurrence, 1e-9, 100 iterations)",
            oracle_equivalence,
        ),
        (
            "2 per-step ratio and gated contraction bounds",
            per_step_bounds,
        ),
        ("3 R-linear envelope F_i θ^k", envelope),
        ("4 exact worst-case rate (κ−1)/(κ+1)", exact_rate),
        ("5 worst-case rate within 1e-6 and below θ", rate_dominance),
        ("6 four-dimensional coefficient preset", figure1_preset),
        ("7 degenerate spectra", degenerate_cases),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let result =
            catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|_| outcome(false, "panicked"));
        failed += usize::from(!result.pass);
        println!(
            "{} criterion {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    println!("acceptance: {} of 7 criteria pass", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
