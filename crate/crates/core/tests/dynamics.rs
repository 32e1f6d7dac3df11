use bbdyn::coeff_dynamics::simulate;
use bbdyn::problem::synthesize;
use bbdyn::rng::{random_spectrum, uniform01};
use bbdyn::solvers::{run_bb, run_sd, SolverConfig};
use nalgebra::DVector;
use proptest::prelude::*;

/// One coefficient-space BB step, written out directly:
/// `d_{k+1}^i = d_k^i · Σ_j (λ_j − λ_i)(d_{k−1}^j)² / Σ_j λ_j (d_{k−1}^j)²`.
fn oracle_step(lambda: &[f64], prev: &[f64], cur: &[f64]) -> Vec<f64> {
    let den: f64 = lambda.iter().zip(prev).map(|(l, d)| l * d * d).sum();
    lambda
        .iter()
        .zip(cur)
        .map(|(li, di)| {
            let num: f64 = lambda
                .iter()
                .zip(prev)
                .map(|(lj, d)| (lj - li) * d * d)
                .sum();
            di * num / den
        })
        .collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn bb_trace(n: usize, kappa: f64, seed: u64, iters: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let lambda = random_spectrum(n, kappa, seed).unwrap();
    let p = synthesize(&lambda, seed, DVector::zeros(n)).unwrap();
    let x0 = DVector::from_vec(uniform01(seed, n));
    let cfg = SolverConfig {
        max_iters: iters,
        grad_tol: 0.0,
        record_coefficients: true,
    };
    let trace = run_bb(&p, &x0, &cfg).unwrap().coefficient_trace().unwrap();
    (lambda, trace)
}

/// Every recorded BB step matches the recurrence applied to the recorded pair, up to
/// rounding of order `n·κ²·eps` relative to the pair's scale: each recorded `d_k`
/// carries `κ·eps` relative error, and one step can amplify it by up to `κ`.
#[test]
fn solver_steps_follow_the_recurrence() {
    for seed in 0..40 {
        let n = 2 + (seed as usize % 7);
        let kappa = [3.0, 30.0, 300.0, 3000.0][seed as usize % 4];
        let (lambda, trace) = bb_trace(n, kappa, seed, 100);
        let tol = 4.0 * n as f64 * kappa * kappa * f64::EPSILON;
        for k in 1..trace.len() - 1 {
            let scale = max_abs(&trace[k]).max(max_abs(&trace[k - 1]));
            if max_abs(&trace[k - 1]) < 1e-100 {
                break;
            }
            let predicted = oracle_step(&lambda, &trace[k - 1], &trace[k]);
            let err = predicted
                .iter()
                .zip(&trace[k + 1])
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(
                err <= tol * scale,
                "seed {seed}, k {k}: {err:e} vs scale {scale:e}"
            );
        }
    }
}

/// The library recurrence agrees with the written-out oracle.
#[test]
fn simulate_matches_oracle() {
    let lambda = [0.5, 1.0, 4.0, 9.0, 25.0];
    let d0 = [1.0, -0.5, 0.25, 2.0, -1.0];
    let sim = simulate(&lambda, &d0, 40).unwrap().trace();
    let den: f64 = lambda.iter().zip(&d0).map(|(l, d)| l * d * d).sum();
    let alpha0 = d0.iter().map(|d| d * d).sum::<f64>() / den;
    let d1: Vec<f64> = lambda
        .iter()
        .zip(&d0)
        .map(|(l, d)| d * (1.0 - alpha0 * l))
        .collect();
    for (a, b) in sim[1].iter().zip(&d1) {
        assert!((a - b).abs() <= 1e-15 * max_abs(&d1));
    }
    for k in 1..sim.len() - 1 {
        let predicted = oracle_step(&lambda, &sim[k - 1], &sim[k]);
        for (a, b) in predicted.iter().zip(&sim[k + 1]) {
            assert!((a - b).abs() <= 1e-13 * max_abs(&sim[k]), "k {k}");
        }
    }
}

/// Moving the minimizer (changing `c` and shifting `x0` alike) leaves the gradient
/// trajectory unchanged.
#[test]
fn translation_invariance() {
    let lambda = [1.0, 3.0, 7.0, 20.0];
    let shift = DVector::from_vec(vec![5.0, -2.0, 0.5, 1.0]);
    let base = synthesize(&lambda, 8, DVector::zeros(4)).unwrap();
    let moved = base.with_linear_term(base.apply(&shift).unwrap()).unwrap();
    let x0 = DVector::from_vec(uniform01(8, 4));
    let cfg = SolverConfig {
        max_iters: 12,
        grad_tol: 0.0,
        record_coefficients: true,
    };
    let a = run_bb(&base, &x0, &cfg).unwrap();
    let b = run_bb(&moved, &(&x0 + &shift), &cfg).unwrap();
    let g0 = a.records[0].grad_norm;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        let da = ra.coefficients.as_ref().unwrap();
        let db = rb.coefficients.as_ref().unwrap();
        for (x, y) in da.iter().zip(db) {
            assert!((x - y).abs() <= 1e-10 * g0, "k {}", ra.k);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let p = synthesize(&random_spectrum(7, 500.0, 4).unwrap(), 4, DVector::zeros(7)).unwrap();
    let x0 = DVector::from_vec(uniform01(4, 7));
    let cfg = SolverConfig::default();
    assert_eq!(
        run_bb(&p, &x0, &cfg).unwrap(),
        run_bb(&p, &x0, &cfg).unwrap()
    );
    assert_eq!(
        run_sd(&p, &x0, &cfg).unwrap(),
        run_sd(&p, &x0, &cfg).unwrap()
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Every BB and SD step lies in `[1/λ_n, 1/λ_1]`.
    #[test]
    fn step_sizes_are_bracketed(n in 2usize..10, log_kappa in 0.1f64..4.0, seed in 0u64..1000) {
        let kappa = 10f64.powf(log_kappa);
        let lambda = random_spectrum(n, kappa, seed).unwrap();
        let p = synthesize(&lambda, seed, DVector::zeros(n)).unwrap();
        let x0 = DVector::from_vec(uniform01(seed, n));
        let cfg = SolverConfig { max_iters: 200, grad_tol: 1e-10, record_coefficients: false };
        let (lo, hi) = (1.0 / lambda[n - 1], 1.0 / lambda[0]);
        for t in [run_bb(&p, &x0, &cfg).unwrap(), run_sd(&p, &x0, &cfg).unwrap()] {
            for alpha in t.records.iter().filter_map(|r| r.step_size) {
                prop_assert!(alpha >= lo * (1.0 - 1e-12) && alpha <= hi * (1.0 + 1e-12));
            }
        }
    }

    /// Steepest descent never increases the objective.
    #[test]
    fn steepest_descent_is_monotone(n in 2usize..8, log_kappa in 0.1f64..3.0, seed in 0u64..1000) {
        let lambda = random_spectrum(n, 10f64.powf(log_kappa), seed).unwrap();
        let p = synthesize(&lambda, seed, DVector::zeros(n)).unwrap();
        let x0 = DVector::from_vec(uniform01(seed, n));
        let cfg = SolverConfig { max_iters: 100, grad_tol: 1e-8, record_coefficients: false };
        let t = run_sd(&p, &x0, &cfg).unwrap();
        let f: Vec<f64> = t.records.iter()
            .map(|r| p.objective(&DVector::from_column_slice(&r.x)).unwrap())
            .collect();
        for w in f.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0));
        }
    }
}
