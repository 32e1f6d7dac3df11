//! Per-step and envelope bounds on BB coefficient sequences, and their verification.
//!
//! With `κ = λ_n/λ_1`, `θ = 1 − 1/κ` and `C_i = max{λ_i/λ_1 − 1, 1 − λ_i/λ_n}`:
//!
//! * every step satisfies `|d_{k+1}^i| ≤ C_i·|d_k^i|` (k ≥ 1);
//! * if `d_{k−1}^i` is shrinking, or fluctuating with `(d_{k−1}^i)² ≥ Σ_{j<i}(d_{k−1}^j)²`,
//!   then `|d_{k+1}^i| ≤ θ·|d_k^i|`;
//! * every coefficient obeys the R-linear envelope `|d_k^i| ≤ F_i·θ^k`, where
//!   `F_1 = |d_0^1|` and `F_i = max{|d_0^i|, |d_1^i|/θ, θ⁻²C_i²·(Σ_{j<i} F_j²)^½}`.
//!
//! The checks below evaluate each of these on a recorded coefficient trace.

use serde::{Deserialize, Serialize};

use crate::coeff_dynamics::is_shrinking;
use crate::report::{Family, Slack, VerificationReport};
use crate::solvers::scaled_norm;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BoundsError {
    #[error("degenerate spectrum (κ = 1): envelope constants are undefined")]
    DegenerateSpectrum,
    #[error("trajectory too short: need at least {needed} records, found {found}")]
    InsufficientTrajectory { needed: usize, found: usize },
    #[error("ledger was built from a different (d_0, d_1) than the trajectory")]
    LedgerMismatch,
    #[error("gradient norm {value} at record {k} is not positive")]
    NonPositiveNorm { k: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bad spectrum: {0}")]
    BadSpectrum(String),
}

/// The constants of the R-linear certificate for one spectrum and starting pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundLedger {
    pub eigenvalues: Vec<f64>,
    pub kappa: f64,
    pub theta: f64,
    /// Per-index step bound `C_i`.
    pub c: Vec<f64>,
    /// Per-index envelope constant `F_i`.
    pub f: Vec<f64>,
    pub d0: Vec<f64>,
    pub d1: Vec<f64>,
}

fn validate(lambda: &[f64]) -> Result<(), BoundsError> {
    if lambda.is_empty() {
        return Err(BoundsError::BadSpectrum("empty spectrum".into()));
    }
    if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(BoundsError::BadSpectrum(
            "eigenvalues must be positive and finite".into(),
        ));
    }
    if lambda.windows(2).any(|w| w[0] > w[1]) {
        return Err(BoundsError::BadSpectrum(
            "eigenvalues must be ascending".into(),
        ));
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<(), BoundsError> {
    if expected == found {
        Ok(())
    } else {
        Err(BoundsError::DimensionMismatch { expected, found })
    }
}

/// `C_i = max{λ_i/λ_1 − 1, 1 − λ_i/λ_n}` for every index.
pub fn step_bounds(lambda: &[f64]) -> Vec<f64> {
    let (lo, hi) = (lambda[0], lambda[lambda.len() - 1]);
    lambda
        .iter()
        .map(|l| (l / lo - 1.0).max(1.0 - l / hi))
        .collect()
}

/// Builds the envelope constants from the spectrum and the first two coefficient vectors.
///
/// `d1` is expected to be the first BB (Cauchy) step applied to `d0`. For `n = 1` the
/// ledger is defined with `θ = 0`; for `n ≥ 2` a single-point spectrum is rejected.
pub fn ledger(lambda: &[f64], d0: &[f64], d1: &[f64]) -> Result<BoundLedger, BoundsError> {
    validate(lambda)?;
    let n = lambda.len();
    check_dim(n, d0.len())?;
    check_dim(n, d1.len())?;
    let kappa = lambda[n - 1] / lambda[0];
    let theta = 1.0 - 1.0 / kappa;
    if n >= 2 && kappa == 1.0 {
        return Err(BoundsError::DegenerateSpectrum);
    }
    let c = step_bounds(lambda);

    let mut f = Vec::with_capacity(n);
    f.push(d0[0].abs());
    for i in 1..n {
        let lower_mass = scaled_norm(&f);
        let coupling = c[i] * c[i] / (theta * theta) * lower_mass;
        f.push(d0[i].abs().max(d1[i].abs() / theta).max(coupling));
    }

    Ok(BoundLedger {
        eigenvalues: lambda.to_vec(),
        kappa,
        theta,
        c,
        f,
        d0: d0.to_vec(),
        d1: d1.to_vec(),
    })
}

fn check_trace(ledger: &BoundLedger, trace: &[Vec<f64>]) -> Result<(), BoundsError> {
    if trace.len() < 2 {
        return Err(BoundsError::InsufficientTrajectory {
            needed: 2,
            found: trace.len(),
        });
    }
    let n = ledger.eigenvalues.len();
    for d in trace {
        check_dim(n, d.len())?;
    }
    Ok(())
}

/// `|d_{k+1}^i| ≤ C_i·|d_k^i|` for every recorded transition with `k ≥ 1`.
pub fn check_general_ratio(
    trace: &[Vec<f64>],
    ledger: &BoundLedger,
    slack: &Slack,
) -> Result<VerificationReport, BoundsError> {
    check_trace(ledger, trace)?;
    let mut report = VerificationReport::new();
    report.touch(Family::GeneralRatio);
    for k in 1..trace.len() - 1 {
        for (i, ci) in ledger.c.iter().enumerate() {
            let lhs = trace[k + 1][i].abs();
            let rhs = ci * trace[k][i].abs();
            report.check(Family::GeneralRatio, i + 1, k, lhs, rhs, slack);
        }
    }
    Ok(report)
}

/// Whether the contraction `|d_{k+1}^i| ≤ θ·|d_k^i|` is claimed, given `d_{k−1}`.
pub fn contraction_applies(lambda: &[f64], d_before: &[f64], i: usize) -> bool {
    if is_shrinking(lambda, d_before, i) {
        return true;
    }
    let scale = d_before.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let lower: f64 = d_before[..i].iter().map(|d| (d / scale).powi(2)).sum();
    (d_before[i] / scale).powi(2) >= lower
}

/// `|d_{k+1}^i| ≤ θ·|d_k^i|` wherever the mode of `d_{k−1}^i` supports it; other
/// transitions are counted as skipped.
pub fn check_conditional_contraction(
    trace: &[Vec<f64>],
    ledger: &BoundLedger,
    slack: &Slack,
) -> Result<VerificationReport, BoundsError> {
    check_trace(ledger, trace)?;
    let lambda = &ledger.eigenvalues;
    let mut report = VerificationReport::new();
    report.touch(Family::ConditionalContraction);
    for k in 1..trace.len() - 1 {
        for i in 0..lambda.len() {
            if contraction_applies(lambda, &trace[k - 1], i) {
                let lhs = trace[k + 1][i].abs();
                let rhs = ledger.theta * trace[k][i].abs();
                report.check(Family::ConditionalContraction, i + 1, k, lhs, rhs, slack);
            } else {
                report.skip(Family::ConditionalContraction);
            }
        }
    }
    Ok(report)
}

fn same_vector(a: &[f64], b: &[f64]) -> bool {
    let scale = scaled_norm(a).max(scaled_norm(b));
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * scale)
}

/// `|d_k^i| ≤ F_i·θ^k` for every recorded `k ≥ 1`.
pub fn check_envelope(
    trace: &[Vec<f64>],
    ledger: &BoundLedger,
    slack: &Slack,
) -> Result<VerificationReport, BoundsError> {
    check_trace(ledger, trace)?;
    if !same_vector(&trace[0], &ledger.d0) || !same_vector(&trace[1], &ledger.d1) {
        return Err(BoundsError::LedgerMismatch);
    }
    let mut report = VerificationReport::new();
    report.touch(Family::Envelope);
    for (k, d) in trace.iter().enumerate().skip(1) {
        let decay = ledger.theta.powi(k.min(i32::MAX as usize) as i32);
        for (i, (di, fi)) in d.iter().zip(&ledger.f).enumerate() {
            report.check(Family::Envelope, i + 1, k, di.abs(), fi * decay, slack);
        }
    }
    Ok(report)
}

/// Runs every bound family on a coefficient trace `d_0, d_1, …`.
///
/// A single-point spectrum with `n ≥ 2` has no envelope; it is certified instead by
/// requiring `d_k = 0` for all `k ≥ 1` (the Cauchy first step is exact).
pub fn certify(
    lambda: &[f64],
    trace: &[Vec<f64>],
    slack: &Slack,
) -> Result<VerificationReport, BoundsError> {
    validate(lambda)?;
    if trace.len() < 2 {
        return Err(BoundsError::InsufficientTrajectory {
            needed: 2,
            found: trace.len(),
        });
    }
    for d in trace {
        check_dim(lambda.len(), d.len())?;
    }
    match ledger(lambda, &trace[0], &trace[1]) {
        Ok(l) => {
            let mut report = check_general_ratio(trace, &l, slack)?;
            report.merge(check_conditional_contraction(trace, &l, slack)?);
            report.merge(check_envelope(trace, &l, slack)?);
            Ok(report)
        }
        Err(BoundsError::DegenerateSpectrum) => {
            let mut report = VerificationReport::new();
            report.note("single-point spectrum (κ = 1): checking d_k = 0 for k ≥ 1");
            report.touch(Family::DegenerateZero);
            for (k, d) in trace.iter().enumerate().skip(1) {
                for (i, di) in d.iter().enumerate() {
                    report.check(Family::DegenerateZero, i + 1, k, di.abs(), 0.0, slack);
                }
            }
            Ok(report)
        }
        Err(e) => Err(e),
    }
}

/// Observed R-linear rate: `exp` of the least-squares slope of `ln‖g_k‖` against `k`.
pub fn empirical_rate(norms: &[f64]) -> Result<f64, BoundsError> {
    const MIN_RECORDS: usize = 10;
    if norms.len() < MIN_RECORDS {
        return Err(BoundsError::InsufficientTrajectory {
            needed: MIN_RECORDS,
            found: norms.len(),
        });
    }
    if let Some((k, &value)) = norms
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > 0.0) || !v.is_finite())
    {
        return Err(BoundsError::NonPositiveNorm { k, value });
    }
    let m = norms.len() as f64;
    let mean_k = (m - 1.0) / 2.0;
    let logs: Vec<f64> = norms.iter().map(|v| v.ln()).collect();
    let mean_log = logs.iter().sum::<f64>() / m;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, l) in logs.iter().enumerate() {
        let dk = k as f64 - mean_k;
        sxy += dk * (l - mean_log);
        sxx += dk * dk;
    }
    Ok((sxy / sxx).exp())
}
