//! Barzilai-Borwein and steepest-descent iterations on a [`SpectralProblem`].
//!
//! Both methods move along `−g_k`. Steepest descent takes the exact line-search
//! (Cauchy) step `g_kᵀg_k / g_kᵀAg_k`; Barzilai-Borwein takes the Cauchy step of the
//! *previous* gradient, `g_{k−1}ᵀg_{k−1} / g_{k−1}ᵀAg_{k−1}`, which on a quadratic
//! equals the two-point rule `sᵀs / sᵀy`. The first BB iteration has no previous
//! gradient and uses the Cauchy step.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::problem::{ProblemError, SpectralProblem};

/// A run aborts once `‖g_k‖` exceeds this multiple of `‖g_0‖`.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("invalid solver config: {0}")]
    InvalidConfig(String),
    #[error("step size undefined for a zero gradient")]
    ZeroGradient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Stop once `‖g_k‖ ≤ grad_tol·‖g_0‖`.
    pub grad_tol: f64,
    pub record_coefficients: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            grad_tol: 1e-12,
            record_coefficients: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.max_iters == 0 {
            return Err(SolverError::InvalidConfig(
                "max_iters must be at least 1".into(),
            ));
        }
        if !(self.grad_tol >= 0.0) || !self.grad_tol.is_finite() {
            return Err(SolverError::InvalidConfig(format!(
                "grad_tol must be finite and non-negative, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    BarzilaiBorwein,
    SteepestDescent,
}

impl Method {
    pub fn short_name(self) -> &'static str {
        match self {
            Method::BarzilaiBorwein => "bb",
            Method::SteepestDescent => "sd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    /// `‖g_k‖ ≤ grad_tol·‖g_0‖`.
    Converged,
    MaxIters,
    /// The gradient is exactly zero, or the last step reached the minimizer to
    /// working precision and the gradient was recorded as zero.
    ExactZeroGradient,
    /// `‖g_k‖` left the `DIVERGENCE_FACTOR·‖g_0‖` ball or became non-finite.
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub k: usize,
    pub x: Vec<f64>,
    pub gradient: Vec<f64>,
    pub grad_norm: f64,
    /// Step `α_k` that produced `x_{k+1}`; `None` on the final record.
    pub step_size: Option<f64>,
    /// `d_k = Vᵀg_k` when requested.
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrajectory {
    pub method: Method,
    pub records: Vec<IterationRecord>,
    pub termination: TerminationReason,
}

impl SolverTrajectory {
    /// Number of steps taken (records minus one).
    pub fn iterations(&self) -> usize {
        self.records.len() - 1
    }

    pub fn grad_norms(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.grad_norm).collect()
    }

    /// `‖g_K‖ / ‖g_0‖` for the last record.
    pub fn relative_residual(&self) -> f64 {
        let g0 = self.records[0].grad_norm;
        let last = self.records.last().map_or(0.0, |r| r.grad_norm);
        if g0 == 0.0 {
            0.0
        } else {
            last / g0
        }
    }

    /// Coefficient vectors `d_0, d_1, …`, if they were recorded.
    pub fn coefficient_trace(&self) -> Option<Vec<Vec<f64>>> {
        self.records
            .iter()
            .map(|r| r.coefficients.clone())
            .collect()
    }
}

/// Euclidean norm with scaling so that tiny or huge entries do not under/overflow.
pub fn scaled_norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

/// `vᵀv / vᵀAv`, the inverse Rayleigh quotient of `A` at `v`.
fn inverse_rayleigh(p: &SpectralProblem, v: &DVector<f64>) -> Result<f64, SolverError> {
    let scale = v.amax();
    if scale == 0.0 {
        return Err(SolverError::ZeroGradient);
    }
    let h = v / scale;
    let ah = p.apply(&h)?;
    let den = h.dot(&ah);
    if !(den > 0.0) {
        return Err(SolverError::ZeroGradient);
    }
    Ok(h.dot(&h) / den)
}

/// Exact line-search step along `−g` for a quadratic.
pub fn cauchy_step_size(p: &SpectralProblem, g: &DVector<f64>) -> Result<f64, SolverError> {
    inverse_rayleigh(p, g)
}

/// BB step `α_k = g_{k−1}ᵀg_{k−1} / g_{k−1}ᵀAg_{k−1}`; always in `[1/λ_n, 1/λ_1]`.
pub fn bb_step_size(p: &SpectralProblem, g_prev: &DVector<f64>) -> Result<f64, SolverError> {
    inverse_rayleigh(p, g_prev)
}

pub fn run_bb(
    p: &SpectralProblem,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverTrajectory, SolverError> {
    run(p, x0, cfg, Method::BarzilaiBorwein)
}

pub fn run_sd(
    p: &SpectralProblem,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<SolverTrajectory, SolverError> {
    run(p, x0, cfg, Method::SteepestDescent)
}

fn record(
    p: &SpectralProblem,
    k: usize,
    x: DVector<f64>,
    g: DVector<f64>,
    cfg: &SolverConfig,
) -> Result<IterationRecord, SolverError> {
    let coefficients = if cfg.record_coefficients {
        Some(p.to_coefficients(&g)?.as_slice().to_vec())
    } else {
        None
    };
    Ok(IterationRecord {
        k,
        grad_norm: scaled_norm(g.as_slice()),
        x: x.as_slice().to_vec(),
        gradient: g.as_slice().to_vec(),
        step_size: None,
        coefficients,
    })
}

/// True when every component of `g_next` is below the rounding error of forming
/// `x_k − α·g_k` and then `A·x − c`; the step reached the minimizer to working precision.
fn at_rounding_floor(
    p: &SpectralProblem,
    x: &DVector<f64>,
    step: &DVector<f64>,
    g_next: &DVector<f64>,
) -> bool {
    let n = p.dim();
    let gamma = 2.0 * (n as f64 + 2.0) * f64::EPSILON;
    let magnitude = x.abs() + step.abs();
    let bound = p.matrix().abs() * magnitude + p.linear_term().abs();
    g_next
        .iter()
        .zip(bound.iter())
        .all(|(g, b)| g.abs() <= gamma * b)
}

fn run(
    p: &SpectralProblem,
    x0: &DVector<f64>,
    cfg: &SolverConfig,
    method: Method,
) -> Result<SolverTrajectory, SolverError> {
    cfg.validate()?;
    let g0 = p.gradient(x0)?;
    let mut records = vec![record(p, 0, x0.clone(), g0, cfg)?];
    let norm0 = records[0].grad_norm;

    let termination = loop {
        let k = records.len() - 1;
        let current = &records[k];
        let norm = current.grad_norm;
        if current.gradient.iter().all(|&v| v == 0.0) {
            break TerminationReason::ExactZeroGradient;
        }
        if !norm.is_finite() || norm > DIVERGENCE_FACTOR * norm0 {
            break TerminationReason::Diverged;
        }
        if norm <= cfg.grad_tol * norm0 {
            break TerminationReason::Converged;
        }
        if k == cfg.max_iters {
            break TerminationReason::MaxIters;
        }

        let x = DVector::from_column_slice(&current.x);
        let g = DVector::from_column_slice(&current.gradient);
        let alpha = match (method, k) {
            (Method::BarzilaiBorwein, k) if k >= 1 => {
                let g_prev = DVector::from_column_slice(&records[k - 1].gradient);
                bb_step_size(p, &g_prev)
            }
            _ => cauchy_step_size(p, &g),
        };
        // A zero previous gradient can only come from underflow; stop rather than divide.
        let alpha = match alpha {
            Ok(a) => a,
            Err(SolverError::ZeroGradient) => break TerminationReason::ExactZeroGradient,
            Err(e) => return Err(e),
        };

        let step = &g * alpha;
        let x_next = &x - &step;
        let mut g_next = p.gradient(&x_next)?;
        if at_rounding_floor(p, &x, &step, &g_next) {
            g_next.fill(0.0);
        }
        records[k].step_size = Some(alpha);
        records.push(record(p, k + 1, x_next, g_next, cfg)?);
    };

    Ok(SolverTrajectory {
        method,
        records,
        termination,
    })
}
