//! The BB iteration seen through its eigenbasis coefficients.
//!
//! Writing `g_k = Σ d_k^i v_i`, one BB step multiplies each coefficient by a factor
//! that depends only on the spectrum and the *previous* coefficient vector:
//!
//! ```text
//! d_{k+1}^i = d_k^i · Σ_j (λ_j − λ_i)(d_{k−1}^j)² / Σ_j λ_j (d_{k−1}^j)²
//! ```
//!
//! The first step uses `d_0` in both roles. This module runs that recurrence on plain
//! slices, with no matrices involved, so it can serve as an oracle for the
//! vector-space solver.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("initial coefficient vector is zero")]
    ZeroInitialGradient,
    #[error("previous coefficient vector is zero (fixed point reached)")]
    ZeroPreviousCoefficients,
    #[error("index {index} out of range for dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("bad spectrum: {0}")]
    BadSpectrum(String),
    #[error("iteration count must be at least 1")]
    NoIterations,
}

/// Shrinking when `Σ_j (λ_j − λ_i)(d^j)² ≥ 0`, fluctuation otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    Shrinking,
    Fluctuation,
}

impl Mode {
    /// One-letter code used in CSV output.
    pub fn code(self) -> char {
        match self {
            Mode::Shrinking => 'S',
            Mode::Fluctuation => 'F',
        }
    }
}

fn validate_spectrum(lambda: &[f64]) -> Result<(), DynamicsError> {
    if lambda.is_empty() {
        return Err(DynamicsError::BadSpectrum("empty spectrum".into()));
    }
    if lambda.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
        return Err(DynamicsError::BadSpectrum(
            "eigenvalues must be positive and finite".into(),
        ));
    }
    if lambda.windows(2).any(|w| w[0] > w[1]) {
        return Err(DynamicsError::BadSpectrum(
            "eigenvalues must be ascending".into(),
        ));
    }
    Ok(())
}

fn check_dim(expected: usize, found: usize) -> Result<(), DynamicsError> {
    if expected == found {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch { expected, found })
    }
}

fn max_abs(d: &[f64]) -> f64 {
    d.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn weighted_sum(lambda: &[f64], d: &[f64], i: usize, scale: f64) -> f64 {
    let li = lambda[i];
    lambda
        .iter()
        .zip(d)
        .map(|(lj, dj)| {
            let u = dj / scale;
            (lj - li) * u * u
        })
        .sum()
}

/// `Σ_j (λ_j − λ_i)(d^j)²`, the signed mode sum for index `i`.
///
/// May underflow for tiny `d`; use [`is_shrinking`] for the sign test.
pub fn mode_sum(lambda: &[f64], d: &[f64], i: usize) -> f64 {
    let scale = max_abs(d);
    if scale == 0.0 {
        return 0.0;
    }
    weighted_sum(lambda, d, i, scale) * scale * scale
}

/// Sign test of the mode sum, evaluated on `d / max|d|` so it survives underflow.
pub fn is_shrinking(lambda: &[f64], d: &[f64], i: usize) -> bool {
    let scale = max_abs(d);
    scale == 0.0 || weighted_sum(lambda, d, i, scale) >= 0.0
}

/// The per-index multipliers `Σ_j (λ_j − λ_i)(d^j)² / Σ_j λ_j (d^j)²`.
///
/// The ratio is invariant under scaling of `d_prev`, so both sums are taken over
/// `d_prev / max|d_prev|`. Fails when `d_prev` is zero.
pub fn multipliers(lambda: &[f64], d_prev: &[f64]) -> Result<Vec<f64>, DynamicsError> {
    let scale = max_abs(d_prev);
    if scale == 0.0 {
        return Err(DynamicsError::ZeroPreviousCoefficients);
    }
    let den: f64 = lambda
        .iter()
        .zip(d_prev)
        .map(|(l, d)| {
            let u = d / scale;
            l * u * u
        })
        .sum();
    Ok((0..lambda.len())
        .map(|i| weighted_sum(lambda, d_prev, i, scale) / den)
        .collect())
}

pub fn classify_mode(lambda: &[f64], d: &[f64], i: usize) -> Result<Mode, DynamicsError> {
    check_dim(lambda.len(), d.len())?;
    if i >= lambda.len() {
        return Err(DynamicsError::IndexOutOfRange {
            index: i,
            dim: lambda.len(),
        });
    }
    Ok(mode_of(lambda, d, i))
}

fn mode_of(lambda: &[f64], d: &[f64], i: usize) -> Mode {
    if is_shrinking(lambda, d, i) {
        Mode::Shrinking
    } else {
        Mode::Fluctuation
    }
}

/// Modes of every index at one iteration.
pub fn classify_all(lambda: &[f64], d: &[f64]) -> Vec<Mode> {
    (0..lambda.len()).map(|i| mode_of(lambda, d, i)).collect()
}

/// The pair `(d_{k−1}, d_k)` that determines the next coefficient vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientState {
    lambda: Vec<f64>,
    d_prev: Vec<f64>,
    d_curr: Vec<f64>,
    k: usize,
}

impl CoefficientState {
    pub fn new(
        lambda: Vec<f64>,
        d_prev: Vec<f64>,
        d_curr: Vec<f64>,
        k: usize,
    ) -> Result<Self, DynamicsError> {
        validate_spectrum(&lambda)?;
        check_dim(lambda.len(), d_prev.len())?;
        check_dim(lambda.len(), d_curr.len())?;
        Ok(Self {
            lambda,
            d_prev,
            d_curr,
            k,
        })
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.lambda
    }

    pub fn previous(&self) -> &[f64] {
        &self.d_prev
    }

    pub fn current(&self) -> &[f64] {
        &self.d_curr
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    pub fn is_zero(&self) -> bool {
        self.d_curr.iter().all(|&d| d == 0.0)
    }

    /// Advances one BB iteration.
    pub fn step(&self) -> Result<Self, DynamicsError> {
        let m = multipliers(&self.lambda, &self.d_prev)?;
        let next = self.d_curr.iter().zip(&m).map(|(d, m)| d * m).collect();
        Ok(Self {
            lambda: self.lambda.clone(),
            d_prev: self.d_curr.clone(),
            d_curr: next,
            k: self.k + 1,
        })
    }
}

/// The Cauchy first step from `d_0`; the returned state sits at `k = 1`.
pub fn first_step(lambda: &[f64], d0: &[f64]) -> Result<CoefficientState, DynamicsError> {
    validate_spectrum(lambda)?;
    check_dim(lambda.len(), d0.len())?;
    if d0.iter().all(|&d| d == 0.0) {
        return Err(DynamicsError::ZeroInitialGradient);
    }
    let m = multipliers(lambda, d0)?;
    let d1 = d0.iter().zip(&m).map(|(d, m)| d * m).collect();
    Ok(CoefficientState {
        lambda: lambda.to_vec(),
        d_prev: d0.to_vec(),
        d_curr: d1,
        k: 1,
    })
}

/// One recorded iteration of a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationStep {
    pub k: usize,
    pub d: Vec<f64>,
    pub modes: Vec<Mode>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    pub eigenvalues: Vec<f64>,
    pub steps: Vec<SimulationStep>,
    /// Set when the run reached a zero coefficient vector (or an underflowed
    /// denominator) before the requested iteration count.
    pub reached_fixed_point: bool,
}

impl Simulation {
    /// The coefficient vectors `d_0, d_1, …`.
    pub fn trace(&self) -> Vec<Vec<f64>> {
        self.steps.iter().map(|s| s.d.clone()).collect()
    }
}

/// Runs `iters` BB iterations in coefficient space starting at `d0`.
///
/// The result holds `iters + 1` steps unless a fixed point (zero gradient) is
/// reached first, in which case it ends with the first all-zero vector.
pub fn simulate(lambda: &[f64], d0: &[f64], iters: usize) -> Result<Simulation, DynamicsError> {
    if iters == 0 {
        return Err(DynamicsError::NoIterations);
    }
    let mut state = first_step(lambda, d0)?;
    let mut steps = Vec::with_capacity(iters + 1);
    steps.push(SimulationStep {
        k: 0,
        d: d0.to_vec(),
        modes: classify_all(lambda, d0),
    });
    let mut reached_fixed_point = false;
    loop {
        steps.push(SimulationStep {
            k: state.k,
            modes: classify_all(lambda, &state.d_curr),
            d: state.d_curr.clone(),
        });
        if state.k == iters {
            break;
        }
        if state.is_zero() {
            reached_fixed_point = true;
            break;
        }
        state = match state.step() {
            Ok(s) => s,
            Err(DynamicsError::ZeroPreviousCoefficients) => {
                reached_fixed_point = true;
                break;
            }
            Err(e) => return Err(e),
        };
    }
    Ok(Simulation {
        eigenvalues: lambda.to_vec(),
        steps,
        reached_fixed_point,
    })
}
