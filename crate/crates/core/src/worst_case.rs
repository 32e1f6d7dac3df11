//! The slow initializer `x_0 = A⁻¹(c + v_1 + v_n)` and its two-mode orbit.
//!
//! Starting from `g_0 = v_1 + v_n`, only the extreme coefficients `a_k = d_k^1` and
//! `b_k = d_k^n` are ever nonzero, `a_k² = b_k²` at every step, and both shrink by
//! exactly `r = (λ_n − λ_1)/(λ_n + λ_1) = (κ − 1)/(κ + 1)` per iteration, with `b`
//! alternating sign. In binary64 the symmetry is unstable (a perturbation of the
//! log-ratio `ln(a²/b²)` grows like `√2^k`), so the equality is only observable with
//! exact rational arithmetic; [`run_orbit_exact`] provides that.

use std::str::FromStr;

use nalgebra::DVector;
use num::bigint::Sign;
use num::{BigInt, BigRational, Num, One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::problem::{ProblemError, SpectralProblem};
use crate::report::{Family, Slack, VerificationReport};
use crate::solvers::{run_bb, SolverConfig, SolverError, TerminationReason};

/// Interior coefficients of the embedded run must stay below this magnitude.
pub const INTERIOR_TOLERANCE: f64 = 1e-8;

/// Default relative tolerance of `‖g_k‖/‖g_0‖` against `r^k`.
pub const RATE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OrbitError {
    #[error("worst-case construction needs n >= 2, got n = {0}")]
    DimensionTooSmall(usize),
    #[error("degenerate spectrum: λ_lo = λ_hi")]
    DegenerateSpectrum,
    #[error("bad spectrum: {0}")]
    BadSpectrum(String),
    #[error("iteration count must be at least 1")]
    NoIterations,
    #[error("cannot parse {0:?} as a rational number")]
    ParseRational(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Float64,
    ExactRational,
}

/// `A⁻¹(c + v_1 + v_n)`, so that `g_0 = v_1 + v_n`.
pub fn worst_case_x0(p: &SpectralProblem) -> Result<DVector<f64>, OrbitError> {
    let n = p.dim();
    if n < 2 {
        return Err(OrbitError::DimensionTooSmall(n));
    }
    let v = p.eigenbasis();
    let target = p.linear_term() + v.column(0) + v.column(n - 1);
    Ok(p.apply_inverse(&target)?)
}

/// One point `(a_k, b_k) = (d_k^1, d_k^n)` of the orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint<T> {
    pub k: usize,
    pub a: T,
    pub b: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoModeOrbit<T> {
    pub lambda_lo: T,
    pub lambda_hi: T,
    pub points: Vec<OrbitPoint<T>>,
}

/// The coefficient recurrence restricted to the two extreme modes.
///
/// `(a, b)` is the current pair, `(a_prev, b_prev)` the one before it.
fn two_mode_step<T: Num + Clone>(lo: &T, hi: &T, prev: (&T, &T), cur: (&T, &T)) -> (T, T) {
    let (a_prev, b_prev) = prev;
    let (a, b) = cur;
    // The multipliers are homogeneous of degree 0 in the previous pair; dividing by a
    // pivot keeps the squares away from underflow in binary64.
    let pivot = if a_prev.is_zero() { b_prev } else { a_prev };
    let (a_prev, b_prev) = (
        a_prev.clone() / pivot.clone(),
        b_prev.clone() / pivot.clone(),
    );
    let a2 = a_prev.clone() * a_prev;
    let b2 = b_prev.clone() * b_prev;
    let den = lo.clone() * a2.clone() + hi.clone() * b2.clone();
    let a_next = a.clone() * ((hi.clone() - lo.clone()) * b2) / den.clone();
    let b_next = b.clone() * ((lo.clone() - hi.clone()) * a2) / den;
    (a_next, b_next)
}

fn run_two_mode<T>(lo: T, hi: T, iters: usize) -> Result<TwoModeOrbit<T>, OrbitError>
where
    T: Num + Clone + PartialOrd,
{
    if iters == 0 {
        return Err(OrbitError::NoIterations);
    }
    if !(lo > T::zero()) || !(lo <= hi) {
        return Err(OrbitError::BadSpectrum("need 0 < λ_lo ≤ λ_hi".into()));
    }
    if lo == hi {
        return Err(OrbitError::DegenerateSpectrum);
    }
    let mut points = Vec::with_capacity(iters + 1);
    points.push(OrbitPoint {
        k: 0,
        a: T::one(),
        b: T::one(),
    });
    for k in 1..=iters {
        let cur = &points[k - 1];
        let prev = if k == 1 { cur } else { &points[k - 2] };
        let (a, b) = two_mode_step(&lo, &hi, (&prev.a, &prev.b), (&cur.a, &cur.b));
        points.push(OrbitPoint { k, a, b });
    }
    Ok(TwoModeOrbit {
        lambda_lo: lo,
        lambda_hi: hi,
        points,
    })
}

pub fn run_orbit_float(lo: f64, hi: f64, iters: usize) -> Result<TwoModeOrbit<f64>, OrbitError> {
    if !lo.is_finite() || !hi.is_finite() {
        return Err(OrbitError::BadSpectrum("eigenvalues must be finite".into()));
    }
    run_two_mode(lo, hi, iters)
}

pub fn run_orbit_exact(
    lo: &BigRational,
    hi: &BigRational,
    iters: usize,
) -> Result<TwoModeOrbit<BigRational>, OrbitError> {
    run_two_mode(lo.clone(), hi.clone(), iters)
}

impl<T: Num + Clone> TwoModeOrbit<T> {
    /// `r = (λ_hi − λ_lo)/(λ_hi + λ_lo)`.
    pub fn rate(&self) -> T {
        (self.lambda_hi.clone() - self.lambda_lo.clone())
            / (self.lambda_hi.clone() + self.lambda_lo.clone())
    }

    /// `(‖g_k‖/‖g_{k−1}‖)²` for `k ≥ 1`.
    pub fn squared_step_ratios(&self) -> Vec<T> {
        let norm2 = |p: &OrbitPoint<T>| p.a.clone() * p.a.clone() + p.b.clone() * p.b.clone();
        self.points
            .windows(2)
            .map(|w| norm2(&w[1]) / norm2(&w[0]))
            .collect()
    }
}

impl TwoModeOrbit<f64> {
    pub fn step_ratios(&self) -> Vec<f64> {
        self.squared_step_ratios()
            .into_iter()
            .map(f64::sqrt)
            .collect()
    }

    /// `‖g_k‖ / ‖g_0‖` for every point.
    pub fn relative_norms(&self) -> Vec<f64> {
        let n0 = self.points[0].a.hypot(self.points[0].b);
        self.points.iter().map(|p| p.a.hypot(p.b) / n0).collect()
    }

    /// First `k` where `|a_k|` leaves `r^k` by more than `tol` relative.
    pub fn divergence_from_closed_form(&self, tol: f64) -> Option<usize> {
        let r = self.rate();
        self.points
            .iter()
            .find(|p| (p.a.abs() - r.powi(p.k as i32)).abs() > tol * r.powi(p.k as i32))
            .map(|p| p.k)
    }
}

/// A per-step norm ratio: exact when the squared ratio is a perfect rational square.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRatio {
    Exact(BigRational),
    Approx(f64),
}

impl StepRatio {
    pub fn to_f64(&self) -> f64 {
        match self {
            StepRatio::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            StepRatio::Approx(x) => *x,
        }
    }
}

fn exact_sqrt(r: &BigRational) -> Option<BigRational> {
    if r.is_negative() {
        return None;
    }
    let (n, d) = (r.numer(), r.denom());
    let (sn, sd) = (n.sqrt(), d.sqrt());
    (&sn * &sn == *n && &sd * &sd == *d).then(|| BigRational::new(sn, sd))
}

impl TwoModeOrbit<BigRational> {
    pub fn step_ratios(&self) -> Vec<StepRatio> {
        self.squared_step_ratios()
            .iter()
            .map(|r2| match exact_sqrt(r2) {
                Some(r) => StepRatio::Exact(r),
                None => StepRatio::Approx(r2.to_f64().unwrap_or(f64::NAN).sqrt()),
            })
            .collect()
    }

    /// `a_k = r^k` and `b_k = (−1)^k r^k` exactly, for every point.
    pub fn matches_closed_form(&self) -> bool {
        let r = self.rate();
        let mut power = BigRational::one();
        for p in &self.points {
            let signed = if p.k % 2 == 0 {
                power.clone()
            } else {
                -power.clone()
            };
            if p.a != power || p.b != signed {
                return false;
            }
            power *= &r;
        }
        true
    }

    /// `a_k² = b_k²` at every point.
    pub fn is_symmetric(&self) -> bool {
        self.points.iter().all(|p| &p.a * &p.a == &p.b * &p.b)
    }
}

/// Parses `"3"`, `"-0.125"`, `"1e-3"`, `"2.5E2"` or `"7/11"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<BigRational, OrbitError> {
    let err = || OrbitError::ParseRational(text.to_string());
    let s = text.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = BigInt::from_str(n.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(d.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part
        .chars()
        .chain(frac_part.chars())
        .all(|c| c.is_ascii_digit())
    {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let magnitude = BigInt::from_str(&all_digits).map_err(|_| err())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = if scale >= 0 {
        BigRational::from_integer(magnitude * num::pow(ten, scale as usize))
    } else {
        BigRational::new(magnitude, num::pow(ten, (-scale) as usize))
    };
    if negative {
        value = -value;
    }
    Ok(value)
}

/// `"p"` for integers, `"p/q"` otherwise, with `p` and `q` in base 10.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Exact rational value of a binary64 number.
pub fn rational_from_f64(x: f64) -> Option<BigRational> {
    BigRational::from_float(x)
}

/// Sign of a rational as `-1`, `0` or `1`.
pub fn rational_sign(r: &BigRational) -> i8 {
    match r.numer().sign() {
        Sign::Minus => -1,
        Sign::NoSign => 0,
        Sign::Plus => 1,
    }
}

/// Settings for [`embed_orbit_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitCheck {
    pub iters: usize,
    pub rate_tol: f64,
    pub interior_tol: f64,
}

impl OrbitCheck {
    pub fn new(iters: usize) -> Self {
        Self {
            iters,
            rate_tol: RATE_TOLERANCE,
            interior_tol: INTERIOR_TOLERANCE,
        }
    }
}

fn worst_case_run(
    p: &SpectralProblem,
    iters: usize,
) -> Result<crate::solvers::SolverTrajectory, OrbitError> {
    if iters == 0 {
        return Err(OrbitError::NoIterations);
    }
    let x0 = worst_case_x0(p)?;
    let cfg = SolverConfig {
        max_iters: iters,
        grad_tol: 0.0,
        record_coefficients: true,
    };
    Ok(run_bb(p, &x0, &cfg)?)
}

/// Runs BB in full dimension from [`worst_case_x0`] and checks that interior
/// coefficients stay at zero and `‖g_k‖/‖g_0‖` tracks `((κ−1)/(κ+1))^k`.
///
/// A single-point spectrum converges in one step; that case is checked as
/// `g_k = 0` for `k ≥ 1` instead.
pub fn embed_orbit_check(
    p: &SpectralProblem,
    check: &OrbitCheck,
) -> Result<VerificationReport, OrbitError> {
    let traj = worst_case_run(p, check.iters)?;
    let n = p.dim();
    let mut report = VerificationReport::new();
    let exact = Slack {
        relative: 0.0,
        absolute: 0.0,
    };

    if p.lambda_min() == p.lambda_max() {
        report.note(format!(
            "single-point spectrum: BB terminated after {} step(s) ({:?})",
            traj.iterations(),
            traj.termination
        ));
        report.touch(Family::DegenerateZero);
        for rec in &traj.records[1..] {
            report.check(Family::DegenerateZero, 0, rec.k, rec.grad_norm, 0.0, &exact);
        }
        return Ok(report);
    }

    let rate = orbit_rate(p);
    let norm0 = traj.records[0].grad_norm;
    report.touch(Family::OrbitInterior);
    for rec in &traj.records {
        let d = rec.coefficients.as_ref().expect("coefficients recorded");
        for (j, dj) in d.iter().enumerate().take(n - 1).skip(1) {
            report.check(
                Family::OrbitInterior,
                j + 1,
                rec.k,
                dj.abs(),
                check.interior_tol,
                &exact,
            );
        }
        let expected = rate.powi(rec.k as i32);
        let observed = rec.grad_norm / norm0;
        report.check(
            Family::OrbitRate,
            0,
            rec.k,
            (observed - expected).abs(),
            check.rate_tol * expected,
            &exact,
        );
    }
    if traj.termination != TerminationReason::MaxIters {
        report.note(format!(
            "run stopped early at k = {} ({:?})",
            traj.iterations(),
            traj.termination
        ));
    }
    Ok(report)
}

/// `(κ − 1)/(κ + 1)` of a spectrum, from its extreme eigenvalues.
pub fn orbit_rate(p: &SpectralProblem) -> f64 {
    (p.lambda_max() - p.lambda_min()) / (p.lambda_max() + p.lambda_min())
}

/// Length of the leading run of `norms` with `|norms[k]/norms[0] − rate^k| ≤ tol·rate^k`.
pub fn symmetric_prefix(norms: &[f64], rate: f64, tol: f64) -> usize {
    let Some(&n0) = norms.first() else { return 0 };
    norms
        .iter()
        .enumerate()
        .position(|(k, g)| {
            let expected = rate.powi(k as i32);
            !((g / n0 - expected).abs() <= tol * expected)
        })
        .unwrap_or(norms.len())
}

/// First `k` at which the full-dimensional worst-case run departs from
/// `‖g_k‖/‖g_0‖ = r^k` by more than `tol` relative; `None` if it never does within
/// `max_iters`.
pub fn symmetry_break_horizon(
    p: &SpectralProblem,
    max_iters: usize,
    tol: f64,
) -> Result<Option<usize>, OrbitError> {
    if p.lambda_min() == p.lambda_max() {
        return Err(OrbitError::DegenerateSpectrum);
    }
    let traj = worst_case_run(p, max_iters)?;
    let norms = traj.grad_norms();
    let prefix = symmetric_prefix(&norms, orbit_rate(p), tol);
    Ok((prefix < norms.len()).then_some(prefix))
}
