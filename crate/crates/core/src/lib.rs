//! Barzilai-Borwein and steepest-descent iterations on strictly convex quadratics
//! `f(x) = ½xᵀAx − cᵀx`, studied through the eigen-coefficients `d_k = Vᵀg_k` of the
//! gradient.
//!
//! - [`problem`]: spectral decomposition and seeded problem synthesis.
//! - [`solvers`]: the two gradient methods in vector space.
//! - [`coeff_dynamics`]: the same BB iteration as a recurrence on coefficients.
//! - [`bounds`]: per-step and R-linear envelope certificates for coefficient traces.
//! - [`worst_case`]: the slow two-mode start, in binary64 and exact rationals.
//! - [`harness`]: the batch runner behind the `bbdyn` binary.

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN along with the bad range.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod coeff_dynamics;
pub mod harness;
pub mod problem;
pub mod report;
pub mod rng;
pub mod solvers;
pub mod worst_case;
