//! Barzilai-Borwein against steepest descent on one random problem.

use bbdyn::problem::synthesize;
use bbdyn::rng::{random_spectrum, uniform01};
use bbdyn::solvers::{run_bb, run_sd, SolverConfig};
use nalgebra::DVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (n, kappa, seed) = (20, 1e3, 3);
    let lambda = random_spectrum(n, kappa, seed).expect("valid spectrum");
    let p = synthesize(&lambda, seed, DVector::zeros(n))?;
    let x0 = DVector::from_vec(uniform01(seed, n));
    let cfg = SolverConfig {
        max_iters: 5000,
        grad_tol: 1e-10,
        record_coefficients: false,
    };

    for t in [run_bb(&p, &x0, &cfg)?, run_sd(&p, &x0, &cfg)?] {
        println!(
            "{}: {:5} iterations, ‖g‖/‖g_0‖ = {:.2e}, {:?}",
            t.method.short_name(),
            t.iterations(),
            t.relative_residual(),
            t.termination
        );
    }
    println!(
        "SD worst-case rate (κ−1)/(κ+1) = {:.6}, BB envelope rate 1 − 1/κ = {:.6}",
        (kappa - 1.0) / (kappa + 1.0),
        1.0 - 1.0 / kappa
    );
    Ok(())
}
