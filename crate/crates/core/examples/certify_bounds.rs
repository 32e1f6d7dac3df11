//! Build the envelope constants for a random start and certify every bound family
//! along the coefficient trajectory.

use bbdyn::bounds::{certify, ledger};
use bbdyn::coeff_dynamics::simulate;
use bbdyn::report::Slack;
use bbdyn::rng::{random_spectrum, uniform01};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = random_spectrum(6, 100.0, 11).expect("valid spectrum");
    let d0: Vec<f64> = uniform01(11, 6).iter().map(|u| 2.0 * u - 1.0).collect();
    let trace = simulate(&lambda, &d0, 500)?.trace();

    let l = ledger(&lambda, &trace[0], &trace[1])?;
    println!("κ = {}, θ = {:.4}", l.kappa, l.theta);
    println!("C = {:?}", l.c);
    println!("F = {:?}", l.f);

    let report = certify(&lambda, &trace, &Slack::default())?;
    for s in report.summaries() {
        println!(
            "{:24} checked {:6} passed {:6} skipped {:5} max lhs/rhs {:.3e}",
            s.family.name(),
            s.checked,
            s.passed,
            s.skipped,
            s.max_ratio.unwrap_or(0.0)
        );
    }
    Ok(())
}
