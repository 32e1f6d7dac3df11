//! The slow initializer: exact two-mode orbit in rationals, then the same start in
//! floating point until rounding breaks the symmetry.

use bbdyn::problem::synthesize;
use bbdyn::worst_case::{
    embed_orbit_check, format_rational, parse_rational, run_orbit_exact, symmetry_break_horizon,
    OrbitCheck,
};
use nalgebra::DVector;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let orbit = run_orbit_exact(&parse_rational("1")?, &parse_rational("10")?, 12)?;
    println!("rate = {}", format_rational(&orbit.rate()));
    for p in &orbit.points {
        println!(
            "k={:2}  a = {:>28}  b = {:>28}",
            p.k,
            format_rational(&p.a),
            format_rational(&p.b)
        );
    }
    println!("matches closed form: {}", orbit.matches_closed_form());

    let p = synthesize(&[1.0, 2.0, 5.0, 10.0], 0, DVector::zeros(4))?;
    let horizon = symmetry_break_horizon(&p, 300, 1e-6)?;
    println!("binary64 run leaves the orbit (1e-6 relative) at k = {horizon:?}");
    let report = embed_orbit_check(&p, &OrbitCheck::new(40))?;
    println!(
        "40-step embedded check: {} entries, {} failures",
        report.entries.len(),
        report.failure_count()
    );
    Ok(())
}
