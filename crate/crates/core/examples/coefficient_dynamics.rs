//! Run BB purely in eigen-coefficient space and print magnitudes with their modes
//! (S = shrinking, F = fluctuation).

use bbdyn::coeff_dynamics::simulate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let lambda = [1.0, 4.0, 20.0, 100.0];
    let d0 = [0.5, -1.0, 2.0, 1.0];
    let sim = simulate(&lambda, &d0, 30)?;
    for step in &sim.steps {
        let mags: Vec<String> = step.d.iter().map(|x| format!("{:9.2e}", x.abs())).collect();
        let modes: String = step.modes.iter().map(|m| m.code()).collect();
        println!("k={:2}  {}  {}", step.k, mags.join(" "), modes);
    }
    Ok(())
}
