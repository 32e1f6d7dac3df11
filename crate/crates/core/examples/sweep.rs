//! Empirical BB and SD rates across condition numbers, in parallel.

use bbdyn::harness::{cmd_sweep, ExperimentConfig, SolverChoice};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "sweep-out".into());
    let config = ExperimentConfig {
        kappas: vec![10.0, 100.0, 1000.0],
        seeds: (0..10).collect(),
        solver: SolverChoice::Both,
        iters: 2000,
        out_dir: Some(out.into()),
        ..Default::default()
    };
    let manifest = cmd_sweep(&config)?;
    for line in &manifest.messages {
        println!("{line}");
    }
    let table = std::fs::read_to_string(&manifest.files[0])?;
    for line in table.lines().take(12) {
        println!("{line}");
    }
    Ok(())
}
