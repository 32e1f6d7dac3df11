//! Coefficient trajectories on λ = (0.001, 0.01, 0.1, 1): writes figure1.csv,
//! figure1.svg and a peak table to the given directory (default `figure1-out`).

use bbdyn::harness::{cmd_figure1, ExperimentConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "figure1-out".into());
    let config = ExperimentConfig {
        out_dir: Some(out.into()),
        ..Default::default()
    };
    let manifest = cmd_figure1(&config)?;
    for line in &manifest.messages {
        println!("{line}");
    }
    for f in &manifest.files {
        println!("wrote {}", f.display());
    }
    Ok(())
}
