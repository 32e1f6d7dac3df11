//! Command-line front end: `bbdyn {solve,verify,figure1,sweep,orbit} [flags]`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use num::BigRational;

use super::{
    cmd_figure1, cmd_orbit, cmd_solve, cmd_sweep, cmd_verify, Basis, ExperimentConfig, Format,
    HarnessError, Init, OrbitArithmetic, RunManifest, SolverChoice, TraceSource,
};
use crate::worst_case::parse_rational;

#[derive(Debug, Parser)]
#[command(
    name = "bbdyn",
    version,
    about = "Barzilai-Borwein dynamics on convex quadratics"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run BB and/or SD and write trajectories.
    Solve(Flags),
    /// Certify the per-step and envelope bounds; exit 1 on any failure.
    Verify(Flags),
    /// Coefficient trajectories on λ = (0.001, 0.01, 0.1, 1) with an SVG chart.
    Figure1(Flags),
    /// Empirical rates over a κ × seed grid.
    Sweep(Flags),
    /// Worst-case two-mode orbit and its full-dimensional check.
    Orbit(Flags),
}

/// Flags shared by every subcommand. Anything given here overrides `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// Comma-separated ascending eigenvalues; `p/q` rationals are accepted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub spectrum: Option<Vec<String>>,
    /// JSON problem: {"matrix": [[..]], "c": [..]} or {"eigenvalues": [..], "seed": s}.
    #[arg(long)]
    pub problem_file: Option<PathBuf>,
    /// Random spectrum with λ_1 = 1 and λ_n = KAPPA (dimension from --dim).
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub dim: Option<usize>,
    /// Condition-number grid for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub kappas: Option<Vec<f64>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `a..b`, `a..=b` or a comma-separated list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub iters: Option<usize>,
    /// Stop once ‖g_k‖ ≤ TOL·‖g_0‖.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverChoice>,
    #[arg(long, value_enum)]
    pub init: Option<Init>,
    #[arg(long, value_enum)]
    pub basis: Option<Basis>,
    /// Coefficient trace certified by `verify`.
    #[arg(long, value_enum)]
    pub trace: Option<TraceSource>,
    #[arg(long, value_enum)]
    pub arithmetic: Option<OrbitArithmetic>,
    /// Output directory; falls back to the config file, then $BBDYN_OUT_DIR.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
    /// JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Parses `a..b` (exclusive), `a..=b` (inclusive) or `a,b,c`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>, HarnessError> {
    let bad = || HarnessError::Usage(format!("cannot parse seeds {text:?}"));
    let num = |s: &str| s.trim().parse::<u64>().map_err(|_| bad());
    let seeds = if let Some((a, b)) = text.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (num(a)?..num(b)?).collect::<Vec<_>>()
    } else {
        text.split(',').map(num).collect::<Result<Vec<_>, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

impl Flags {
    /// Config file (if any) with every given flag applied on top, plus the spectrum as
    /// exact rationals when one was given.
    pub fn resolve(&self) -> Result<(ExperimentConfig, Option<Vec<BigRational>>), HarnessError> {
        let mut c = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        let mut exact = None;
        if let Some(text) = &self.spectrum {
            let q = text
                .iter()
                .map(|s| parse_rational(s).map_err(|e| HarnessError::Usage(e.to_string())))
                .collect::<Result<Vec<_>, _>>()?;
            let values = text
                .iter()
                .zip(&q)
                .map(|(s, q)| {
                    s.trim()
                        .parse::<f64>()
                        .ok()
                        .or_else(|| num::ToPrimitive::to_f64(q))
                        .ok_or_else(|| HarnessError::Usage(format!("bad eigenvalue {s:?}")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            c.spectrum = Some(values);
            c.problem_file = None;
            c.kappa = None;
            exact = Some(q);
        }
        if let Some(path) = &self.problem_file {
            c.problem_file = Some(path.clone());
            c.spectrum = None;
            c.kappa = None;
        }
        if let Some(kappa) = self.kappa {
            c.kappa = Some(kappa);
            c.spectrum = None;
            c.problem_file = None;
        }
        if [
            self.spectrum.is_some(),
            self.problem_file.is_some(),
            self.kappa.is_some(),
        ]
        .iter()
        .filter(|x| **x)
        .count()
            > 1
        {
            return Err(HarnessError::Usage(
                "give at most one of --spectrum, --problem-file and --kappa".into(),
            ));
        }
        match (self.seed, &self.seeds) {
            (Some(_), Some(_)) => {
                return Err(HarnessError::Usage(
                    "give --seed or --seeds, not both".into(),
                ))
            }
            (Some(s), None) => c.seeds = vec![s],
            (None, Some(text)) => c.seeds = parse_seeds(text)?,
            (None, None) => {}
        }
        macro_rules! take {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = &self.$field { c.$target = v.clone(); })*
            };
        }
        take!(dim => dim, kappas => kappas, iters => iters, tol => tol, solver => solver,
              init => init, basis => basis, trace => trace, arithmetic => arithmetic,
              format => formats);
        if let Some(dir) = &self.out_dir {
            c.out_dir = Some(dir.clone());
        }
        Ok((c, exact))
    }
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Command::Solve(f)
            | Command::Verify(f)
            | Command::Figure1(f)
            | Command::Sweep(f)
            | Command::Orbit(f) => f,
        }
    }

    pub fn execute(&self) -> Result<RunManifest, HarnessError> {
        let (config, exact) = self.flags().resolve()?;
        match self {
            Command::Solve(_) => cmd_solve(&config),
            Command::Verify(_) => cmd_verify(&config),
            Command::Figure1(_) => cmd_figure1(&config),
            Command::Sweep(_) => cmd_sweep(&config),
            Command::Orbit(_) => cmd_orbit(&config, exact.as_deref()),
        }
    }
}

/// Parses `args` (program name first), runs the command, prints progress to stdout
/// and errors to stderr, and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match cli.command.execute() {
        Ok(manifest) => {
            for line in &manifest.messages {
                println!("{line}");
            }
            println!("manifest: {}", manifest.manifest_path().display());
            manifest.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
