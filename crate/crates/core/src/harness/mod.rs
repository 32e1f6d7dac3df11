//! Batch experiment runner behind the `bbdyn` binary.
//!
//! A run is described by an [`ExperimentConfig`] (JSON file, overridden by command-line
//! flags) and produces CSV/JSON artifacts plus a `manifest.json` listing every file
//! written. Each `(config, seed)` pair determines its numeric output completely.

pub mod cli;
mod commands;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::BoundsError;
use crate::coeff_dynamics::DynamicsError;
use crate::problem::{synthesize, ProblemError, SpectralProblem};
use crate::problem::{ProblemFile, ProblemFileError};
use crate::rng::{random_spectrum, uniform01, DEFAULT_SEED};
use crate::solvers::{Method, SolverError};
use crate::worst_case::{worst_case_x0, Arithmetic, OrbitError};

pub use commands::{
    cmd_figure1, cmd_orbit, cmd_solve, cmd_sweep, cmd_verify, peak_drops, PeakDrop,
    FIGURE1_SPECTRUM, PEAK_FACTOR, WORST_CASE_SWEEP_ITERS,
};

/// Output directory fallback when neither a flag nor the config names one.
pub const OUT_DIR_ENV: &str = "BBDYN_OUT_DIR";

pub const DEFAULT_OUT_DIR: &str = "bbdyn-out";

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("numeric: {0}")]
    Numeric(String),
}

impl HarnessError {
    /// 2 for usage, config and I/O problems, 3 for numeric failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Usage(_) | HarnessError::Config(_) | HarnessError::Io { .. } => 2,
            HarnessError::Numeric(_) => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<ProblemError> for HarnessError {
    fn from(e: ProblemError) -> Self {
        match e {
            ProblemError::NoConvergence { .. } => HarnessError::Numeric(e.to_string()),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<SolverError> for HarnessError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Problem(p) => p.into(),
            SolverError::InvalidConfig(m) => HarnessError::Config(m),
            SolverError::ZeroGradient => HarnessError::Numeric(e.to_string()),
        }
    }
}

impl From<DynamicsError> for HarnessError {
    fn from(e: DynamicsError) -> Self {
        HarnessError::Numeric(e.to_string())
    }
}

impl From<BoundsError> for HarnessError {
    fn from(e: BoundsError) -> Self {
        HarnessError::Numeric(e.to_string())
    }
}

impl From<OrbitError> for HarnessError {
    fn from(e: OrbitError) -> Self {
        match e {
            OrbitError::Problem(p) => p.into(),
            OrbitError::Solver(s) => s.into(),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

impl From<ProblemFileError> for HarnessError {
    fn from(e: ProblemFileError) -> Self {
        match e {
            ProblemFileError::Problem(p) => p.into(),
            _ => HarnessError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Bb,
    Sd,
    Both,
}

impl SolverChoice {
    pub fn methods(self) -> Vec<Method> {
        match self {
            SolverChoice::Bb => vec![Method::BarzilaiBorwein],
            SolverChoice::Sd => vec![Method::SteepestDescent],
            SolverChoice::Both => vec![Method::BarzilaiBorwein, Method::SteepestDescent],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// `x0` drawn componentwise from uniform `[0, 1)`.
    Uniform01,
    /// `x0 = A⁻¹(c + v_1 + v_n)`.
    WorstCase,
}

impl Init {
    pub fn name(self) -> &'static str {
        match self {
            Init::Uniform01 => "uniform01",
            Init::WorstCase => "worst_case",
        }
    }
}

/// Eigenbasis used when a problem is given by its spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    Diagonal,
    /// Haar-random orthogonal basis drawn from the run seed.
    Random,
}

/// Which coefficient trace `verify` certifies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TraceSource {
    /// The coefficient recurrence started from `d_0 = Vᵀg_0`.
    Recurrence,
    /// `Vᵀg_k` recorded along the vector-space BB run.
    Solver,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum OrbitArithmetic {
    Exact,
    Float64,
}

impl From<OrbitArithmetic> for Arithmetic {
    fn from(a: OrbitArithmetic) -> Self {
        match a {
            OrbitArithmetic::Exact => Arithmetic::ExactRational,
            OrbitArithmetic::Float64 => Arithmetic::Float64,
        }
    }
}

/// Everything a run needs. Missing JSON fields take the defaults below.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Ascending eigenvalues of `A`.
    pub spectrum: Option<Vec<f64>>,
    /// JSON problem description, see [`ProblemFile`].
    pub problem_file: Option<PathBuf>,
    /// Random spectrum with `λ_1 = 1`, `λ_n = kappa`, `n = dim`, drawn per seed.
    pub kappa: Option<f64>,
    pub dim: usize,
    pub basis: Basis,
    pub init: Init,
    pub solver: SolverChoice,
    pub iters: usize,
    /// Relative stopping tolerance `‖g_k‖ ≤ tol·‖g_0‖`.
    pub tol: f64,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub formats: Vec<Format>,
    pub trace: TraceSource,
    /// Condition-number grid of `sweep`.
    pub kappas: Vec<f64>,
    pub arithmetic: OrbitArithmetic,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spectrum: None,
            problem_file: None,
            kappa: None,
            dim: 6,
            basis: Basis::Diagonal,
            init: Init::Uniform01,
            solver: SolverChoice::Bb,
            iters: 200,
            tol: 1e-12,
            seeds: vec![DEFAULT_SEED],
            out_dir: None,
            formats: vec![Format::Csv],
            trace: TraceSource::Recurrence,
            kappas: vec![10.0, 100.0, 1000.0],
            arithmetic: OrbitArithmetic::Exact,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let sources = [
            self.spectrum.is_some(),
            self.problem_file.is_some(),
            self.kappa.is_some(),
        ];
        if sources.iter().filter(|s| **s).count() > 1 {
            return Err(HarnessError::Usage(
                "give at most one of spectrum, problem file and kappa".into(),
            ));
        }
        if self.iters == 0 {
            return Err(HarnessError::Usage("iters must be at least 1".into()));
        }
        if !(self.tol >= 0.0) || !self.tol.is_finite() {
            return Err(HarnessError::Usage(format!(
                "tol must be finite and non-negative, got {}",
                self.tol
            )));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Usage("seed list is empty".into()));
        }
        if self.dim == 0 {
            return Err(HarnessError::Usage("dim must be at least 1".into()));
        }
        Ok(())
    }

    /// Flag, then config file, then `BBDYN_OUT_DIR`, then [`DEFAULT_OUT_DIR`].
    pub fn resolved_out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn wants(&self, format: Format) -> bool {
        self.formats.contains(&format)
    }

    pub fn has_problem(&self) -> bool {
        self.spectrum.is_some() || self.problem_file.is_some() || self.kappa.is_some()
    }

    /// The problem for one seed. The seed picks the random basis and random spectrum;
    /// a problem file is seed-independent.
    pub fn problem(&self, seed: u64) -> Result<SpectralProblem, HarnessError> {
        if let Some(path) = &self.problem_file {
            return Ok(ProblemFile::load(path)?.into_problem()?);
        }
        let lambda = match (&self.spectrum, self.kappa) {
            (Some(l), _) => l.clone(),
            (None, Some(kappa)) => random_spectrum(self.dim, kappa, seed).ok_or_else(|| {
                HarnessError::Config(format!("no spectrum with n = {} and κ = {kappa}", self.dim))
            })?,
            (None, None) => {
                return Err(HarnessError::Usage(
                    "no problem given (use --spectrum, --problem-file or --kappa)".into(),
                ))
            }
        };
        spectral_problem(&lambda, self.basis, seed)
    }

    pub fn initial_point(
        &self,
        p: &SpectralProblem,
        seed: u64,
    ) -> Result<DVector<f64>, HarnessError> {
        initial_point(p, self.init, seed)
    }
}

pub(crate) fn spectral_problem(
    lambda: &[f64],
    basis: Basis,
    seed: u64,
) -> Result<SpectralProblem, HarnessError> {
    let c = DVector::zeros(lambda.len());
    Ok(match basis {
        Basis::Diagonal => SpectralProblem::diagonal(lambda.to_vec(), c)?,
        Basis::Random => synthesize(lambda, seed, c)?,
    })
}

pub(crate) fn initial_point(
    p: &SpectralProblem,
    init: Init,
    seed: u64,
) -> Result<DVector<f64>, HarnessError> {
    Ok(match init {
        Init::Uniform01 => DVector::from_vec(uniform01(seed, p.dim())),
        Init::WorstCase => worst_case_x0(p)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub label: String,
    pub seconds: f64,
}

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    /// Every file the run wrote, including the manifest itself.
    pub files: Vec<PathBuf>,
    pub verification: Option<serde_json::Value>,
    pub summary: serde_json::Value,
    pub timings: Vec<Timing>,
    /// False iff a verification found a failing inequality.
    pub success: bool,
    /// Human-readable progress lines, printed by the CLI.
    #[serde(skip)]
    pub messages: Vec<String>,
}

impl RunManifest {
    pub(crate) fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            out_dir: config.resolved_out_dir(),
            files: Vec::new(),
            verification: None,
            summary: serde_json::Value::Null,
            timings: Vec::new(),
            success: true,
            messages: Vec::new(),
        }
    }

    pub(crate) fn time<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.push(Timing {
            label: label.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    pub fn exit_code(&self) -> i32 {
        if self.success {
            0
        } else {
            1
        }
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.out_dir.join("manifest.json")
    }

    /// Writes `manifest.json`, after which `files` is complete.
    pub(crate) fn finish(mut self) -> Result<Self, HarnessError> {
        let path = self.manifest_path();
        self.files.push(path.clone());
        let bytes =
            serde_json::to_vec_pretty(&self).map_err(|e| HarnessError::Numeric(e.to_string()))?;
        output::write_atomic(&path, &bytes)?;
        Ok(self)
    }
}
