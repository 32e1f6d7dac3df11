use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{decompose, synthesize, DenseQuadratic, ProblemError, SpectralProblem};

/// On-disk problem description (JSON).
///
/// Either a dense Hessian `{"matrix": [[...]], "c": [...]}` or a spectrum with a basis
/// seed `{"eigenvalues": [...], "seed": 0, "c": [...]}`. `c` defaults to zero and
/// `seed` to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemFile {
    Matrix {
        matrix: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
    Spectrum {
        eigenvalues: Vec<f64>,
        #[serde(default)]
        seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        c: Option<Vec<f64>>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum ProblemFileError {
    #[error("cannot read problem file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed problem file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn linear_term(c: &Option<Vec<f64>>, n: usize) -> Result<DVector<f64>, ProblemError> {
    match c {
        None => Ok(DVector::zeros(n)),
        Some(c) if c.len() == n => Ok(DVector::from_column_slice(c)),
        Some(c) => Err(ProblemError::DimensionMismatch {
            expected: n,
            found: c.len(),
        }),
    }
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self, ProblemFileError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ProblemFileError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn into_problem(&self) -> Result<SpectralProblem, ProblemError> {
        match self {
            ProblemFile::Matrix { matrix, c } => {
                let n = matrix.len();
                if let Some(row) = matrix.iter().find(|r| r.len() != n) {
                    return Err(ProblemError::NotSquare {
                        rows: n,
                        cols: row.len(),
                    });
                }
                let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j]);
                decompose(&DenseQuadratic::new(a, linear_term(c, n)?)?)
            }
            ProblemFile::Spectrum {
                eigenvalues,
                seed,
                c,
            } => synthesize(eigenvalues, *seed, linear_term(c, eigenvalues.len())?),
        }
    }
}
