//! Strictly convex quadratics `f(x) = ½xᵀAx − cᵀx` in dense and spectral form.

mod file;
pub mod jacobi;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::rng::{self, Stream};

pub use file::{ProblemFile, ProblemFileError};

/// Relative asymmetry `max|A_ij − A_ji| / max|A_ij|` tolerated by [`decompose`].
pub const SYMMETRY_TOLERANCE: f64 = 1e-12;

/// Max-abs deviation of `VᵀV` from the identity accepted for an eigenbasis.
pub const ORTHOGONALITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("problem has dimension zero")]
    Empty,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("non-finite entry in problem data")]
    NonFinite,
    #[error("matrix is not symmetric (relative asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },
    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("bad spectrum: {0}")]
    BadSpectrum(String),
    #[error("eigenbasis is not orthogonal (max deviation {deviation:e})")]
    NotOrthogonal { deviation: f64 },
    #[error("Jacobi iteration did not converge within {sweeps} sweeps")]
    NoConvergence { sweeps: usize },
}

fn check_dim(expected: usize, found: usize) -> Result<(), ProblemError> {
    if expected == found {
        Ok(())
    } else {
        Err(ProblemError::DimensionMismatch { expected, found })
    }
}

/// A quadratic given by its Hessian `A` and linear term `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseQuadratic {
    a: DMatrix<f64>,
    c: DVector<f64>,
}

impl DenseQuadratic {
    pub fn new(a: DMatrix<f64>, c: DVector<f64>) -> Result<Self, ProblemError> {
        if a.nrows() != a.ncols() {
            return Err(ProblemError::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        if a.nrows() == 0 {
            return Err(ProblemError::Empty);
        }
        check_dim(a.nrows(), c.len())?;
        if a.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        Ok(Self { a, c })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.c
    }

    /// `max|A_ij − A_ji| / max|A_ij|`, zero for the zero matrix.
    pub fn relative_asymmetry(&self) -> f64 {
        let scale = self.a.amax();
        if scale == 0.0 {
            return 0.0;
        }
        (&self.a - self.a.transpose()).amax() / scale
    }
}

/// A quadratic in its eigenbasis: `A = V·diag(λ)·Vᵀ` with `λ` ascending and positive.
///
/// Immutable once built. The dense Hessian is reconstructed once and cached so that
/// solvers act with the same matrix that `gradient` uses.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProblem {
    eigenvalues: Vec<f64>,
    eigenbasis: DMatrix<f64>,
    c: DVector<f64>,
    a: DMatrix<f64>,
}

fn validate_spectrum(eigenvalues: &[f64]) -> Result<(), ProblemError> {
    if eigenvalues.is_empty() {
        return Err(ProblemError::Empty);
    }
    if let Some(bad) = eigenvalues.iter().find(|l| !l.is_finite() || **l <= 0.0) {
        return Err(ProblemError::BadSpectrum(format!(
            "eigenvalue {bad} is not strictly positive and finite"
        )));
    }
    if let Some(w) = eigenvalues.windows(2).find(|w| w[0] > w[1]) {
        return Err(ProblemError::BadSpectrum(format!(
            "eigenvalues must be ascending ({} > {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

/// Max-abs entry of `VᵀV − I`.
pub fn orthogonality_defect(v: &DMatrix<f64>) -> f64 {
    let n = v.ncols();
    (v.transpose() * v - DMatrix::<f64>::identity(n, n)).amax()
}

impl SpectralProblem {
    /// Builds a problem from an ascending positive spectrum and an orthogonal basis.
    pub fn from_parts(
        eigenvalues: Vec<f64>,
        eigenbasis: DMatrix<f64>,
        c: DVector<f64>,
    ) -> Result<Self, ProblemError> {
        validate_spectrum(&eigenvalues)?;
        let n = eigenvalues.len();
        if eigenbasis.nrows() != eigenbasis.ncols() {
            return Err(ProblemError::NotSquare {
                rows: eigenbasis.nrows(),
                cols: eigenbasis.ncols(),
            });
        }
        check_dim(n, eigenbasis.nrows())?;
        check_dim(n, c.len())?;
        if eigenbasis.iter().chain(c.iter()).any(|x| !x.is_finite()) {
            return Err(ProblemError::NonFinite);
        }
        let deviation = orthogonality_defect(&eigenbasis);
        if deviation > ORTHOGONALITY_TOLERANCE {
            return Err(ProblemError::NotOrthogonal { deviation });
        }
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&eigenvalues));
        let mut a = &eigenbasis * lam * eigenbasis.transpose();
        // exact symmetry of the cached Hessian
        a = (&a + a.transpose()) * 0.5;
        Ok(Self {
            eigenvalues,
            eigenbasis,
            c,
            a,
        })
    }

    /// `A = diag(λ)` with the standard basis as eigenbasis.
    pub fn diagonal(eigenvalues: Vec<f64>, c: DVector<f64>) -> Result<Self, ProblemError> {
        let n = eigenvalues.len();
        Self::from_parts(eigenvalues, DMatrix::identity(n, n), c)
    }

    /// Same Hessian, different linear term.
    pub fn with_linear_term(&self, c: DVector<f64>) -> Result<Self, ProblemError> {
        check_dim(self.dim(), c.len())?;
        Ok(Self { c, ..self.clone() })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenvectors `v_1..v_n`.
    pub fn eigenbasis(&self) -> &DMatrix<f64> {
        &self.eigenbasis
    }

    pub fn linear_term(&self) -> &DVector<f64> {
        &self.c
    }

    /// The reconstructed Hessian `V·diag(λ)·Vᵀ`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[self.dim() - 1]
    }

    /// `κ = λ_n / λ_1`.
    pub fn condition_number(&self) -> f64 {
        self.lambda_max() / self.lambda_min()
    }

    pub fn to_dense(&self) -> DenseQuadratic {
        DenseQuadratic {
            a: self.a.clone(),
            c: self.c.clone(),
        }
    }

    /// `A·v`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        check_dim(self.dim(), v.len())?;
        Ok(&self.a * v)
    }

    /// `A⁻¹·b`, computed as `V·diag(1/λ)·Vᵀ·b`.
    pub fn apply_inverse(&self, b: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        let mut d = self.to_coefficients(b)?;
        for (di, li) in d.iter_mut().zip(&self.eigenvalues) {
            *di /= li;
        }
        self.from_coefficients(&d)
    }

    /// `g = A·x − c`.
    pub fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        check_dim(self.dim(), x.len())?;
        Ok(&self.a * x - &self.c)
    }

    /// `f(x) = ½xᵀAx − cᵀx`.
    pub fn objective(&self, x: &DVector<f64>) -> Result<f64, ProblemError> {
        check_dim(self.dim(), x.len())?;
        Ok(0.5 * x.dot(&(&self.a * x)) - self.c.dot(x))
    }

    /// Eigenbasis coefficients `d = Vᵀg`.
    pub fn to_coefficients(&self, g: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        check_dim(self.dim(), g.len())?;
        Ok(self.eigenbasis.tr_mul(g))
    }

    /// `g = V·d`.
    pub fn from_coefficients(&self, d: &DVector<f64>) -> Result<DVector<f64>, ProblemError> {
        check_dim(self.dim(), d.len())?;
        Ok(&self.eigenbasis * d)
    }
}

/// Diagonalizes a dense quadratic into spectral form.
///
/// Eigenvalues come out ascending and each eigenvector's first non-negligible
/// component is positive.
pub fn decompose(p: &DenseQuadratic) -> Result<SpectralProblem, ProblemError> {
    let asymmetry = p.relative_asymmetry();
    if asymmetry > SYMMETRY_TOLERANCE {
        return Err(ProblemError::NotSymmetric { asymmetry });
    }
    let eig = jacobi::jacobi_eigen(&p.a)?;
    let min_eigenvalue = eig.values[0];
    if min_eigenvalue <= 0.0 {
        return Err(ProblemError::NotPositiveDefinite { min_eigenvalue });
    }
    SpectralProblem::from_parts(eig.values, eig.vectors, p.c.clone())
}

/// A Haar-distributed orthogonal matrix, deterministic in `seed`.
pub fn random_orthogonal(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = rng::stream(seed, Stream::Basis);
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// A problem with prescribed spectrum and a seeded random eigenbasis.
pub fn synthesize(
    eigenvalues: &[f64],
    seed: u64,
    c: DVector<f64>,
) -> Result<SpectralProblem, ProblemError> {
    validate_spectrum(eigenvalues)?;
    let v = random_orthogonal(eigenvalues.len(), seed);
    SpectralProblem::from_parts(eigenvalues.to_vec(), v, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn diag_problem(lam: &[f64], c: &[f64]) -> SpectralProblem {
        SpectralProblem::diagonal(lam.to_vec(), dv(c)).unwrap()
    }

    #[test]
    fn identity_decomposes_to_identity() {
        let p = DenseQuadratic::new(DMatrix::identity(3, 3), DVector::zeros(3)).unwrap();
        let s = decompose(&p).unwrap();
        assert_eq!(s.eigenvalues(), &[1.0, 1.0, 1.0]);
        assert_eq!(s.eigenbasis(), &DMatrix::<f64>::identity(3, 3));
    }

    #[test]
    fn figure_spectrum_decomposes_exactly() {
        let lam = [0.001, 0.01, 0.1, 1.0];
        let a = DMatrix::from_diagonal(&dv(&lam));
        let s = decompose(&DenseQuadratic::new(a, DVector::zeros(4)).unwrap()).unwrap();
        assert_eq!(s.eigenvalues(), &lam);
        assert_eq!(s.eigenbasis(), &DMatrix::<f64>::identity(4, 4));
        assert_relative_eq!(s.condition_number(), 1000.0, max_relative = 1e-12);
    }

    #[test]
    fn recovers_rotated_diagonal() {
        let t = std::f64::consts::FRAC_PI_6;
        let r = DMatrix::from_row_slice(2, 2, &[t.cos(), -t.sin(), t.sin(), t.cos()]);
        let a = &r * DMatrix::from_diagonal(&dv(&[1.0, 3.0])) * r.transpose();
        let s = decompose(&DenseQuadratic::new(a.clone(), DVector::zeros(2)).unwrap()).unwrap();
        assert_relative_eq!(s.eigenvalues()[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(s.eigenvalues()[1], 3.0, max_relative = 1e-12);
        // R's columns have positive leading entries already: (cos, sin) and (−sin, cos)
        // so canonicalization flips only the second.
        let v = s.eigenbasis();
        assert_relative_eq!(v[(0, 0)], t.cos(), epsilon = 1e-12);
        assert_relative_eq!(v[(1, 0)], t.sin(), epsilon = 1e-12);
        assert_relative_eq!(v[(0, 1)], t.sin(), epsilon = 1e-12);
        assert_relative_eq!(v[(1, 1)], -t.cos(), epsilon = 1e-12);
        let defect = (v.transpose() * &a * v - DMatrix::from_diagonal(&dv(&[1.0, 3.0]))).amax();
        assert!(defect <= 1e-9 * 3.0);
    }

    #[test]
    fn rejects_asymmetric_and_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        let p = DenseQuadratic::new(a, DVector::zeros(2)).unwrap();
        assert!(matches!(
            decompose(&p),
            Err(ProblemError::NotSymmetric { .. })
        ));

        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let p = DenseQuadratic::new(a, DVector::zeros(2)).unwrap();
        match decompose(&p) {
            Err(ProblemError::NotPositiveDefinite { min_eigenvalue }) => {
                assert_relative_eq!(min_eigenvalue, -1.0, max_relative = 1e-12)
            }
            other => panic!("unexpected {other:?}"),
        }

        let a = DMatrix::from_row_slice(2, 3, &[1.0; 6]);
        assert!(matches!(
            DenseQuadratic::new(a, DVector::zeros(2)),
            Err(ProblemError::NotSquare { rows: 2, cols: 3 })
        ));
    }

    #[test]
    fn synthesize_one_dimensional() {
        let s = synthesize(&[1.0], 123, DVector::zeros(1)).unwrap();
        assert_eq!(s.eigenbasis()[(0, 0)].abs(), 1.0);
        assert_eq!(s.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn synthesize_round_trips_figure_spectrum() {
        let lam = [0.001, 0.01, 0.1, 1.0];
        let s = synthesize(&lam, 42, DVector::zeros(4)).unwrap();
        let back = decompose(&s.to_dense()).unwrap();
        for (a, b) in back.eigenvalues().iter().zip(&lam) {
            assert!((a - b).abs() <= 1e-9 * b);
        }
    }

    #[test]
    fn synthesize_kappa_and_determinism() {
        let s = synthesize(&[1.0, 3.0], 7, DVector::zeros(2)).unwrap();
        assert_eq!(s.condition_number(), 3.0);
        assert_eq!(s, synthesize(&[1.0, 3.0], 7, DVector::zeros(2)).unwrap());
        assert_ne!(s, synthesize(&[1.0, 3.0], 8, DVector::zeros(2)).unwrap());
        assert!(matches!(
            synthesize(&[3.0, 1.0], 7, DVector::zeros(2)),
            Err(ProblemError::BadSpectrum(_))
        ));
        assert!(matches!(
            synthesize(&[0.0, 1.0], 7, DVector::zeros(2)),
            Err(ProblemError::BadSpectrum(_))
        ));
    }

    #[test]
    fn gradient_examples() {
        let p = diag_problem(&[1.0, 1.0], &[0.0, 0.0]);
        assert_eq!(p.gradient(&dv(&[2.0, -1.0])).unwrap(), dv(&[2.0, -1.0]));
        let p = diag_problem(&[1.0, 3.0], &[0.0, 0.0]);
        assert_eq!(p.gradient(&dv(&[1.0, 1.0])).unwrap(), dv(&[1.0, 3.0]));
        let p = diag_problem(&[1.0, 3.0], &[1.0, 0.0]);
        assert_eq!(p.gradient(&dv(&[1.0, 1.0])).unwrap(), dv(&[0.0, 3.0]));
        assert_eq!(
            p.gradient(&dv(&[1.0])),
            Err(ProblemError::DimensionMismatch {
                expected: 2,
                found: 1
            })
        );
    }

    #[test]
    fn coefficient_examples() {
        let p = diag_problem(&[1.0, 2.0], &[0.0, 0.0]);
        assert_eq!(
            p.to_coefficients(&dv(&[0.3, 0.7])).unwrap(),
            dv(&[0.3, 0.7])
        );

        let p = synthesize(&[1.0, 2.0, 5.0, 9.0], 3, DVector::zeros(4)).unwrap();
        let v = p.eigenbasis();
        let g = v.column(0) + v.column(3);
        let d = p.to_coefficients(&g.into_owned()).unwrap();
        let expected = [1.0, 0.0, 0.0, 1.0];
        for (a, b) in d.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_and_objective() {
        let p = diag_problem(&[1.0, 3.0], &[5.0, -2.0]);
        let x = p.apply_inverse(&dv(&[1.0, 3.0])).unwrap();
        assert_relative_eq!(x[0], 1.0);
        assert_relative_eq!(x[1], 1.0);
        // f(x) = ½(1 + 3) − (5 − 2) = −1
        assert_relative_eq!(p.objective(&dv(&[1.0, 1.0])).unwrap(), -1.0);
    }

    #[test]
    fn from_parts_rejects_non_orthogonal() {
        let v = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(matches!(
            SpectralProblem::from_parts(vec![1.0, 2.0], v, DVector::zeros(2)),
            Err(ProblemError::NotOrthogonal { .. })
        ));
    }

    fn spectrum_strategy() -> impl Strategy<Value = Vec<f64>> {
        (1usize..=32, 0.0f64..6.0, any::<u64>()).prop_map(|(n, log_kappa, seed)| {
            let kappa = if n == 1 { 1.0 } else { 10f64.powf(log_kappa) };
            crate::rng::random_spectrum(n, kappa, seed).unwrap()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn decompose_round_trips_synthesized(lam in spectrum_strategy(), seed in any::<u64>()) {
            let n = lam.len();
            let s = synthesize(&lam, seed, DVector::zeros(n)).unwrap();
            prop_assert!(orthogonality_defect(s.eigenbasis()) <= ORTHOGONALITY_TOLERANCE);
            let back = decompose(&s.to_dense()).unwrap();
            for (a, b) in back.eigenvalues().iter().zip(&lam) {
                prop_assert!((a - b).abs() <= 1e-9 * b, "{} vs {}", a, b);
            }
            let v = back.eigenbasis();
            let d = v.transpose() * s.matrix() * v
                - DMatrix::from_diagonal(&DVector::from_column_slice(back.eigenvalues()));
            prop_assert!(d.amax() <= 1e-9 * back.lambda_max());
        }

        #[test]
        fn coefficients_are_isometric(seed in any::<u64>(), n in 1usize..12,
                                      g in proptest::collection::vec(-1e3f64..1e3, 12)) {
            let lam: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            let p = synthesize(&lam, seed, DVector::zeros(n)).unwrap();
            let g = DVector::from_column_slice(&g[..n]);
            let d = p.to_coefficients(&g).unwrap();
            let norm = g.norm();
            prop_assert!((d.norm() - norm).abs() <= 1e-12 * norm.max(f64::MIN_POSITIVE));
            let back = p.from_coefficients(&d).unwrap();
            prop_assert!((back - &g).amax() <= 1e-12 * g.amax().max(f64::MIN_POSITIVE));
        }
    }
}
