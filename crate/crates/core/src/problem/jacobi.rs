//! Cyclic Jacobi eigendecomposition for small dense symmetric matrices.

use nalgebra::DMatrix;

use super::ProblemError;

/// Off-diagonal Frobenius mass, relative to `‖A‖_F`, below which the sweep loop stops.
pub const OFF_DIAGONAL_THRESHOLD: f64 = 1e-14;

/// Sweep budget before giving up with [`ProblemError::NoConvergence`].
pub const MAX_SWEEPS: usize = 100;

/// Eigenpairs of a symmetric matrix, sorted ascending with sign-canonical columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub sweeps: usize,
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)] * a[(i, j)];
            }
        }
    }
    sum.sqrt()
}

/// Applies `A ← JᵀAJ` and `V ← VJ` for the plane rotation that annihilates `A[p,q]`.
fn rotate(a: &mut DMatrix<f64>, v: &mut DMatrix<f64>, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let phi = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = if phi >= 0.0 {
        1.0 / (phi + (phi * phi + 1.0).sqrt())
    } else {
        -1.0 / (-phi + (phi * phi + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let n = a.nrows();

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flips each column so that its first non-negligible component is positive.
pub(crate) fn canonicalize_signs(v: &mut DMatrix<f64>) {
    for j in 0..v.ncols() {
        let lead = v.column(j).iter().copied().find(|x| x.abs() > 1e-12);
        if matches!(lead, Some(x) if x < 0.0) {
            v.column_mut(j).neg_mut();
        }
    }
}

/// Diagonalizes the symmetric part of `a` by cyclic Jacobi sweeps.
///
/// The caller is responsible for checking symmetry; only `(A + Aᵀ)/2` is used here.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen, ProblemError> {
    let n = a.nrows();
    let mut work = (a + a.transpose()) * 0.5;
    let mut vectors = DMatrix::<f64>::identity(n, n);
    let threshold = OFF_DIAGONAL_THRESHOLD * work.norm();

    let mut sweeps = 0;
    while off_diagonal_norm(&work) > threshold {
        if sweeps == MAX_SWEEPS {
            return Err(ProblemError::NoConvergence { sweeps });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                rotate(&mut work, &mut vectors, p, q);
            }
        }
        sweeps += 1;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| work[(i, i)].total_cmp(&work[(j, j)]));
    let values = order.iter().map(|&i| work[(i, i)]).collect();
    let mut sorted = DMatrix::<f64>::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted.set_column(dst, &vectors.column(src));
    }
    canonicalize_signs(&mut sorted);

    Ok(SymmetricEigen {
        values,
        vectors: sorted,
        sweeps,
    })
}
