//! Build a quadratic from a dense Hessian, inspect its spectrum, and go back and forth
//! between gradients and eigen-coefficients.

use bbdyn::problem::{decompose, synthesize, DenseQuadratic};
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 2.0]);
    let c = DVector::from_vec(vec![1.0, -1.0, 0.5]);
    let p = decompose(&DenseQuadratic::new(a, c)?)?;
    println!("eigenvalues: {:?}", p.eigenvalues());
    println!("κ = {:.6}", p.condition_number());

    let x = DVector::from_vec(vec![0.3, 0.2, 0.1]);
    let g = p.gradient(&x)?;
    let d = p.to_coefficients(&g)?;
    println!("g = {:?}", g.as_slice());
    println!("d = Vᵀg = {:?}", d.as_slice());
    println!("‖V d − g‖ = {:.2e}", (p.from_coefficients(&d)? - g).norm());

    // The same spectrum in a seeded random basis.
    let q = synthesize(p.eigenvalues(), 7, DVector::zeros(3))?;
    println!(
        "random basis, seed 7: ‖A − Aᵀ‖ = {:.2e}",
        (q.matrix() - q.matrix().transpose()).norm()
    );
    Ok(())
}
