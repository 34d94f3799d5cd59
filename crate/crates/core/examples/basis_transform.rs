//! Moving a field to a skewed basis and comparing slice energies.
//!
//! cargo run --release --example basis_transform

use gbd_slice::field_model::pullback_weight;
use gbd_slice::generators::{build_field, corpus_spec};
use gbd_slice::slicing::{lambda_xi, Quadrature};
use gbd_slice::{linalg::mat_vec, transform_basis};
use nalgebra::DMatrix;

fn main() -> gbd_slice::Result<()> {
    let u = build_field(&corpus_spec("crack_tilted")?)?;
    let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.4, 0.0, 1.0]);
    let (v, cond) = transform_basis(&u, &a)?;
    println!("condition number {cond:.4}");
    let quad = Quadrature {
        delta: 1e-3,
        ..Quadrature::default()
    };
    for xi in [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]] {
        let moved = lambda_xi(&v, &xi, &quad, 1.0, 1.0)?.lambda;
        let inv = a.clone().try_inverse().expect("invertible");
        let back = mat_vec(&inv, &xi);
        let original = lambda_xi(&u, &back, &quad, 1.0, 1.0)?.lambda;
        // change of variables: Λ^{A⁻¹ξ}_u = w(A⁻¹, ξ) Λ^ξ_v
        let w = pullback_weight(&inv, &xi);
        println!(
            "xi={xi:?}: w·Λ_v = {:.6}, Λ_u along A^-1 xi = {original:.6}",
            w * moved
        );
    }
    Ok(())
}
