//! Directional slice energies of a corpus field next to the exact oracle.
//!
//! cargo run --release --example slice_energy -- crack_tilted

use gbd_slice::generators::{build_field, corpus_spec, exact_lambda};
use gbd_slice::slicing::{lambda_v, Quadrature, SlicePath};
use gbd_slice::{DirectionSet, Displacement};

fn main() -> gbd_slice::Result<()> {
    let name = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "crack_tilted".into());
    let spec = corpus_spec(&name)?;
    let field = build_field(&spec)?;
    let dirs = DirectionSet::canonical(field.dim());
    println!("{name}");
    println!(
        "{:>12} {:>10} {:>10} {:>10}",
        "xi", "sampled", "exact", "oracle"
    );
    let sampled = lambda_v(
        &field,
        &dirs,
        &Quadrature {
            path: SlicePath::Sampled,
            ..Quadrature::default()
        },
        1.0,
    )?;
    let exact = lambda_v(
        &field,
        &dirs,
        &Quadrature {
            path: SlicePath::Exact,
            ..Quadrature::default()
        },
        1.0,
    )?;
    for ((s, e), dir) in sampled
        .entries
        .iter()
        .zip(&exact.entries)
        .zip(dirs.directions())
    {
        let oracle = exact_lambda(&spec, &dir.xi, dir.threshold, 1.0)?.lambda;
        println!(
            "{:>12} {:>10.6} {:>10.6} {:>10.6}",
            format!("{:?}", dir.xi),
            s.lambda,
            e.lambda,
            oracle
        );
    }
    println!(
        "Lambda^V = {:.6}   M = {:.6}",
        sampled.lambda_v(),
        sampled.m()
    );
    Ok(())
}
