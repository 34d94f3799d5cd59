//! Feasible-anchor fraction and mean anchor energy as ε halves.
//!
//! cargo run --release --example anchor_diagnostics -- crack_vertical 64

use std::time::Instant;

use gbd_slice::anchor::{anchor_diagnostics, AnchorOptions};
use gbd_slice::generators::{build_field, corpus_spec};
use gbd_slice::slicing::{lambda_v, Quadrature};
use gbd_slice::{DirectionSet, Displacement};

fn main() -> gbd_slice::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "crack_vertical".into());
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(32);
    let field = build_field(&corpus_spec(&name)?)?;
    let dirs = DirectionSet::canonical(field.dim());
    let energies = lambda_v(&field, &dirs, &Quadrature::default(), 1.0)?;
    println!("{name}: M = {:.6}", energies.m());
    println!(
        "{:>8} {:>10} {:>12} {:>12} {:>8}",
        "eps", "feasible", "mean_energy", "mean_phi", "secs"
    );
    let opts = AnchorOptions {
        n_candidates: n,
        ..AnchorOptions::default()
    };
    for eps in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0] {
        let start = Instant::now();
        let diags = anchor_diagnostics(&field, eps, &dirs, &energies, &opts)?;
        let feasible = diags.iter().filter(|d| d.feasible()).count() as f64 / n as f64;
        let mean_e = diags.iter().map(|d| d.energy_avg).sum::<f64>() / n as f64;
        println!(
            "{eps:>8.5} {feasible:>10.3} {mean_e:>12.6} {:>12.6} {:>8.2}",
            diags[0].mean_phi,
            start.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
