//! Anchored cube approximants as ε halves: energy, bad set and discrepancy.
//!
//! cargo run --release --example approximant_sweep -- crack_rotating 2

use gbd_slice::approximant::{convergence_sweep, SweepOptions};
use gbd_slice::generators::{build_field, corpus_spec};
use gbd_slice::{DirectionSet, Displacement};

fn main() -> gbd_slice::Result<()> {
    let mut args = std::env::args().skip(1);
    let name = args.next().unwrap_or_else(|| "crack_vertical".into());
    let p: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let field = build_field(&corpus_spec(&name)?)?;
    let dirs = DirectionSet::canonical(field.dim());
    let eps = [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0];
    let rows = convergence_sweep(&field, &eps, &dirs, p, &SweepOptions::default())?;
    println!("{name}, p = {p}");
    println!(
        "{:>9} {:>10} {:>10} {:>10} {:>6} {:>8} {:>11}",
        "eps", "energy", "perimeter", "|B|", "bad", "ratio", "discrepancy"
    );
    for r in &rows {
        let e = &r.report;
        println!(
            "{:>9.6} {:>10.5} {:>10.5} {:>10.5} {:>6} {:>8.4} {:>11.5}",
            e.eps, e.energy, e.perimeter, e.bad_volume, e.bad_count, e.ratio, r.discrepancy
        );
    }
    Ok(())
}
