//! Discrete Korn constant by generalized eigenproblem and by random search.
//!
//! cargo run --release --example korn_constant

use gbd_slice::interpolation::{korn_constant, KornMethod, KornOptions};

fn main() -> gbd_slice::Result<()> {
    let opts = KornOptions::default();
    for d in [2, 3] {
        let eig = korn_constant(d, 2.0, KornMethod::Eig, &opts)?;
        println!(
            "d={d} p=2 eig     C = {:.6} (quotient dim {})",
            eig.constant, eig.quotient_dim
        );
    }
    let search = korn_constant(2, 2.0, KornMethod::Search, &opts)?;
    println!(
        "d=2 p=2 search  C = {:.6} (best start {:.6})",
        search.constant, search.lower_bound
    );
    for p in [1.0, 1.5, 3.0] {
        let s = korn_constant(
            2,
            p,
            KornMethod::Search,
            &KornOptions {
                starts: 50,
                ..opts.clone()
            },
        )?;
        println!("d=2 p={p} search C ≈ {:.6}", s.constant);
    }
    Ok(())
}
