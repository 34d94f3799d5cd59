//! Picking a rotated direction set whose total energy is below average.
//!
//! cargo run --release --example rotation_selection -- 16

use gbd_slice::generators::{build_field, corpus_spec};
use gbd_slice::slicing::{rotated_unit_directions, select_rotation, Quadrature};

fn main() -> gbd_slice::Result<()> {
    let n: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(16);
    let u = build_field(&corpus_spec("crack_tilted")?)?;
    let quad = Quadrature {
        delta: 1e-2,
        ..Quadrature::default()
    };
    let choice = select_rotation(&u, n, 7, &quad)?;
    println!("mean over {n} rotations: {:.6}", choice.mean);
    println!("chosen value:            {:.6}", choice.value);
    for xi in rotated_unit_directions(&choice.rotation) {
        println!("  direction {:?}", xi);
    }
    Ok(())
}
