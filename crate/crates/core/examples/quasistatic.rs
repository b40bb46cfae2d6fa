//! Follow the two eigenvalue branches around the loop infinitely slowly:
//! one circuit swaps them, a second brings them back.
//!
//!     cargo run --release --example quasistatic

use ep_encircle::dynamics::quasistatic_track_loops;
use ep_encircle::model::PathSpec;

fn main() -> ep_encircle::Result<()> {
    let path = PathSpec::default();
    for loops in [1, 2] {
        let tr = quasistatic_track_loops(&path, 3600, loops)?;
        let n = tr.theta.len() - 1;
        println!(
            "{loops} loop(s): branch 0 {:.4} -> {:.4}, branch 1 {:.4} -> {:.4}  swapped {} returned {}",
            tr.values[0][0], tr.values[0][n], tr.values[1][0], tr.values[1][n], tr.swapped(), tr.returned()
        );
    }

    // a loop that misses the EP does not swap
    let off = PathSpec { center_g: 2.0, ..path };
    let tr = quasistatic_track_loops(&off, 3600, 1)?;
    println!("loop centred at g = 2: swapped {}", tr.swapped());
    Ok(())
}
