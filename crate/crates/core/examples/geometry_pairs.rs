//! Array geometry, far-field delays and alias-safe pair selection.
//!
//!     cargo run --example geometry_pairs

use doa::geometry::{select_pairs, steering_delays, ArrayGeometry, Direction};

fn main() -> doa::Result<()> {
    let geometry = ArrayGeometry::uniform_circular(8, 0.05)?;
    println!("{} microphones, v = {} m/s", geometry.len(), geometry.speed_of_sound());

    let dir = Direction::new(60.0, 0.0)?;
    let tau = steering_delays(&geometry, &dir, geometry.speed_of_sound());
    for (i, t) in tau.iter().enumerate() {
        println!("  mic {i}: tau = {:+8.2} us", t * 1e6);
    }

    // a pair is kept only if it is shorter than one wavelength at f_max
    for f_max in [2000.0, 4000.0, 8000.0] {
        match select_pairs(&geometry, geometry.speed_of_sound(), f_max) {
            Ok(pairs) => println!("f_max {f_max:>6} Hz: {:2} pairs {:?}", pairs.len(), pairs.pairs()),
            Err(e) => println!("f_max {f_max:>6} Hz: {e}"),
        }
    }
    Ok(())
}
