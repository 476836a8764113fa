//! Scoring an estimated trajectory against ground truth.
//!
//!     cargo run --example ospa_evaluation

use doa::metrics::{align, ospa_rmse, OspaConfig, Trajectory, TrajectoryEntry, DEFAULT_MAX_GAP};

fn main() -> doa::Result<()> {
    // truth sweeps from 170° across the ±180° seam to -170°
    let truth = Trajectory::new(
        (0..=10)
            .map(|k| TrajectoryEntry::valid(k as f64 * 0.1, doa::geometry::wrap_degrees(170.0 + 2.0 * k as f64), 0.0))
            .collect(),
    )?;
    // estimates on a different clock, one outlier and one gated frame
    let estimate = Trajectory::new(vec![
        TrajectoryEntry::valid(0.05, 172.0, 1.0),
        TrajectoryEntry::valid(0.25, 175.0, 0.0),
        TrajectoryEntry::invalid(0.45),
        TrajectoryEntry::valid(0.65, 90.0, 0.0),
        TrajectoryEntry::valid(0.85, -172.0, -2.0),
    ])?;

    let aligned = align(&estimate, &truth, DEFAULT_MAX_GAP)?;
    for p in &aligned.pairs {
        println!(
            "t = {:.2}: estimate {:7.1}°, truth {:7.1}°",
            p.time, p.estimate_azimuth, p.truth_azimuth
        );
    }
    for cutoff in [20.0, 1e6] {
        let r = ospa_rmse(&aligned.pairs, &OspaConfig { cutoff, power: 2.0 })?;
        println!(
            "cutoff {cutoff:>9}: azimuth {:.3}°, elevation {:.3}° over {} frames",
            r.rmse_azimuth, r.rmse_elevation, r.frames_scored
        );
    }
    Ok(())
}
