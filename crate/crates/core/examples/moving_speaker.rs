//! Full batch run on a moving source: synthesize, localize with both
//! methods, score against truth, and write CSVs, the SVG plot and a summary.
//!
//!     cargo run --release --example moving_speaker -- [out_dir]

use std::path::PathBuf;

use doa::geometry::{ArrayGeometry, Direction};
use doa::pipeline::{run, MethodSelection, RunConfig};
use doa::synth::{synthesize, write_scene, Knot, SceneSpec, SCENE_GEOMETRY, SCENE_TRUTH, SCENE_WAV};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("doa-moving-speaker"));
    let scene_dir = out.join("scene");

    let geometry = ArrayGeometry::uniform_circular(8, 0.05)?;
    let mut spec = SceneSpec::static_source(&geometry, Direction::new(150.0, 0.0)?, Some(10.0), 8.0, 48_000.0, 9);
    spec.trajectory = vec![
        Knot { time: 0.0, azimuth: 150.0, elevation: 0.0 },
        Knot { time: 8.0, azimuth: -120.0, elevation: 0.0 },
    ];
    write_scene(&synthesize(&spec)?, spec.output_format, &scene_dir)?;

    let mut config = RunConfig::new(
        MethodSelection::Both,
        scene_dir.join(SCENE_GEOMETRY),
        scene_dir.join(SCENE_WAV),
        out.join("results"),
    );
    config.truth = Some(scene_dir.join(SCENE_TRUTH));
    let report = run(&config)?;

    println!("{} frames", report.frames_total);
    for m in &report.methods {
        let ospa = m.ospa.as_ref().expect("truth was supplied");
        println!(
            "{:>8}: azimuth OSPA {:.2}°, {:.2} s",
            m.method.as_str(),
            ospa.rmse_azimuth,
            m.seconds
        );
    }
    println!("outputs in {}", out.join("results").display());
    Ok(())
}
