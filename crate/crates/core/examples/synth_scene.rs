//! Writing a synthetic scene to disk: multichannel WAV, ground-truth CSV and
//! geometry JSON, plus the scene spec the `doa synth` command reads.
//!
//!     cargo run --example synth_scene -- [out_dir]

use std::path::PathBuf;

use doa::geometry::{ArrayGeometry, Direction};
use doa::synth::{synthesize, write_scene, Knot, SceneSpec, SCENE_WAV};
use doa::wav::{read_wav, SampleFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("doa-synth-scene"));

    let geometry = ArrayGeometry::uniform_circular(4, 0.04)?;
    let mut spec = SceneSpec::static_source(&geometry, Direction::new(-90.0, 0.0)?, Some(15.0), 3.0, 16_000.0, 42);
    spec.trajectory.push(Knot {
        time: 3.0,
        azimuth: 0.0,
        elevation: 0.0,
    });
    spec.output_format = SampleFormat::Pcm16;

    let scene = synthesize(&spec)?;
    write_scene(&scene, spec.output_format, &out)?;
    std::fs::write(out.join("scene.json"), serde_json::to_string_pretty(&spec)?)?;

    let audio = read_wav(out.join(SCENE_WAV))?;
    println!(
        "{}: {} channels x {} samples at {} Hz, {} truth frames",
        out.display(),
        audio.channels.len(),
        audio.len(),
        audio.sample_rate,
        scene.truth.len()
    );
    Ok(())
}
