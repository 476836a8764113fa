use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use doa::metrics::{align, ospa_rmse, OspaConfig, Trajectory, DEFAULT_MAX_GAP};
use doa::pipeline::{run, ElevationChoice, GridSpec, MethodSelection, RunConfig};
use doa::synth::{synthesize, write_scene, SceneSpec};

#[derive(Parser)]
#[command(name = "doa", version, about = "Broadband direction-of-arrival estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Music,
    Mccphat,
    Both,
}

#[derive(Subcommand)]
enum Command {
    /// Localize a multichannel recording frame by frame.
    Localize {
        #[arg(long)]
        geometry: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "both")]
        method: MethodArg,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300.0)]
        fmin: f64,
        #[arg(long, default_value_t = 4000.0)]
        fmax: f64,
        #[arg(long, default_value_t = 2048)]
        frame: usize,
        #[arg(long, default_value_t = 1024)]
        hop: usize,
        #[arg(long, default_value_t = 1.0)]
        grid_az_step: f64,
        #[arg(long, default_value_t = 5.0)]
        grid_el_step: f64,
        /// `auto`, `full`, or a fixed elevation in degrees.
        #[arg(long, default_value = "auto")]
        elevation: String,
        #[arg(long, default_value_t = 1)]
        qhat: usize,
        #[arg(long, default_value_t = 8)]
        block: usize,
        /// Drop frames less than this many dB above the running noise floor.
        #[arg(long)]
        gate_db: Option<f64>,
        #[arg(long, default_value_t = 20.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        /// Skip the spatial-spectrum CSV.
        #[arg(long)]
        no_spectrum: bool,
    },
    /// Score an estimated trajectory against ground truth.
    Evaluate {
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long, default_value_t = 20.0)]
        cutoff: f64,
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_GAP)]
        max_gap: f64,
        /// Also write per-frame errors to this CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize a scene: WAV, ground-truth CSV and geometry JSON.
    Synth {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_elevation(text: &str) -> Result<ElevationChoice, String> {
    match text {
        "auto" => Ok(ElevationChoice::Auto),
        "full" => Ok(ElevationChoice::Full),
        other => other
            .parse()
            .map(ElevationChoice::Fixed)
            .map_err(|_| format!("[config] --elevation: expected auto, full or degrees, got {other:?}")),
    }
}

fn execute(command: Command) -> Result<(), String> {
    match command {
        Command::Localize {
            geometry,
            input,
            method,
            truth,
            out,
            fmin,
            fmax,
            frame,
            hop,
            grid_az_step,
            grid_el_step,
            elevation,
            qhat,
            block,
            gate_db,
            cutoff,
            power,
            no_spectrum,
        } => {
            let method = match method {
                MethodArg::Music => MethodSelection::Music,
                MethodArg::Mccphat => MethodSelection::MccPhat,
                MethodArg::Both => MethodSelection::Both,
            };
            let mut config = RunConfig::new(method, geometry, input, out);
            config.truth = truth;
            config.band = (fmin, fmax);
            config.frame_len = frame;
            config.hop = hop;
            config.grid = GridSpec {
                az_step: grid_az_step,
                el_step: grid_el_step,
                elevation: parse_elevation(&elevation)?,
            };
            config.music.qhat = qhat;
            config.music.block = block;
            config.gate_db = gate_db;
            config.ospa = OspaConfig { cutoff, power };
            config.write_spectrum = !no_spectrum;
            let report = run(&config).map_err(|e| e.to_string())?;
            println!(
                "frames: {} total, {} kept, {} gated",
                report.frames_total, report.frames_kept, report.frames_gated
            );
            for m in &report.methods {
                print!("{:>8}: {:.3} s", m.method.as_str(), m.seconds);
                if let Some(ospa) = &m.ospa {
                    print!(
                        ", OSPA azimuth {:.3} deg, elevation {:.3} deg over {} frames",
                        ospa.rmse_azimuth, ospa.rmse_elevation, ospa.frames_scored
                    );
                }
                println!();
            }
            Ok(())
        }
        Command::Evaluate {
            estimate,
            truth,
            cutoff,
            power,
            max_gap,
            out,
        } => {
            let tagged = |stage: &str, e: doa::Error| format!("[{stage}] {e}");
            let estimate = Trajectory::read_csv(&estimate).map_err(|e| tagged("ingest", e))?;
            let truth = Trajectory::read_csv(&truth).map_err(|e| tagged("ingest", e))?;
            let aligned = align(&estimate, &truth, max_gap).map_err(|e| tagged("evaluate", e))?;
            let result = ospa_rmse(&aligned.pairs, &OspaConfig { cutoff, power })
                .map_err(|e| tagged("evaluate", e))?;
            if let Some(path) = out {
                result.write_csv(path).map_err(|e| tagged("output", e))?;
            }
            println!(
                "azimuth {:.6} deg, elevation {:.6} deg, {} frames scored, {} unmatched",
                result.rmse_azimuth, result.rmse_elevation, result.frames_scored, aligned.dropped
            );
            Ok(())
        }
        Command::Synth { spec, out } => {
            let spec = SceneSpec::load(&spec).map_err(|e| format!("[config] {e}"))?;
            let scene = synthesize(&spec).map_err(|e| format!("[synth] {e}"))?;
            write_scene(&scene, spec.output_format, &out).map_err(|e| format!("[output] {e}"))?;
            println!(
                "{} channels, {} samples at {} Hz written to {}",
                scene.channels.len(),
                scene.channels[0].len(),
                scene.sample_rate,
                out.display()
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
