//! Batch localization: WAV in, per-frame DOA trajectories, spectra, OSPA
//! scores and plots out.

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use log::info;

use crate::error::Error;
use crate::gate::energy_gate;
use crate::geometry::{select_pairs, ArrayGeometry, DoaGrid, ElevationMode, PairSet};
use crate::mccphat::{MccPhatConfig, MccPhatEstimator};
use crate::metrics::{align, ospa_rmse, OspaConfig, OspaResult, Trajectory, TrajectoryEntry};
use crate::plot::azimuth_svg;
use crate::spatial::{Method, SpatialSpectrum};
use crate::spectral::{stft, SpectralFrame, StftConfig, Window};
use crate::subspace::{MusicConfig, MusicEstimator};
use crate::wav::read_wav;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodSelection {
    Music,
    MccPhat,
    Both,
}

impl MethodSelection {
    pub fn methods(self) -> Vec<Method> {
        match self {
            MethodSelection::Music => vec![Method::Music],
            MethodSelection::MccPhat => vec![Method::MccPhat],
            MethodSelection::Both => vec![Method::Music, Method::MccPhat],
        }
    }
}

/// Elevation layout of the search grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElevationChoice {
    /// Fixed 0° for arrays lying in a horizontal plane, full sphere otherwise.
    Auto,
    Fixed(f64),
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub az_step: f64,
    pub el_step: f64,
    pub elevation: ElevationChoice,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            az_step: 1.0,
            el_step: 5.0,
            elevation: ElevationChoice::Auto,
        }
    }
}

impl GridSpec {
    pub fn build(&self, geom: &ArrayGeometry) -> crate::Result<DoaGrid> {
        let mode = match self.elevation {
            ElevationChoice::Fixed(el) => ElevationMode::Fixed(el),
            ElevationChoice::Full => ElevationMode::Full {
                step_deg: self.el_step,
            },
            ElevationChoice::Auto if geom.is_horizontal_plane() => ElevationMode::Fixed(0.0),
            ElevationChoice::Auto => ElevationMode::Full {
                step_deg: self.el_step,
            },
        };
        DoaGrid::azimuth_elevation(self.az_step, mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub method: MethodSelection,
    pub geometry: PathBuf,
    pub input: PathBuf,
    pub truth: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    pub band: (f64, f64),
    pub grid: GridSpec,
    pub music: MusicConfig,
    pub mccphat: MccPhatConfig,
    /// Energy gate threshold in dB above the noise floor; `None` keeps every frame.
    pub gate_db: Option<f64>,
    pub ospa: OspaConfig,
    pub max_gap: f64,
    /// Write the per-frame spatial spectra as CSV.
    pub write_spectrum: bool,
}

impl RunConfig {
    pub fn new(
        method: MethodSelection,
        geometry: impl Into<PathBuf>,
        input: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let stft = StftConfig::default();
        Self {
            method,
            geometry: geometry.into(),
            input: input.into(),
            truth: None,
            out_dir: out_dir.into(),
            frame_len: stft.frame_len,
            hop: stft.hop,
            window: stft.window,
            band: stft.band,
            grid: GridSpec::default(),
            music: MusicConfig::default(),
            mccphat: MccPhatConfig::default(),
            gate_db: None,
            ospa: OspaConfig::default(),
            max_gap: crate::metrics::DEFAULT_MAX_GAP,
            write_spectrum: true,
        }
    }

    pub fn stft(&self, sample_rate: f64) -> StftConfig {
        StftConfig {
            frame_len: self.frame_len,
            hop: self.hop,
            window: self.window,
            sample_rate,
            band: self.band,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Stft,
    Gate,
    Estimate(Method),
    Evaluate,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stage::Config => f.write_str("config"),
            Stage::Ingest => f.write_str("ingest"),
            Stage::Stft => f.write_str("stft"),
            Stage::Gate => f.write_str("gate"),
            Stage::Estimate(m) => write!(f, "estimate:{m}"),
            Stage::Evaluate => f.write_str("evaluate"),
            Stage::Output => f.write_str("output"),
        }
    }
}

/// A library error tagged with the pipeline stage (and frame) it came from.
#[derive(Debug)]
pub struct RunError {
    pub stage: Stage,
    pub frame: Option<usize>,
    pub source: Error,
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.frame {
            Some(k) => write!(f, "[{}] frame {k}: {}", self.stage, self.source),
            None => write!(f, "[{}] {}", self.stage, self.source),
        }
    }
}

impl std::error::Error for RunError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T, RunError>;
}

impl<T> AtStage<T> for crate::Result<T> {
    fn at(self, stage: Stage) -> Result<T, RunError> {
        self.map_err(|source| RunError {
            stage,
            frame: None,
            source,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodReport {
    pub method: Method,
    pub trajectory: Trajectory,
    /// Wall-clock time of the estimator over all frames.
    pub seconds: f64,
    pub ospa: Option<OspaResult>,
    /// Estimates with no truth sample within `max_gap`.
    pub unmatched: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub methods: Vec<MethodReport>,
    pub frames_total: usize,
    pub frames_kept: usize,
    pub frames_gated: usize,
    pub sample_rate: f64,
}

impl RunReport {
    pub fn method(&self, method: Method) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == method)
    }
}

/// Output file names inside `out_dir`.
pub fn trajectory_file(method: Method) -> String {
    format!("trajectory_{method}.csv")
}

pub fn spectrum_file(method: Method) -> String {
    format!("spectrum_{method}.csv")
}

pub fn ospa_file(method: Method) -> String {
    format!("ospa_{method}.csv")
}

pub const PLOT_FILE: &str = "azimuth.svg";
pub const SUMMARY_FILE: &str = "summary.json";

struct Prepared {
    geometry: ArrayGeometry,
    pairs: Option<PairSet>,
    truth: Option<Trajectory>,
}

/// Everything that can be checked without touching the audio.
fn prepare(config: &RunConfig) -> crate::Result<Prepared> {
    let probe = config.stft(2.0 * config.band.1.max(1.0));
    probe.validate()?;
    if config.music.block == 0 {
        return Err(Error::InvalidConfig("covariance block must be >= 1".into()));
    }
    if !(config.max_gap >= 0.0) {
        return Err(Error::InvalidConfig("max_gap must be >= 0".into()));
    }
    config.ospa.validate()?;
    let geometry = ArrayGeometry::load(&config.geometry)?;
    let methods = config.method.methods();
    if methods.contains(&Method::Music)
        && (config.music.qhat == 0 || config.music.qhat >= geometry.len())
    {
        return Err(Error::InvalidSourceCount {
            qhat: config.music.qhat,
            mics: geometry.len(),
        });
    }
    config.grid.build(&geometry)?;
    let pairs = if methods.contains(&Method::MccPhat) {
        Some(select_pairs(
            &geometry,
            geometry.speed_of_sound(),
            config.band.1,
        )?)
    } else {
        None
    };
    let truth = config
        .truth
        .as_ref()
        .map(Trajectory::read_csv)
        .transpose()?;
    if !config.input.is_file() {
        return Err(Error::io(
            &config.input,
            std::io::Error::new(std::io::ErrorKind::NotFound, "input WAV not found"),
        ));
    }
    Ok(Prepared {
        geometry,
        pairs,
        truth,
    })
}

/// Runs ingest, STFT, gate, the selected estimators and evaluation, and
/// writes all outputs. Each estimator's trajectory is written as soon as it
/// is complete.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let Prepared {
        geometry,
        pairs,
        truth,
    } = prepare(config).at(Stage::Config)?;
    fs::create_dir_all(&config.out_dir)
        .map_err(|e| Error::io(&config.out_dir, e))
        .at(Stage::Config)?;

    let audio = read_wav(&config.input).at(Stage::Ingest)?;
    if audio.channels.len() != geometry.len() {
        return Err(Error::InvalidConfig(format!(
            "{} has {} channels, geometry has {} microphones",
            config.input.display(),
            audio.channels.len(),
            geometry.len()
        )))
        .at(Stage::Ingest);
    }
    let stft_cfg = config.stft(audio.sample_rate as f64);
    let frames = stft(&audio.channels, &stft_cfg).at(Stage::Stft)?;
    let keep = match config.gate_db {
        Some(db) => energy_gate(&frames, &stft_cfg, db),
        None => vec![true; frames.len()],
    };
    let frames_kept = keep.iter().filter(|&&k| k).count();
    info!(
        "{} frames, {} kept after gating",
        frames.len(),
        frames_kept
    );
    if frames_kept == 0 {
        return Err(Error::InvalidConfig("every frame was gated".into())).at(Stage::Gate);
    }

    let grid = Arc::new(config.grid.build(&geometry).at(Stage::Config)?);
    let mut reports = Vec::new();
    for method in config.method.methods() {
        let stage = Stage::Estimate(method);
        let started = Instant::now();
        let spectra = match method {
            Method::Music => {
                let estimator =
                    MusicEstimator::new(&geometry, grid.clone(), stft_cfg, config.music)
                        .at(stage)?;
                estimate_frames(&frames, &keep, |k| estimator.spectrum(&frames, k), stage)?
            }
            Method::MccPhat => {
                let pairs = pairs.clone().expect("pair set is prepared for MCC-PHAT");
                let estimator = MccPhatEstimator::new(
                    &geometry,
                    pairs,
                    grid.clone(),
                    stft_cfg,
                    config.mccphat,
                )
                .at(stage)?;
                estimate_frames(&frames, &keep, |k| Ok(estimator.spectrum(&frames[k])), stage)?
            }
        };
        let seconds = started.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
        let trajectory = to_trajectory(&frames, &spectra).at(stage)?;
        trajectory
            .write_csv(config.out_dir.join(trajectory_file(method)))
            .at(Stage::Output)?;
        if config.write_spectrum {
            write_spectra(&config.out_dir.join(spectrum_file(method)), &frames, &spectra)
                .at(Stage::Output)?;
        }
        info!("{method}: {} frames in {seconds:.3} s", frames_kept);
        reports.push(MethodReport {
            method,
            trajectory,
            seconds,
            ospa: None,
            unmatched: 0,
        });
    }

    if let Some(truth) = &truth {
        for report in &mut reports {
            let aligned = align(&report.trajectory, truth, config.max_gap).at(Stage::Evaluate)?;
            let ospa = ospa_rmse(&aligned.pairs, &config.ospa).at(Stage::Evaluate)?;
            ospa.write_csv(config.out_dir.join(ospa_file(report.method)))
                .at(Stage::Output)?;
            report.ospa = Some(ospa);
            report.unmatched = aligned.dropped;
        }
    }

    let series: Vec<(&str, &Trajectory)> = reports
        .iter()
        .map(|r| (r.method.as_str(), &r.trajectory))
        .collect();
    let svg = azimuth_svg(&series, truth.as_ref());
    let plot = config.out_dir.join(PLOT_FILE);
    fs::write(&plot, svg)
        .map_err(|e| Error::io(&plot, e))
        .at(Stage::Output)?;

    let report = RunReport {
        methods: reports,
        frames_total: frames.len(),
        frames_kept,
        frames_gated: frames.len() - frames_kept,
        sample_rate: audio.sample_rate as f64,
    };
    write_summary(&config.out_dir.join(SUMMARY_FILE), &report).at(Stage::Output)?;
    Ok(report)
}

fn estimate_frames(
    frames: &[SpectralFrame],
    keep: &[bool],
    mut spectrum: impl FnMut(usize) -> crate::Result<SpatialSpectrum>,
    stage: Stage,
) -> Result<Vec<Option<SpatialSpectrum>>, RunError> {
    (0..frames.len())
        .map(|k| {
            if !keep[k] {
                return Ok(None);
            }
            spectrum(k).map(Some).map_err(|source| RunError {
                stage,
                frame: Some(k),
                source,
            })
        })
        .collect()
}

fn to_trajectory(
    frames: &[SpectralFrame],
    spectra: &[Option<SpatialSpectrum>],
) -> crate::Result<Trajectory> {
    let entries = frames
        .iter()
        .zip(spectra)
        .map(|(frame, spectrum)| match spectrum {
            Some(s) => {
                let d = s.peak_direction();
                TrajectoryEntry::valid(frame.time, d.azimuth(), d.elevation())
            }
            None => TrajectoryEntry::invalid(frame.time),
        })
        .collect();
    Trajectory::new(entries)
}

/// Long-format heat-map data: `frame,time_s,azimuth_deg,elevation_deg,ln_score`.
fn write_spectra(
    path: &Path,
    frames: &[SpectralFrame],
    spectra: &[Option<SpatialSpectrum>],
) -> crate::Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        writeln!(out, "frame,time_s,azimuth_deg,elevation_deg,ln_score")?;
        for (frame, spectrum) in frames.iter().zip(spectra) {
            let Some(s) = spectrum else { continue };
            for (d, score) in s.grid.directions().iter().zip(&s.log_scores) {
                writeln!(
                    out,
                    "{},{:.6},{},{},{:.9}",
                    frame.frame_index,
                    frame.time,
                    d.azimuth(),
                    d.elevation(),
                    score
                )?;
            }
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

fn write_summary(path: &Path, report: &RunReport) -> crate::Result<()> {
    let methods: Vec<serde_json::Value> = report
        .methods
        .iter()
        .map(|m| {
            let mut entry = serde_json::json!({
                "method": m.method.as_str(),
                "trajectory": trajectory_file(m.method),
                "valid_frames": m.trajectory.valid_count(),
            });
            if let Some(ospa) = &m.ospa {
                entry["rmse_azimuth_deg"] = ospa.rmse_azimuth.into();
                entry["rmse_elevation_deg"] = ospa.rmse_elevation.into();
                entry["frames_scored"] = ospa.frames_scored.into();
                entry["unmatched"] = m.unmatched.into();
            }
            entry
        })
        .collect();
    let summary = serde_json::json!({
        "frames_total": report.frames_total,
        "frames_kept": report.frames_kept,
        "frames_gated": report.frames_gated,
        "sample_rate": report.sample_rate,
        "methods": methods,
    });
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::parse(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
