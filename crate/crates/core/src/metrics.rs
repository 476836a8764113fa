//! Angular errors, trajectory alignment and single-target OSPA.
//!
//! With one estimate and one truth per frame there is no assignment and no
//! cardinality term: the per-frame OSPA distance is the angular error clamped
//! at the cutoff, and the aggregate is the power mean of those distances.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::wrap_degrees;

/// Absolute angular difference in degrees. Circular differences wrap through
/// +-180 and lie in [0, 180].
pub fn angular_error(a: f64, b: f64, circular: bool) -> f64 {
    let diff = (a - b).abs();
    if circular {
        let d = diff.rem_euclid(360.0);
        d.min(360.0 - d)
    } else {
        diff
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryEntry {
    pub time: f64,
    pub azimuth: f64,
    pub elevation: f64,
    /// False for frames without an estimate; the angles carry no meaning.
    pub valid: bool,
}

impl TrajectoryEntry {
    pub fn valid(time: f64, azimuth: f64, elevation: f64) -> Self {
        Self {
            time,
            azimuth,
            elevation,
            valid: true,
        }
    }

    pub fn invalid(time: f64) -> Self {
        Self {
            time,
            azimuth: f64::NAN,
            elevation: f64::NAN,
            valid: false,
        }
    }
}

/// Time-ordered DOA estimates (or ground truth).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    entries: Vec<TrajectoryEntry>,
}

impl Trajectory {
    pub fn new(entries: Vec<TrajectoryEntry>) -> Result<Self> {
        for (k, w) in entries.windows(2).enumerate() {
            if !(w[1].time > w[0].time) {
                return Err(Error::InvalidTrajectory(format!(
                    "timestamps must increase strictly (entry {})",
                    k + 1
                )));
            }
        }
        for (k, e) in entries.iter().enumerate() {
            if !e.time.is_finite() {
                return Err(Error::InvalidTrajectory(format!("entry {k}: time not finite")));
            }
            if e.valid
                && !(e.azimuth > -180.0
                    && e.azimuth <= 180.0
                    && (-90.0..=90.0).contains(&e.elevation))
            {
                return Err(Error::InvalidTrajectory(format!(
                    "entry {k}: angles ({}, {}) out of range",
                    e.azimuth, e.elevation
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[TrajectoryEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.entries.iter().filter(|e| e.valid).count()
    }

    /// Reads `time_s,azimuth_deg,elevation_deg[,valid]`. Rows whose `valid`
    /// column is 0 become invalid entries; a missing column means valid.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::parse(path, e))?;
        let headers = reader.headers().map_err(|e| Error::parse(path, e))?.clone();
        let column = |name: &str| headers.iter().position(|h| h == name);
        let (Some(t), Some(az), Some(el)) = (
            column("time_s"),
            column("azimuth_deg"),
            column("elevation_deg"),
        ) else {
            return Err(Error::parse(
                path,
                "header must contain time_s, azimuth_deg, elevation_deg",
            ));
        };
        let valid_col = column("valid");
        let mut entries = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::parse(path, e))?;
            let field = |k: usize| record.get(k).unwrap_or("");
            let number = |k: usize| -> Result<f64> {
                field(k).parse::<f64>().map_err(|e| {
                    Error::parse(path, format!("row {}: {:?}: {e}", line + 2, field(k)))
                })
            };
            let valid = match valid_col {
                Some(k) => !matches!(field(k), "0" | "false"),
                None => true,
            };
            let time = number(t)?;
            entries.push(if valid {
                TrajectoryEntry::valid(time, number(az)?, number(el)?)
            } else {
                TrajectoryEntry::invalid(time)
            });
        }
        Self::new(entries).map_err(|e| Error::parse(path, e))
    }

    /// Writes `time_s,azimuth_deg,elevation_deg,valid`; invalid rows leave
    /// the angles empty.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("time_s,azimuth_deg,elevation_deg,valid\n");
        for e in &self.entries {
            if e.valid {
                out += &format!("{:.6},{:.6},{:.6},1\n", e.time, e.azimuth, e.elevation);
            } else {
                out += &format!("{:.6},,,0\n", e.time);
            }
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    /// Writes a ground-truth file, `time_s,azimuth_deg,elevation_deg`.
    pub fn write_truth_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("time_s,azimuth_deg,elevation_deg\n");
        for e in self.entries.iter().filter(|e| e.valid) {
            out += &format!("{:.6},{:.6},{:.6}\n", e.time, e.azimuth, e.elevation);
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// An estimate paired with the truth interpolated at its timestamp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPair {
    pub time: f64,
    pub estimate_azimuth: f64,
    pub estimate_elevation: f64,
    pub truth_azimuth: f64,
    pub truth_elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub pairs: Vec<MatchedPair>,
    /// Valid estimates with no truth sample within `max_gap`.
    pub dropped: usize,
}

/// Default tolerance between an estimate and its nearest truth sample.
pub const DEFAULT_MAX_GAP: f64 = 0.1;

/// Pairs each valid estimate with truth interpolated at its timestamp
/// (azimuth along the shorter arc). Outside the truth span the nearest end
/// sample is used.
pub fn align(estimate: &Trajectory, truth: &Trajectory, max_gap: f64) -> Result<Alignment> {
    let knots: Vec<&TrajectoryEntry> = truth.entries.iter().filter(|e| e.valid).collect();
    let mut pairs = Vec::new();
    let mut dropped = 0;
    for e in estimate.entries.iter().filter(|e| e.valid) {
        let after = knots.partition_point(|k| k.time < e.time);
        let nearest_gap = [after.checked_sub(1), Some(after)]
            .into_iter()
            .flatten()
            .filter_map(|k| knots.get(k))
            .map(|k| (k.time - e.time).abs())
            .fold(f64::INFINITY, f64::min);
        if nearest_gap > max_gap {
            dropped += 1;
            continue;
        }
        let (az, el) = if after == 0 {
            (knots[0].azimuth, knots[0].elevation)
        } else if after == knots.len() {
            let last = knots[knots.len() - 1];
            (last.azimuth, last.elevation)
        } else {
            let (a, b) = (knots[after - 1], knots[after]);
            let frac = (e.time - a.time) / (b.time - a.time);
            let az = wrap_degrees(a.azimuth + frac * wrap_degrees(b.azimuth - a.azimuth));
            (az, a.elevation + frac * (b.elevation - a.elevation))
        };
        pairs.push(MatchedPair {
            time: e.time,
            estimate_azimuth: e.azimuth,
            estimate_elevation: e.elevation,
            truth_azimuth: az,
            truth_elevation: el,
        });
    }
    if pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    Ok(Alignment { pairs, dropped })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OspaConfig {
    /// Cutoff c in degrees.
    pub cutoff: f64,
    /// Order p.
    pub power: f64,
}

impl Default for OspaConfig {
    fn default() -> Self {
        Self {
            cutoff: 20.0,
            power: 2.0,
        }
    }
}

impl OspaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.cutoff > 0.0) || !(self.power >= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "OSPA needs cutoff > 0 and power >= 1 (got c = {}, p = {})",
                self.cutoff, self.power
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameError {
    pub time: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OspaResult {
    /// Errors after clamping at the cutoff.
    pub per_frame: Vec<FrameError>,
    pub rmse_azimuth: f64,
    pub rmse_elevation: f64,
    pub frames_scored: usize,
}

fn power_mean(values: impl Iterator<Item = f64>, power: f64) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, n), v| (s + v.powf(power), n + 1));
    (sum / count as f64).powf(power.recip())
}

/// Azimuth (circular) and elevation errors clamped at the cutoff, and their
/// order-p means.
pub fn ospa_rmse(pairs: &[MatchedPair], cfg: &OspaConfig) -> Result<OspaResult> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_frame: Vec<FrameError> = pairs
        .iter()
        .map(|p| FrameError {
            time: p.time,
            azimuth: angular_error(p.estimate_azimuth, p.truth_azimuth, true).min(cfg.cutoff),
            elevation: angular_error(p.estimate_elevation, p.truth_elevation, false)
                .min(cfg.cutoff),
        })
        .collect();
    Ok(OspaResult {
        rmse_azimuth: power_mean(per_frame.iter().map(|e| e.azimuth), cfg.power),
        rmse_elevation: power_mean(per_frame.iter().map(|e| e.elevation), cfg.power),
        frames_scored: per_frame.len(),
        per_frame,
    })
}

impl OspaResult {
    /// Writes `kind,time_s,azimuth_error_deg,elevation_error_deg`: one `frame`
    /// row per scored frame, then a single `rmse` row with an empty time.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = String::from("kind,time_s,azimuth_error_deg,elevation_error_deg\n");
        for e in &self.per_frame {
            out += &format!("frame,{:.6},{:.6},{:.6}\n", e.time, e.azimuth, e.elevation);
        }
        out += &format!("rmse,,{:.6},{:.6}\n", self.rmse_azimuth, self.rmse_elevation);
        file.write_all(out.as_bytes())
            .map_err(|e| Error::io(path, e))
    }
}
