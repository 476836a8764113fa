//! Array geometry, far-field steering and the alias-safe microphone pair set.
//!
//! Microphone indices are 0-based everywhere and follow the order of
//! [`ArrayGeometry::mics`].

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of sound in air at 20 °C, m/s.
pub const DEFAULT_SPEED_OF_SOUND: f64 = 343.0;

const MIN_MIC_SEPARATION: f64 = 1e-6;

pub type Position = [f64; 3];

/// Microphone positions in meters, in an array-local Cartesian frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    name: String,
    mics: Vec<Position>,
    speed_of_sound: f64,
}

/// On-disk representation of an [`ArrayGeometry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometryFile {
    #[serde(default)]
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_of_sound: Option<f64>,
    pub mics: Vec<Position>,
}

impl ArrayGeometry {
    pub fn new(name: impl Into<String>, mics: Vec<Position>) -> Result<Self> {
        Self::with_speed_of_sound(name, mics, DEFAULT_SPEED_OF_SOUND)
    }

    pub fn with_speed_of_sound(
        name: impl Into<String>,
        mics: Vec<Position>,
        speed_of_sound: f64,
    ) -> Result<Self> {
        if mics.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "need at least 2 microphones, got {}",
                mics.len()
            )));
        }
        if let Some(i) = mics.iter().position(|m| m.iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidGeometry(format!(
                "microphone {i} has a non-finite coordinate"
            )));
        }
        if !(speed_of_sound.is_finite() && speed_of_sound > 0.0) {
            return Err(Error::InvalidGeometry(format!(
                "speed of sound must be positive, got {speed_of_sound}"
            )));
        }
        for i in 0..mics.len() {
            for j in i + 1..mics.len() {
                if distance(&mics[i], &mics[j]) < MIN_MIC_SEPARATION {
                    return Err(Error::InvalidGeometry(format!(
                        "microphones {i} and {j} coincide"
                    )));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            mics,
            speed_of_sound,
        })
    }

    /// Uniform circular array in the z = 0 plane, first microphone on the +x axis.
    pub fn uniform_circular(count: usize, radius: f64) -> Result<Self> {
        let mics = (0..count)
            .map(|k| {
                let phi = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                [radius * phi.cos(), radius * phi.sin(), 0.0]
            })
            .collect();
        Self::new(format!("uca{count}"), mics)
    }

    pub fn from_file(file: GeometryFile) -> Result<Self> {
        Self::with_speed_of_sound(
            file.name,
            file.mics,
            file.speed_of_sound.unwrap_or(DEFAULT_SPEED_OF_SOUND),
        )
    }

    pub fn to_file(&self) -> GeometryFile {
        GeometryFile {
            name: self.name.clone(),
            speed_of_sound: Some(self.speed_of_sound),
            mics: self.mics.clone(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: GeometryFile = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        Self::from_file(file)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())
            .map_err(|e| Error::parse(path, e))?;
        fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mics(&self) -> &[Position] {
        &self.mics
    }

    pub fn len(&self) -> usize {
        self.mics.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mics.is_empty()
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    pub fn mic_distance(&self, i: usize, j: usize) -> f64 {
        distance(&self.mics[i], &self.mics[j])
    }

    /// True when every microphone shares the same z coordinate.
    pub fn is_horizontal_plane(&self) -> bool {
        let z0 = self.mics[0][2];
        self.mics.iter().all(|m| (m[2] - z0).abs() < MIN_MIC_SEPARATION)
    }
}

pub(crate) fn distance(a: &Position, b: &Position) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Direction of arrival. Azimuth in (-180, 180] degrees measured from +x
/// towards +y, elevation in [-90, 90] degrees above the xy plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    azimuth: f64,
    elevation: f64,
}

impl Direction {
    pub fn new(azimuth: f64, elevation: f64) -> Result<Self> {
        if !(azimuth > -180.0 && azimuth <= 180.0) || !(-90.0..=90.0).contains(&elevation) {
            return Err(Error::InvalidDirection {
                azimuth,
                elevation,
            });
        }
        Ok(Self {
            azimuth,
            elevation,
        })
    }

    /// Wraps the azimuth into (-180, 180]; the elevation must already be valid.
    pub fn wrapped(azimuth: f64, elevation: f64) -> Result<Self> {
        Self::new(wrap_degrees(azimuth), elevation)
    }

    pub fn azimuth(&self) -> f64 {
        self.azimuth
    }

    pub fn elevation(&self) -> f64 {
        self.elevation
    }

    /// Unit propagation vector (cos el cos az, cos el sin az, sin el).
    pub fn unit_vector(&self) -> [f64; 3] {
        let (sa, ca) = self.azimuth.to_radians().sin_cos();
        let (se, ce) = self.elevation.to_radians().sin_cos();
        [ce * ca, ce * sa, se]
    }
}

/// Maps any finite angle in degrees into (-180, 180].
pub fn wrap_degrees(angle: f64) -> f64 {
    let wrapped = (angle + 180.0).rem_euclid(360.0) - 180.0;
    if wrapped <= -180.0 {
        wrapped + 360.0
    } else {
        wrapped
    }
}

/// Far-field delays tau_i = -(m_i . u) / v, seconds, one per microphone.
///
/// Only differences between entries are meaningful.
pub fn steering_delays(geom: &ArrayGeometry, dir: &Direction, speed_of_sound: f64) -> Vec<f64> {
    let u = dir.unit_vector();
    geom.mics
        .iter()
        .map(|m| -(m[0] * u[0] + m[1] * u[1] + m[2] * u[2]) / speed_of_sound)
        .collect()
}

/// Element i is exp(-j omega tau_i).
pub fn steering_vector(delays: &[f64], omega: f64) -> Vec<Complex64> {
    delays
        .iter()
        .map(|&tau| Complex64::from_polar(1.0, -omega * tau))
        .collect()
}

/// Microphone pairs short enough to be free of spatial aliasing up to `f_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pairs: Vec<(usize, usize)>,
    f_max: f64,
    speed_of_sound: f64,
}

impl PairSet {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn f_max(&self) -> f64 {
        self.f_max
    }

    pub fn speed_of_sound(&self) -> f64 {
        self.speed_of_sound
    }

    /// Same pairs in a caller-chosen order. Entries must come from `self`.
    pub fn reordered(&self, order: &[usize]) -> Self {
        Self {
            pairs: order.iter().map(|&k| self.pairs[k]).collect(),
            ..self.clone()
        }
    }
}

/// All pairs (i < j) with inter-microphone distance strictly below v / f_max,
/// in ascending (i, j) order.
pub fn select_pairs(geom: &ArrayGeometry, speed_of_sound: f64, f_max: f64) -> Result<PairSet> {
    if !(speed_of_sound > 0.0 && f_max > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "pair selection needs v > 0 and f_max > 0 (v = {speed_of_sound}, f_max = {f_max})"
        )));
    }
    let threshold = speed_of_sound / f_max;
    let n = geom.len();
    let pairs: Vec<_> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .filter(|&(i, j)| geom.mic_distance(i, j) < threshold)
        .collect();
    if pairs.is_empty() {
        return Err(Error::EmptyPairSet {
            threshold_m: threshold,
        });
    }
    Ok(PairSet {
        pairs,
        f_max,
        speed_of_sound,
    })
}

/// Search grid of candidate directions, shared by both estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct DoaGrid {
    directions: Vec<Direction>,
}

/// How elevations are laid out on a [`DoaGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElevationMode {
    /// Single fixed elevation in degrees.
    Fixed(f64),
    /// -90..=90 at the given step; the poles carry a single azimuth.
    Full { step_deg: f64 },
}

impl DoaGrid {
    pub fn new(directions: Vec<Direction>) -> Result<Self> {
        if directions.is_empty() {
            return Err(Error::InvalidConfig("direction grid is empty".into()));
        }
        Ok(Self { directions })
    }

    /// Azimuths -180 + step, ..., 180 (step 1 gives -179..=180).
    pub fn azimuth_elevation(az_step_deg: f64, elevation: ElevationMode) -> Result<Self> {
        if !(az_step_deg > 0.0 && az_step_deg <= 360.0) {
            return Err(Error::InvalidConfig(format!(
                "azimuth step must be in (0, 360], got {az_step_deg}"
            )));
        }
        let az_count = (360.0 / az_step_deg + 1e-9).floor() as usize;
        let azimuths: Vec<f64> = (1..=az_count)
            .map(|k| -180.0 + k as f64 * az_step_deg)
            .collect();
        let mut directions = Vec::new();
        match elevation {
            ElevationMode::Fixed(el) => {
                for &az in &azimuths {
                    directions.push(Direction::new(az, el)?);
                }
            }
            ElevationMode::Full { step_deg } => {
                if !(step_deg > 0.0 && step_deg <= 180.0) {
                    return Err(Error::InvalidConfig(format!(
                        "elevation step must be in (0, 180], got {step_deg}"
                    )));
                }
                let el_count = (180.0 / step_deg + 1e-9).floor() as usize;
                for k in 0..=el_count {
                    let el = -90.0 + k as f64 * step_deg;
                    if el.abs() >= 90.0 - 1e-9 {
                        directions.push(Direction::new(0.0, el.clamp(-90.0, 90.0))?);
                    } else {
                        for &az in &azimuths {
                            directions.push(Direction::new(az, el)?);
                        }
                    }
                }
            }
        }
        Self::new(directions)
    }

    pub fn directions(&self) -> &[Direction] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }
}
