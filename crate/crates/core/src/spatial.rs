use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{Direction, DoaGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Music,
    MccPhat,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Music => "music",
            Method::MccPhat => "mccphat",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Objective value of one estimator over a direction grid, for one frame.
///
/// Scores are kept as natural logarithms of the (strictly positive)
/// objective: the MCC-PHAT product over many pairs overflows or underflows
/// an `f64` long before its logarithm does.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialSpectrum {
    pub grid: Arc<DoaGrid>,
    pub log_scores: Vec<f64>,
    pub frame_index: usize,
    pub method: Method,
}

impl SpatialSpectrum {
    /// Linear objective values; may saturate to 0 or infinity.
    pub fn scores(&self) -> Vec<f64> {
        self.log_scores.iter().map(|s| s.exp()).collect()
    }

    /// Index of the first maximum.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (k, &s) in self.log_scores.iter().enumerate() {
            if s > self.log_scores[best] {
                best = k;
            }
        }
        best
    }

    pub fn peak_direction(&self) -> Direction {
        self.grid.directions()[self.argmax()]
    }
}
