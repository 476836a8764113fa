//! Frame energy gate with a running noise-floor estimate.

use crate::spectral::{SpectralFrame, StftConfig};

pub const DEFAULT_GATE_DB: f64 = 6.0;
/// Frames used to initialise the noise floor.
pub const GATE_INIT_FRAMES: usize = 10;
/// Upward drift of the floor per frame, dB. Downward moves are immediate.
pub const FLOOR_RISE_DB: f64 = 0.05;

/// Mean over channels of the in-band energy sum |X_i(omega_n)|^2.
pub fn band_energy(frame: &SpectralFrame, cfg: &StftConfig) -> f64 {
    let band = cfg.band_bins();
    let total: f64 = frame
        .coeffs
        .iter()
        .map(|ch| ch[band.clone()].iter().map(|z| z.norm_sqr()).sum::<f64>())
        .sum();
    total / frame.channels().max(1) as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGate {
    threshold_db: f64,
    floor_db: Option<f64>,
}

impl EnergyGate {
    /// Floor starts at the quietest nonzero energy among `initial`.
    pub fn new(threshold_db: f64, initial: &[f64]) -> Self {
        let floor_db = initial
            .iter()
            .filter(|&&e| e > 0.0)
            .map(|&e| 10.0 * e.log10())
            .reduce(f64::min);
        Self {
            threshold_db,
            floor_db,
        }
    }

    pub fn floor_db(&self) -> Option<f64> {
        self.floor_db
    }

    /// True to keep the frame: its energy is at least `threshold_db` above
    /// the floor. Silent frames are always dropped.
    pub fn decide(&mut self, energy: f64) -> bool {
        if !(energy > 0.0) {
            return false;
        }
        let level = 10.0 * energy.log10();
        let keep = match self.floor_db {
            Some(floor) => level >= floor + self.threshold_db,
            None => true,
        };
        self.floor_db = Some(match self.floor_db {
            Some(floor) => level.min(floor + FLOOR_RISE_DB),
            None => level,
        });
        keep
    }
}

/// Keep/drop decision for every frame, in order.
pub fn energy_gate(frames: &[SpectralFrame], cfg: &StftConfig, threshold_db: f64) -> Vec<bool> {
    let energies: Vec<f64> = frames.iter().map(|f| band_energy(f, cfg)).collect();
    let init = &energies[..energies.len().min(GATE_INIT_FRAMES)];
    let mut gate = EnergyGate::new(threshold_db, init);
    energies.iter().map(|&e| gate.decide(e)).collect()
}
