//! GCC-PHAT correlation, pairwise TDOA estimation and the MCC-PHAT spatial
//! spectrum.
//!
//! Correlations follow `R_ij(tau) = E[x_i(t) x_j(t - tau)]`, so the peak of
//! pair (i, j) sits at `tau_i - tau_j`: positive when channel i lags
//! channel j.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{steering_delays, ArrayGeometry, DoaGrid, PairSet};
use crate::spatial::{Method, SpatialSpectrum};
use crate::spectral::{csd, phat_weight, CrossSpectrum, SpectralFrame, StftConfig};

/// Floor applied to each pair correlation, relative to the pair's peak over
/// its physical delay range in the current frame.
pub const FLOOR_FRACTION: f64 = 1e-3;

/// PHAT-weighted cross spectrum of one pair, evaluable at any real delay.
#[derive(Debug, Clone, PartialEq)]
pub struct GccCorrelation {
    /// G(omega_n) for n in 0..=N/2.
    pub weights: Vec<Complex64>,
    pub pair: (usize, usize),
    pub frame_index: usize,
    /// omega_1 = 2 pi f_s / N.
    omega_step: f64,
    /// First and last nonzero bin.
    support: Option<(usize, usize)>,
}

impl GccCorrelation {
    pub fn new(weighted: CrossSpectrum, cfg: &StftConfig) -> Self {
        let first = weighted.values.iter().position(|z| *z != Complex64::default());
        let last = weighted.values.iter().rposition(|z| *z != Complex64::default());
        Self {
            support: first.zip(last),
            omega_step: cfg.omega(1),
            weights: weighted.values,
            pair: weighted.pair,
            frame_index: weighted.frame_index,
        }
    }

    /// CSD of `pair` in `frame`, PHAT-weighted.
    pub fn from_frame(frame: &SpectralFrame, pair: (usize, usize), cfg: &StftConfig) -> Self {
        Self::new(phat_weight(&csd(frame, pair, cfg)), cfg)
    }

    /// Same correlation with the pair reversed (conjugated weights).
    pub fn swapped(&self) -> Self {
        Self {
            weights: self.weights.iter().map(|z| z.conj()).collect(),
            pair: (self.pair.1, self.pair.0),
            ..self.clone()
        }
    }

    fn bin_weight(&self, bin: usize) -> f64 {
        if bin == 0 || bin == self.weights.len() - 1 {
            1.0
        } else {
            2.0
        }
    }

    /// Sum over the one-sided spectrum of Re{c_n G(omega_n) e^{j omega_n tau}},
    /// c_n = 1 at DC and Nyquist and 2 elsewhere. For a real-signal CSD this
    /// equals the two-sided inverse transform evaluated at `tau` seconds.
    pub fn correlation_at(&self, tau: f64) -> f64 {
        let Some((lo, hi)) = self.support else {
            return 0.0;
        };
        (lo..=hi)
            .map(|n| {
                let phasor = Complex64::from_polar(1.0, self.omega_step * n as f64 * tau);
                self.bin_weight(n) * (self.weights[n] * phasor).re
            })
            .sum()
    }

    /// Same sum as [`correlation_at`](Self::correlation_at), with the phasors
    /// generated by recurrence. Used in the grid search.
    fn correlation_fast(&self, tau: f64) -> f64 {
        let Some((lo, hi)) = self.support else {
            return 0.0;
        };
        let mut phasor = Complex64::from_polar(1.0, self.omega_step * lo as f64 * tau);
        let step = Complex64::from_polar(1.0, self.omega_step * tau);
        let mut total = 0.0;
        for n in lo..=hi {
            total += self.bin_weight(n) * (self.weights[n] * phasor).re;
            phasor *= step;
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdoaEstimate {
    pub pair: (usize, usize),
    /// Seconds; positive when channel i lags channel j.
    pub tau_hat: f64,
    pub peak_value: f64,
}

/// Candidate delays k * resolution for |k * resolution| <= tau_max, ordered
/// by increasing |tau| (positive first) so a strict comparison breaks ties
/// towards the smallest delay.
fn delay_candidates(tau_max: f64, resolution: f64) -> impl Iterator<Item = f64> {
    let steps = (tau_max / resolution + 1e-9).floor() as i64;
    std::iter::once(0.0).chain(
        (1..=steps).flat_map(move |k| [k as f64 * resolution, -(k as f64) * resolution]),
    )
}

fn scan_peak(g: &GccCorrelation, tau_max: f64, resolution: f64) -> (f64, f64) {
    let mut best = (0.0, f64::NEG_INFINITY);
    for tau in delay_candidates(tau_max, resolution) {
        let value = g.correlation_fast(tau);
        if value > best.1 {
            best = (tau, value);
        }
    }
    best
}

/// Argmax of the correlation over the physically possible delays of the pair,
/// sampled every `resolution` seconds.
pub fn tdoa_estimate(
    g: &GccCorrelation,
    geom: &ArrayGeometry,
    speed_of_sound: f64,
    resolution: f64,
) -> Result<TdoaEstimate> {
    if !(resolution > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "TDOA resolution must be positive, got {resolution}"
        )));
    }
    let (i, j) = g.pair;
    let tau_max = geom.mic_distance(i, j) / speed_of_sound;
    let (tau_hat, peak_value) = scan_peak(g, tau_max, resolution);
    Ok(TdoaEstimate {
        pair: g.pair,
        tau_hat,
        peak_value,
    })
}

/// A pair correlation together with its positivity floor for the frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FlooredCorrelation {
    pub gcc: GccCorrelation,
    pub floor: f64,
}

impl FlooredCorrelation {
    /// Floor = FLOOR_FRACTION x the peak over [-tau_max, tau_max] at `resolution`.
    pub fn new(gcc: GccCorrelation, tau_max: f64, resolution: f64) -> Self {
        let (_, peak) = scan_peak(&gcc, tau_max, resolution);
        let floor = if peak > 0.0 {
            FLOOR_FRACTION * peak
        } else {
            f64::MIN_POSITIVE
        };
        Self { gcc, floor }
    }

    pub fn floored_at(&self, tau: f64) -> f64 {
        self.gcc.correlation_at(tau).max(self.floor)
    }
}

/// ln of the MCC-PHAT objective: sum over pairs of ln max(R_ij(tau_i - tau_j), floor).
pub fn mcc_phat_log_score(pairs: &[FlooredCorrelation], delays: &[f64]) -> f64 {
    pairs
        .iter()
        .map(|p| {
            let (i, j) = p.gcc.pair;
            p.floored_at(delays[i] - delays[j]).ln()
        })
        .sum()
}

/// MCC-PHAT objective, the product of floored pair correlations.
pub fn mcc_phat_score(pairs: &[FlooredCorrelation], delays: &[f64]) -> f64 {
    mcc_phat_log_score(pairs, delays).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[derive(Default)]
pub struct MccPhatConfig {
    /// Delay step of the per-pair peak scan, seconds. `None` means 1 / (4 f_s).
    pub resolution: Option<f64>,
}


/// MCC-PHAT over a fixed geometry, pair set and direction grid.
#[derive(Debug, Clone)]
pub struct MccPhatEstimator {
    grid: Arc<DoaGrid>,
    /// Per grid direction, tau_i - tau_j for every pair in `pairs`.
    pair_delays: Vec<Vec<f64>>,
    pairs: PairSet,
    tau_max: Vec<f64>,
    stft: StftConfig,
    resolution: f64,
}

impl MccPhatEstimator {
    pub fn new(
        geom: &ArrayGeometry,
        pairs: PairSet,
        grid: Arc<DoaGrid>,
        stft: StftConfig,
        config: MccPhatConfig,
    ) -> Result<Self> {
        stft.validate()?;
        if pairs.is_empty() {
            return Err(Error::EmptyPairSet {
                threshold_m: pairs.speed_of_sound() / pairs.f_max(),
            });
        }
        if pairs.f_max() < stft.band.1 {
            return Err(Error::InvalidConfig(format!(
                "pair set was selected for f_max = {} Hz but the band extends to {} Hz",
                pairs.f_max(),
                stft.band.1
            )));
        }
        let resolution = config
            .resolution
            .unwrap_or(1.0 / (4.0 * stft.sample_rate));
        if !(resolution > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "TDOA resolution must be positive, got {resolution}"
            )));
        }
        let v = geom.speed_of_sound();
        let pair_delays = grid
            .directions()
            .iter()
            .map(|d| {
                let tau = steering_delays(geom, d, v);
                pairs.pairs().iter().map(|&(i, j)| tau[i] - tau[j]).collect()
            })
            .collect();
        let tau_max = pairs
            .pairs()
            .iter()
            .map(|&(i, j)| geom.mic_distance(i, j) / v)
            .collect();
        Ok(Self {
            grid,
            pair_delays,
            pairs,
            tau_max,
            stft,
            resolution,
        })
    }

    pub fn grid(&self) -> &Arc<DoaGrid> {
        &self.grid
    }

    pub fn pairs(&self) -> &PairSet {
        &self.pairs
    }

    /// Floored PHAT correlations of every pair for one frame.
    pub fn correlations(&self, frame: &SpectralFrame) -> Vec<FlooredCorrelation> {
        self.pairs
            .pairs()
            .iter()
            .zip(&self.tau_max)
            .map(|(&pair, &tau_max)| {
                let gcc = GccCorrelation::from_frame(frame, pair, &self.stft);
                FlooredCorrelation::new(gcc, tau_max, self.resolution)
            })
            .collect()
    }

    pub fn spectrum(&self, frame: &SpectralFrame) -> SpatialSpectrum {
        let correlations = self.correlations(frame);
        let log_scores = self
            .pair_delays
            .iter()
            .map(|delays| {
                correlations
                    .iter()
                    .zip(delays)
                    .map(|(c, &tau)| c.gcc.correlation_fast(tau).max(c.floor).ln())
                    .sum()
            })
            .collect();
        SpatialSpectrum {
            grid: self.grid.clone(),
            log_scores,
            frame_index: frame.frame_index,
            method: Method::MccPhat,
        }
    }
}

/// One-shot MCC-PHAT spectrum of a single frame.
pub fn mcc_phat_spectrum(
    frame: &SpectralFrame,
    geom: &ArrayGeometry,
    pairs: &PairSet,
    grid: Arc<DoaGrid>,
    stft: &StftConfig,
    config: &MccPhatConfig,
) -> Result<SpatialSpectrum> {
    Ok(MccPhatEstimator::new(geom, pairs.clone(), grid, *stft, *config)?.spectrum(frame))
}
