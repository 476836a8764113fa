//! STFT front end, cross-power spectral density and PHAT weighting.

use std::ops::RangeInclusive;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bins with |S| below this fraction of the frame's in-band maximum are
/// zeroed by [`phat_weight`].
pub const PHAT_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    Rectangular,
    /// Periodic Hann; sums to one at hop = N/2.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; len],
            Window::Hann => (0..len)
                .map(|n| {
                    0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / len as f64).cos()
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: f64,
    /// Retained band (f_min, f_max) in Hz, inclusive.
    pub band: (f64, f64),
}

impl Default for StftConfig {
    fn default() -> Self {
        Self {
            frame_len: 2048,
            hop: 1024,
            window: Window::Hann,
            sample_rate: 48_000.0,
            band: (300.0, 4000.0),
        }
    }
}

impl StftConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.frame_len;
        if n == 0 || !n.is_power_of_two() {
            return Err(Error::InvalidConfig(format!(
                "frame length must be a power of two, got {n}"
            )));
        }
        if self.hop == 0 || self.hop > n {
            return Err(Error::InvalidConfig(format!(
                "hop must be in 1..={n}, got {}",
                self.hop
            )));
        }
        if !(self.sample_rate.is_finite() && self.sample_rate > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sample rate must be positive, got {}",
                self.sample_rate
            )));
        }
        let (lo, hi) = self.band;
        if !(lo >= 0.0 && lo < hi && hi <= self.sample_rate / 2.0) {
            return Err(Error::InvalidConfig(format!(
                "band ({lo}, {hi}) Hz must satisfy 0 <= f_min < f_max <= f_s/2 = {}",
                self.sample_rate / 2.0
            )));
        }
        if self.band_bins().is_empty() {
            return Err(Error::InvalidConfig(format!(
                "band ({lo}, {hi}) Hz contains no STFT bin"
            )));
        }
        Ok(())
    }

    pub fn num_bins(&self) -> usize {
        self.frame_len / 2 + 1
    }

    /// Angular frequency of bin n, 2 pi f_s n / N.
    pub fn omega(&self, bin: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.sample_rate * bin as f64 / self.frame_len as f64
    }

    pub fn bin_frequency(&self, bin: usize) -> f64 {
        self.sample_rate * bin as f64 / self.frame_len as f64
    }

    /// Bins whose centre frequency lies inside the band.
    pub fn band_bins(&self) -> RangeInclusive<usize> {
        let per_bin = self.sample_rate / self.frame_len as f64;
        let lo = (self.band.0 / per_bin - 1e-9).ceil().max(0.0) as usize;
        let hi = ((self.band.1 / per_bin + 1e-9).floor() as usize).min(self.num_bins() - 1);
        lo..=hi
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_len {
            0
        } else {
            (len - self.frame_len) / self.hop + 1
        }
    }

    /// Time of the centre of frame k, seconds.
    pub fn frame_time(&self, k: usize) -> f64 {
        (k * self.hop) as f64 / self.sample_rate + self.frame_len as f64 / (2.0 * self.sample_rate)
    }
}

/// One-sided STFT of all channels for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFrame {
    /// `coeffs[i][n]` is X_i(omega_n), n in 0..=N/2.
    pub coeffs: Vec<Vec<Complex64>>,
    pub frame_index: usize,
    /// Frame centre, seconds.
    pub time: f64,
}

impl SpectralFrame {
    pub fn channels(&self) -> usize {
        self.coeffs.len()
    }

    /// Snapshot vector X(omega_n) across channels.
    pub fn snapshot(&self, bin: usize) -> Vec<Complex64> {
        self.coeffs.iter().map(|ch| ch[bin]).collect()
    }
}

/// Frames every channel with `cfg` and returns one spectral frame per hop.
pub fn stft(signal: &[Vec<f64>], cfg: &StftConfig) -> Result<Vec<SpectralFrame>> {
    cfg.validate()?;
    let len = signal.first().map_or(0, Vec::len);
    if signal.iter().any(|ch| ch.len() != len) {
        return Err(Error::InvalidConfig("channels differ in length".into()));
    }
    if len < cfg.frame_len {
        return Err(Error::SignalTooShort {
            len,
            frame_len: cfg.frame_len,
        });
    }
    let n = cfg.frame_len;
    let window = cfg.window.coefficients(n);
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
    let mut buf = vec![Complex64::default(); n];
    let frames = (0..cfg.frame_count(len))
        .map(|k| {
            let start = k * cfg.hop;
            let coeffs = signal
                .iter()
                .map(|ch| {
                    for (b, (&x, &w)) in buf.iter_mut().zip(ch[start..start + n].iter().zip(&window))
                    {
                        *b = Complex64::new(x * w, 0.0);
                    }
                    fft.process_with_scratch(&mut buf, &mut scratch);
                    buf[..cfg.num_bins()].to_vec()
                })
                .collect();
            SpectralFrame {
                coeffs,
                frame_index: k,
                time: cfg.frame_time(k),
            }
        })
        .collect();
    Ok(frames)
}

/// Inverse of [`stft`]: inverse DFT of each frame, overlap-add, and division
/// by the summed analysis window. Samples no frame covers with nonzero window
/// weight come back as zero.
pub fn overlap_add(frames: &[SpectralFrame], cfg: &StftConfig, len: usize) -> Vec<Vec<f64>> {
    let n = cfg.frame_len;
    let channels = frames.first().map_or(0, SpectralFrame::channels);
    let window = cfg.window.coefficients(n);
    let ifft = FftPlanner::new().plan_fft_inverse(n);
    let mut out = vec![vec![0.0; len]; channels];
    let mut weight = vec![0.0; len];
    let mut buf = vec![Complex64::default(); n];
    for frame in frames {
        let start = frame.frame_index * cfg.hop;
        for (ch, spectrum) in frame.coeffs.iter().enumerate() {
            buf[..=n / 2].copy_from_slice(spectrum);
            for k in n / 2 + 1..n {
                buf[k] = spectrum[n - k].conj();
            }
            ifft.process(&mut buf);
            for (t, z) in buf.iter().enumerate() {
                if start + t < len {
                    out[ch][start + t] += z.re / n as f64;
                }
            }
        }
        for (t, &w) in window.iter().enumerate() {
            if start + t < len {
                weight[start + t] += w;
            }
        }
    }
    for ch in &mut out {
        for (x, &w) in ch.iter_mut().zip(&weight) {
            *x = if w > 1e-8 { *x / w } else { 0.0 };
        }
    }
    out
}

/// Cross-power spectral density of one microphone pair in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossSpectrum {
    /// One value per bin 0..=N/2; zero outside the retained band.
    pub values: Vec<Complex64>,
    pub pair: (usize, usize),
    pub frame_index: usize,
}

/// Single-frame CSD estimate (N / f_s) X_i conj(X_j), zeroed outside the band.
pub fn csd(frame: &SpectralFrame, pair: (usize, usize), cfg: &StftConfig) -> CrossSpectrum {
    let (i, j) = pair;
    let scale = cfg.frame_len as f64 / cfg.sample_rate;
    let band = cfg.band_bins();
    let values = frame.coeffs[i]
        .iter()
        .zip(&frame.coeffs[j])
        .enumerate()
        .map(|(n, (xi, xj))| {
            if band.contains(&n) {
                xi * xj.conj() * scale
            } else {
                Complex64::default()
            }
        })
        .collect();
    CrossSpectrum {
        values,
        pair,
        frame_index: frame.frame_index,
    }
}

/// PHAT prefilter: every bin becomes S / |S|. Bins below the relative guard
/// (including all out-of-band zeros) become zero.
pub fn phat_weight(csd: &CrossSpectrum) -> CrossSpectrum {
    let peak = csd.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let guard = PHAT_EPSILON * peak;
    let values = csd
        .values
        .iter()
        .map(|&z| {
            let mag = z.norm();
            if mag > 0.0 && mag >= guard {
                z / mag
            } else {
                Complex64::default()
            }
        })
        .collect();
    CrossSpectrum {
        values,
        pair: csd.pair,
        frame_index: csd.frame_index,
    }
}
