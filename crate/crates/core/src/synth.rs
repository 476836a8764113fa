//! Far-field multichannel scene synthesis with ground truth.
//!
//! Every microphone receives the source delayed by its plane-wave delay plus
//! independent white noise. Moving sources use one delay per 256-sample
//! block, with the direction interpolated linearly between trajectory knots.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{steering_delays, wrap_degrees, ArrayGeometry, Direction, GeometryFile};
use crate::metrics::{Trajectory, TrajectoryEntry};
use crate::spectral::StftConfig;
use crate::wav::{read_wav, write_wav, SampleFormat};

/// Samples per constant-delay block for moving sources.
pub const BLOCK_LEN: usize = 256;

/// Context kept on each side of a block when it is delayed on its own.
const BLOCK_MARGIN: usize = 1024;

/// Formant (centre, bandwidth) pairs in Hz of the speech-like source: the
/// resonances of a uniform 17.5 cm tube, i.e. a neutral vowel.
pub const SPEECH_FORMANTS: [(f64, f64); 4] =
    [(500.0, 60.0), (1500.0, 90.0), (2500.0, 120.0), (3500.0, 150.0)];

/// Denominator [1, a_1, ..., a_8] of the all-pole speech-like filter at
/// `sample_rate`, one conjugate pole pair per formant. Formants at or above
/// 0.45 f_s are left out, shortening the filter.
pub fn speech_ar(sample_rate: f64) -> Vec<f64> {
    let mut poly = vec![Complex64::new(1.0, 0.0)];
    for &(centre, bandwidth) in SPEECH_FORMANTS
        .iter()
        .filter(|(f, _)| *f < 0.45 * sample_rate)
    {
        let radius = (-std::f64::consts::PI * bandwidth / sample_rate).exp();
        let angle = 2.0 * std::f64::consts::PI * centre / sample_rate;
        for pole in [
            Complex64::from_polar(radius, angle),
            Complex64::from_polar(radius, -angle),
        ] {
            let mut next = vec![Complex64::default(); poly.len() + 1];
            for (k, c) in poly.iter().enumerate() {
                next[k] += c;
                next[k + 1] -= c * pole;
            }
            poly = next;
        }
    }
    poly.iter().map(|c| c.re).collect()
}

/// Samples discarded while the filter settles: many time constants of the
/// narrowest formant.
fn ar_warmup(sample_rate: f64) -> usize {
    let narrowest = SPEECH_FORMANTS[0].1;
    (20.0 * sample_rate / (std::f64::consts::PI * narrowest)).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceSignal {
    WhiteNoise,
    SpeechLike,
    /// First channel of a WAV file at the scene sample rate.
    Wav { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Knot {
    pub time: f64,
    pub azimuth: f64,
    pub elevation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisFrames {
    pub frame_len: usize,
    pub hop: usize,
}

impl Default for AnalysisFrames {
    fn default() -> Self {
        Self {
            frame_len: 2048,
            hop: 1024,
        }
    }
}

fn default_format() -> SampleFormat {
    SampleFormat::Float32
}

/// Scene description, also the JSON schema read by the `synth` subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub geometry: GeometryFile,
    pub source: SourceSignal,
    pub trajectory: Vec<Knot>,
    /// Per-channel SNR in dB; `None` for a noiseless scene.
    #[serde(default)]
    pub snr_db: Option<f64>,
    pub duration: f64,
    pub sample_rate: f64,
    #[serde(default)]
    pub seed: u64,
    /// Frame layout used to timestamp the ground truth.
    #[serde(default)]
    pub analysis: AnalysisFrames,
    #[serde(default = "default_format")]
    pub output_format: SampleFormat,
}

impl SceneSpec {
    /// Static source with a speech-like signal and default analysis frames.
    pub fn static_source(
        geometry: &ArrayGeometry,
        direction: Direction,
        snr_db: Option<f64>,
        duration: f64,
        sample_rate: f64,
        seed: u64,
    ) -> Self {
        Self {
            geometry: geometry.to_file(),
            source: SourceSignal::SpeechLike,
            trajectory: vec![Knot {
                time: 0.0,
                azimuth: direction.azimuth(),
                elevation: direction.elevation(),
            }],
            snr_db,
            duration,
            sample_rate,
            seed,
            analysis: AnalysisFrames::default(),
            output_format: default_format(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    fn validate(&self) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::InvalidConfig("duration must be positive".into()));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(Error::InvalidConfig("SNR must be finite (omit it for no noise)".into()));
            }
        }
        if self.trajectory.is_empty() {
            return Err(Error::InvalidConfig("trajectory needs at least one knot".into()));
        }
        for (k, knot) in self.trajectory.iter().enumerate() {
            Direction::new(knot.azimuth, knot.elevation)?;
            if !(0.0..=self.duration).contains(&knot.time) {
                return Err(Error::InvalidConfig(format!(
                    "knot {k} at {} s lies outside [0, {}]",
                    knot.time, self.duration
                )));
            }
            if k > 0 && knot.time < self.trajectory[k - 1].time {
                return Err(Error::InvalidConfig("trajectory knots out of order".into()));
            }
        }
        Ok(())
    }

    /// Direction at time `t`, interpolated between knots (azimuth along the
    /// shorter arc) and held constant outside them.
    pub fn direction_at(&self, t: f64) -> Result<Direction> {
        let knots = &self.trajectory;
        let after = knots.partition_point(|k| k.time <= t);
        let (az, el) = if after == 0 {
            (knots[0].azimuth, knots[0].elevation)
        } else if after == knots.len() {
            let last = knots[knots.len() - 1];
            (last.azimuth, last.elevation)
        } else {
            let (a, b) = (knots[after - 1], knots[after]);
            let frac = (t - a.time) / (b.time - a.time);
            (
                a.azimuth + frac * wrap_degrees(b.azimuth - a.azimuth),
                a.elevation + frac * (b.elevation - a.elevation),
            )
        };
        Direction::wrapped(az, el)
    }
}

/// Synthesized microphone signals and the matching ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub channels: Vec<Vec<f64>>,
    pub sample_rate: f64,
    pub geometry: ArrayGeometry,
    pub truth: Trajectory,
}

/// Phase shift of one real buffer, treated as periodic: bin k is multiplied
/// by exp(-j omega_k tau) with omega_k signed around Nyquist.
///
/// For odd lengths the operation is unitary and the output is exactly real.
pub fn circular_delay(signal: &[f64], tau: f64, sample_rate: f64) -> Vec<f64> {
    let len = signal.len();
    if len == 0 {
        return Vec::new();
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    planner.plan_fft_forward(len).process(&mut buf);
    apply_delay(&mut buf, tau * sample_rate);
    planner.plan_fft_inverse(len).process(&mut buf);
    buf.iter().map(|z| z.re / len as f64).collect()
}

fn apply_delay(spectrum: &mut [Complex64], delay_samples: f64) {
    let len = spectrum.len();
    for (k, z) in spectrum.iter_mut().enumerate() {
        let signed = if 2 * k <= len { k as f64 } else { k as f64 - len as f64 };
        let phase = -2.0 * std::f64::consts::PI * signed * delay_samples / len as f64;
        let mut shifted = *z * Complex64::from_polar(1.0, phase);
        if 2 * k == len {
            // Nyquist of an even length must stay real
            shifted = Complex64::new(shifted.re, 0.0);
        }
        *z = shifted;
    }
}

fn odd_at_least(n: usize) -> usize {
    n | 1
}

/// Delays `signal` by `tau` seconds (fractional allowed) through a
/// frequency-domain phase shift. The buffer is zero-padded so nothing wraps
/// around; samples shifted past either end are lost.
pub fn fractional_delay(signal: &[f64], tau: f64, sample_rate: f64) -> Result<Vec<f64>> {
    let duration = signal.len() as f64 / sample_rate;
    if !(tau.abs() < duration) {
        return Err(Error::DelayTooLarge {
            tau_s: tau,
            duration_s: duration,
        });
    }
    let pad = (tau.abs() * sample_rate).ceil() as usize + 1;
    let len = odd_at_least(signal.len() + pad);
    let mut padded = signal.to_vec();
    padded.resize(len, 0.0);
    let mut out = circular_delay(&padded, tau, sample_rate);
    out.truncate(signal.len());
    Ok(out)
}

/// White Gaussian noise through the [`speech_ar`] all-pole filter, after a
/// warm-up so the output is stationary from the first sample. Not normalized.
pub fn speech_like<R: Rng + ?Sized>(len: usize, sample_rate: f64, rng: &mut R) -> Vec<f64> {
    let a = speech_ar(sample_rate);
    let warmup = ar_warmup(sample_rate);
    let mut y = vec![0.0; len + warmup];
    for n in 0..y.len() {
        let e: f64 = StandardNormal.sample(rng);
        let feedback: f64 = (1..a.len())
            .filter(|&k| k <= n)
            .map(|k| a[k] * y[n - k])
            .sum();
        y[n] = e - feedback;
    }
    y.split_off(warmup)
}

fn source_signal(spec: &SceneSpec, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    let mut signal: Vec<f64> = match &spec.source {
        SourceSignal::WhiteNoise => (0..len).map(|_| StandardNormal.sample(rng)).collect(),
        SourceSignal::SpeechLike => speech_like(len, spec.sample_rate, rng),
        SourceSignal::Wav { path } => {
            let audio = read_wav(path)?;
            if (audio.sample_rate as f64 - spec.sample_rate).abs() > 0.5 {
                return Err(Error::InvalidConfig(format!(
                    "{}: sample rate {} Hz differs from the scene's {} Hz",
                    path.display(),
                    audio.sample_rate,
                    spec.sample_rate
                )));
            }
            if audio.len() < len {
                return Err(Error::InvalidConfig(format!(
                    "{}: {} samples, scene needs {len}",
                    path.display(),
                    audio.len()
                )));
            }
            audio.channels[0][..len].to_vec()
        }
    };
    let power = signal.iter().map(|x| x * x).sum::<f64>() / len as f64;
    if power > 0.0 {
        let gain = power.sqrt().recip();
        signal.iter_mut().for_each(|x| *x *= gain);
    }
    Ok(signal)
}

/// Generates the multichannel recording and ground truth for `spec`.
pub fn synthesize(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let geometry = ArrayGeometry::from_file(spec.geometry.clone())?;
    let fs = spec.sample_rate;
    let len = (spec.duration * fs).round() as usize;
    let v = geometry.speed_of_sound();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let blocks = len.div_ceil(BLOCK_LEN);
    let block_delays: Vec<Vec<f64>> = (0..blocks)
        .map(|b| {
            let centre = (b * BLOCK_LEN) as f64 + BLOCK_LEN as f64 / 2.0;
            let dir = spec.direction_at(centre / fs)?;
            Ok(steering_delays(&geometry, &dir, v))
        })
        .collect::<Result<_>>()?;
    let max_delay = block_delays
        .iter()
        .flatten()
        .fold(0.0f64, |m, t| m.max(t.abs()));
    // source extended on both sides so every delayed read has real samples
    let pad = (max_delay * fs).ceil() as usize + BLOCK_MARGIN;
    let source = source_signal(spec, len + 2 * pad, &mut rng)?;

    let is_static = block_delays.windows(2).all(|w| w[0] == w[1]);
    let mut channels: Vec<Vec<f64>> = if is_static {
        block_delays[0]
            .iter()
            .map(|&tau| Ok(fractional_delay(&source, tau, fs)?[pad..pad + len].to_vec()))
            .collect::<Result<_>>()?
    } else {
        delay_blocks(&source, &block_delays, pad, len, fs)
    };

    if let Some(snr) = spec.snr_db {
        let sigma = 10f64.powf(-snr / 20.0);
        for ch in &mut channels {
            for x in ch.iter_mut() {
                let n: f64 = StandardNormal.sample(&mut rng);
                *x += sigma * n;
            }
        }
    }

    let analysis = StftConfig {
        frame_len: spec.analysis.frame_len,
        hop: spec.analysis.hop.max(1),
        sample_rate: fs,
        ..StftConfig::default()
    };
    let truth = (0..analysis.frame_count(len))
        .map(|k| {
            let t = analysis.frame_time(k);
            let d = spec.direction_at(t)?;
            Ok(TrajectoryEntry::valid(t, d.azimuth(), d.elevation()))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Scene {
        channels,
        sample_rate: fs,
        geometry,
        truth: Trajectory::new(truth)?,
    })
}

/// Block-wise delays: each block is cut out of the source with
/// `BLOCK_MARGIN` samples of context on each side, phase-shifted, and its
/// centre copied to the output.
fn delay_blocks(
    source: &[f64],
    block_delays: &[Vec<f64>],
    pad: usize,
    len: usize,
    fs: f64,
) -> Vec<Vec<f64>> {
    let mics = block_delays[0].len();
    let seg_len = odd_at_least(BLOCK_LEN + 2 * pad);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(seg_len);
    let inverse = planner.plan_fft_inverse(seg_len);
    let mut out = vec![vec![0.0; len]; mics];
    let mut spectrum = vec![Complex64::default(); seg_len];
    let mut work = vec![Complex64::default(); seg_len];
    for (b, delays) in block_delays.iter().enumerate() {
        let start = b * BLOCK_LEN;
        let end = (start + BLOCK_LEN).min(len);
        // output sample n reads source index n + pad - tau fs; segment starts at n = start - pad
        for (k, z) in spectrum.iter_mut().enumerate() {
            *z = Complex64::new(source.get(start + k).copied().unwrap_or(0.0), 0.0);
        }
        forward.process(&mut spectrum);
        for (m, &tau) in delays.iter().enumerate() {
            work.copy_from_slice(&spectrum);
            apply_delay(&mut work, tau * fs);
            inverse.process(&mut work);
            for n in start..end {
                out[m][n] = work[n - start + pad].re / seg_len as f64;
            }
        }
    }
    out
}

/// File names written by [`write_scene`].
pub const SCENE_WAV: &str = "scene.wav";
pub const SCENE_TRUTH: &str = "truth.csv";
pub const SCENE_GEOMETRY: &str = "geometry.json";

/// Writes `scene.wav`, `truth.csv` and `geometry.json` into `dir`. Audio
/// peaking above full scale is attenuated uniformly across channels.
pub fn write_scene(scene: &Scene, format: SampleFormat, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let peak = scene
        .channels
        .iter()
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let gain = if peak > 0.99 { 0.99 / peak } else { 1.0 };
    let scaled: Vec<Vec<f64>> = scene
        .channels
        .iter()
        .map(|ch| ch.iter().map(|x| x * gain).collect())
        .collect();
    write_wav(
        dir.join(SCENE_WAV),
        &scaled,
        scene.sample_rate.round() as u32,
        format,
    )?;
    scene.truth.write_truth_csv(dir.join(SCENE_TRUTH))?;
    scene.geometry.save(dir.join(SCENE_GEOMETRY))
}
