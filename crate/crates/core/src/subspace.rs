//! Spatial covariance, Hermitian eigendecomposition and wideband MUSIC.

use std::ops::Range;
use std::sync::Arc;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{steering_delays, ArrayGeometry, DoaGrid};
use crate::spatial::{Method, SpatialSpectrum};
use crate::spectral::{SpectralFrame, StftConfig};

pub type CMatrix = DMatrix<Complex64>;

/// Maximum number of cyclic Jacobi sweeps.
pub const MAX_SWEEPS: usize = 100;
/// Convergence threshold on the off-diagonal Frobenius norm, relative to ‖R‖.
pub const JACOBI_TOLERANCE: f64 = 1e-12;
/// Per-microphone MUSIC singularity guard; the guard is this times I_M.
pub const MUSIC_EPSILON: f64 = 1e-12;

/// Time-averaged spatial covariance <X X^H> at a single STFT bin.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: CMatrix,
    pub bin: usize,
    pub frames_averaged: usize,
}

pub fn covariance(
    frames: &[SpectralFrame],
    bin: usize,
    window: Range<usize>,
) -> Result<CovarianceEstimate> {
    if window.is_empty() || window.end > frames.len() {
        return Err(Error::EmptyWindow);
    }
    let m = frames[window.start].channels();
    let mut r = CMatrix::zeros(m, m);
    for frame in &frames[window.clone()] {
        let x = frame.snapshot(bin);
        for i in 0..m {
            for j in 0..m {
                r[(i, j)] += x[i] * x[j].conj();
            }
        }
    }
    let count = window.len();
    r /= Complex64::from(count as f64);
    let hermitian = (&r + r.adjoint()) * Complex64::from(0.5);
    Ok(CovarianceEstimate {
        matrix: hermitian,
        bin,
        frames_averaged: count,
    })
}

/// Eigenpairs of a Hermitian matrix, eigenvalues in descending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    /// Column k pairs with `eigenvalues[k]`.
    pub eigenvectors: CMatrix,
}

/// Cyclic Jacobi eigendecomposition of a Hermitian matrix.
///
/// Each eigenvector is rotated so its largest-magnitude entry is real and
/// positive. Equal eigenvalues keep the order in which Jacobi left them.
pub fn hermitian_eig(r: &CMatrix) -> Result<EigenDecomposition> {
    let n = r.nrows();
    assert_eq!(n, r.ncols(), "matrix must be square");
    let mut a = r.clone();
    let mut v = CMatrix::identity(n, n);
    let tol = JACOBI_TOLERANCE * a.norm();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&a) <= tol {
            converged = true;
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
    }
    if !converged && off_diagonal_norm(&a) > tol {
        return Err(Error::ConvergenceFailure { sweeps: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a[(y, y)].re.total_cmp(&a[(x, x)].re));
    let eigenvalues = order.iter().map(|&k| a[(k, k)].re).collect();
    let mut eigenvectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let mut lead = 0;
        for k in 1..n {
            if col[k].norm() > col[lead].norm() {
                lead = k;
            }
        }
        let phase = if col[lead].norm() > 0.0 {
            col[lead].conj() / col[lead].norm()
        } else {
            Complex64::from(1.0)
        };
        for k in 0..n {
            eigenvectors[(k, dst)] = col[k] * phase;
        }
        eigenvectors[(lead, dst)].im = 0.0;
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                sum += a[(i, j)].norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// Applies A <- U^H A U, V <- V U with the unitary plane rotation that
/// zeroes A[p, q].
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[(p, p)].re;
    let aqq = a[(q, q)].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let phase = apq / mag;
    // U = [[c, s e^{j phi}], [-s e^{-j phi}, c]] in the (p, q) plane
    let upq = phase * s;
    let uqp = -phase.conj() * s;
    let n = a.nrows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = akp * c + akq * uqp;
        a[(k, q)] = akp * upq + akq * c;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = apk * c + aqk * uqp.conj();
        a[(q, k)] = apk * upq.conj() + aqk * c;
    }
    a[(p, q)] = Complex64::default();
    a[(q, p)] = Complex64::default();
    a[(p, p)].im = 0.0;
    a[(q, q)].im = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c + vkq * uqp;
        v[(k, q)] = vkp * upq + vkq * c;
    }
}

/// Signal and noise subspace bases.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    pub signal: CMatrix,
    pub noise: CMatrix,
    pub qhat: usize,
}

/// First `qhat` eigenvectors span the signal subspace, the rest the noise.
pub fn split_subspace(eig: &EigenDecomposition, qhat: usize) -> Result<SubspaceSplit> {
    let m = eig.eigenvectors.ncols();
    if qhat == 0 || qhat >= m {
        return Err(Error::InvalidSourceCount { qhat, mics: m });
    }
    Ok(SubspaceSplit {
        signal: eig.eigenvectors.columns(0, qhat).into_owned(),
        noise: eig.eigenvectors.columns(qhat, m - qhat).into_owned(),
        qhat,
    })
}

/// ‖E_N^H d‖².
pub fn noise_projection(d: &[Complex64], noise: &CMatrix) -> f64 {
    let rows = noise.nrows();
    debug_assert_eq!(rows, d.len());
    let mut total = 0.0;
    for col in noise.column_iter() {
        let mut acc = Complex64::default();
        for k in 0..rows {
            acc += col[k].conj() * d[k];
        }
        total += acc.norm_sqr();
    }
    total
}

/// Narrowband MUSIC score 1 / (d^H E_N E_N^H d), capped at 1 / (I_M MUSIC_EPSILON).
pub fn music_narrowband(d: &[Complex64], noise: &CMatrix) -> f64 {
    let guard = MUSIC_EPSILON * d.len() as f64;
    1.0 / noise_projection(d, noise).max(guard)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MusicConfig {
    /// Assumed number of sources.
    pub qhat: usize,
    /// Frames averaged into each covariance estimate.
    pub block: usize,
}

impl Default for MusicConfig {
    fn default() -> Self {
        Self { qhat: 1, block: 8 }
    }
}

/// Frames [k - B/2, k - B/2 + B) clipped to the available range.
pub fn covariance_window(frame: usize, block: usize, frame_count: usize) -> Range<usize> {
    let block = block.clamp(1, frame_count.max(1));
    let start = frame.saturating_sub(block / 2).min(frame_count - block);
    start..start + block
}

/// Noise projection of a split, computed through whichever subspace has
/// fewer columns: ‖E_N^H d‖² = ‖d‖² − ‖E_S^H d‖² for orthonormal V.
#[derive(Debug, Clone)]
struct Projector {
    split: SubspaceSplit,
    via_signal: bool,
}

impl Projector {
    fn new(split: SubspaceSplit) -> Self {
        let via_signal = split.signal.ncols() < split.noise.ncols();
        Self { split, via_signal }
    }

    fn score(&self, d: &[Complex64]) -> f64 {
        let projection = if self.via_signal {
            let norm: f64 = d.iter().map(|z| z.norm_sqr()).sum();
            (norm - noise_projection(d, &self.split.signal)).max(0.0)
        } else {
            noise_projection(d, &self.split.noise)
        };
        1.0 / projection.max(MUSIC_EPSILON * d.len() as f64)
    }
}

/// Wideband MUSIC over a fixed geometry and direction grid.
#[derive(Debug, Clone)]
pub struct MusicEstimator {
    grid: Arc<DoaGrid>,
    delays: Vec<Vec<f64>>,
    stft: StftConfig,
    config: MusicConfig,
    mics: usize,
}

impl MusicEstimator {
    pub fn new(
        geom: &ArrayGeometry,
        grid: Arc<DoaGrid>,
        stft: StftConfig,
        config: MusicConfig,
    ) -> Result<Self> {
        stft.validate()?;
        if config.qhat == 0 || config.qhat >= geom.len() {
            return Err(Error::InvalidSourceCount {
                qhat: config.qhat,
                mics: geom.len(),
            });
        }
        if config.block == 0 {
            return Err(Error::InvalidConfig("covariance block must be >= 1".into()));
        }
        let v = geom.speed_of_sound();
        let delays = grid
            .directions()
            .iter()
            .map(|d| steering_delays(geom, d, v))
            .collect();
        Ok(Self {
            grid,
            delays,
            stft,
            config,
            mics: geom.len(),
        })
    }

    pub fn grid(&self) -> &Arc<DoaGrid> {
        &self.grid
    }

    /// Noise-subspace bases for every retained bin; `None` marks bins whose
    /// eigendecomposition failed.
    pub fn noise_subspaces(
        &self,
        frames: &[SpectralFrame],
        frame: usize,
    ) -> Result<Vec<Option<CMatrix>>> {
        Ok(self
            .projectors(frames, frame)?
            .into_iter()
            .map(|p| p.map(|p| p.split.noise))
            .collect())
    }

    fn projectors(&self, frames: &[SpectralFrame], frame: usize) -> Result<Vec<Option<Projector>>> {
        let window = covariance_window(frame, self.config.block, frames.len());
        self.stft
            .band_bins()
            .map(|bin| {
                let r = covariance(frames, bin, window.clone())?;
                match hermitian_eig(&r.matrix) {
                    Ok(eig) => Ok(Some(Projector::new(split_subspace(&eig, self.config.qhat)?))),
                    Err(e) => {
                        warn!("frame {frame} bin {bin}: {e}; bin excluded");
                        Ok(None)
                    }
                }
            })
            .collect()
    }

    /// Sum over retained bins of the narrowband score, for every grid direction.
    pub fn spectrum(&self, frames: &[SpectralFrame], frame: usize) -> Result<SpatialSpectrum> {
        if frames.is_empty() || frames[0].channels() != self.mics {
            return Err(Error::InvalidConfig(format!(
                "expected {} channels per frame",
                self.mics
            )));
        }
        let noise = self.projectors(frames, frame)?;
        let band = self.stft.band_bins();
        let omega0 = self.stft.omega(*band.start());
        let step = self.stft.omega(1);
        let used = noise.iter().filter(|n| n.is_some()).count();

        let mut d = vec![Complex64::default(); self.mics];
        let mut rot = vec![Complex64::default(); self.mics];
        let log_scores = self
            .delays
            .iter()
            .map(|delays| {
                if used == 0 {
                    return 0.0;
                }
                for (m, &tau) in delays.iter().enumerate() {
                    d[m] = Complex64::from_polar(1.0, -omega0 * tau);
                    rot[m] = Complex64::from_polar(1.0, -step * tau);
                }
                let mut total = 0.0;
                for basis in &noise {
                    if let Some(basis) = basis {
                        total += basis.score(&d);
                    }
                    for (x, r) in d.iter_mut().zip(&rot) {
                        *x *= r;
                    }
                }
                total.ln()
            })
            .collect();
        Ok(SpatialSpectrum {
            grid: self.grid.clone(),
            log_scores,
            frame_index: frames[frame].frame_index,
            method: Method::Music,
        })
    }
}

/// One-shot wideband MUSIC spectrum for output frame `frame`.
pub fn music_wideband(
    frames: &[SpectralFrame],
    frame: usize,
    geom: &ArrayGeometry,
    grid: Arc<DoaGrid>,
    stft: &StftConfig,
    config: &MusicConfig,
) -> Result<SpatialSpectrum> {
    MusicEstimator::new(geom, grid, *stft, *config)?.spectrum(frames, frame)
}
