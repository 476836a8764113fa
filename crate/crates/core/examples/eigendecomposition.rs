//! Jacobi eigendecomposition of a spatial covariance and the signal/noise
//! subspace split behind MUSIC.
//!
//!     cargo run --example eigendecomposition

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use doa::geometry::{steering_delays, steering_vector, ArrayGeometry, Direction};
use doa::spectral::SpectralFrame;
use doa::subspace::{covariance, hermitian_eig, music_narrowband, split_subspace};

fn main() -> doa::Result<()> {
    let geometry = ArrayGeometry::uniform_circular(6, 0.05)?;
    let omega = 2.0 * std::f64::consts::PI * 2000.0;
    let steer = |az: f64| -> doa::Result<Vec<Complex64>> {
        let d = Direction::new(az, 0.0)?;
        Ok(steering_vector(&steering_delays(&geometry, &d, 343.0), omega))
    };
    let d = steer(40.0)?;

    // 32 snapshots of one source plus weak sensor noise
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut gauss = || -> f64 { StandardNormal.sample(&mut rng) };
    let frames: Vec<SpectralFrame> = (0..32)
        .map(|k| {
            let s = Complex64::new(gauss(), gauss());
            SpectralFrame {
                coeffs: d
                    .iter()
                    .map(|&di| vec![s * di + 0.05 * Complex64::new(gauss(), gauss())])
                    .collect(),
                frame_index: k,
                time: k as f64,
            }
        })
        .collect();

    let r = covariance(&frames, 0, 0..frames.len())?;
    let eig = hermitian_eig(&r.matrix)?;
    println!("eigenvalues: {:.4?}", eig.eigenvalues);
    let split = split_subspace(&eig, 1)?;
    for az in [0.0, 20.0, 40.0, 60.0, 120.0] {
        let score = music_narrowband(&steer(az)?, &split.noise);
        println!("MUSIC at {az:5.1}°: {:10.2} dB", 10.0 * score.log10());
    }
    Ok(())
}
