//! Pairwise time-difference of arrival with GCC-PHAT.
//!
//! Channel 0 is channel 1 delayed by 7 samples plus noise; the PHAT-weighted
//! correlation peaks at +7 samples.
//!
//!     cargo run --example gcc_phat_tdoa

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use doa::geometry::ArrayGeometry;
use doa::mccphat::{tdoa_estimate, GccCorrelation};
use doa::spectral::{stft, StftConfig};
use doa::synth::{fractional_delay, speech_like};

fn main() -> doa::Result<()> {
    let fs = 16_000.0;
    let geometry = ArrayGeometry::new("pair", vec![[0.0, 0.0, 0.0], [0.3, 0.0, 0.0]])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let source = speech_like(8192, fs, &mut rng);
    let lagged = fractional_delay(&source, 7.0 / fs, fs)?;
    let mut channels = vec![lagged, source];
    for ch in &mut channels {
        let scale = (ch.iter().map(|x| x * x).sum::<f64>() / ch.len() as f64).sqrt();
        for x in ch.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *x += 0.05 * scale * n;
        }
    }

    let cfg = StftConfig {
        sample_rate: fs,
        ..StftConfig::default()
    };
    let resolution = 1.0 / (4.0 * fs);
    for frame in stft(&channels, &cfg)? {
        let g = GccCorrelation::from_frame(&frame, (0, 1), &cfg);
        let est = tdoa_estimate(&g, &geometry, geometry.speed_of_sound(), resolution)?;
        println!(
            "frame {}: tau = {:+7.1} us ({:+5.2} samples), peak {:.1}",
            frame.frame_index,
            est.tau_hat * 1e6,
            est.tau_hat * fs,
            est.peak_value
        );
    }
    Ok(())
}
