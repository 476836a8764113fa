//! Property tests against independent oracles.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use doa::geometry::{
    select_pairs, steering_delays, steering_vector, ArrayGeometry, Direction, DoaGrid,
    ElevationMode,
};
use doa::mccphat::{
    mcc_phat_log_score, mcc_phat_score, FlooredCorrelation, GccCorrelation, MccPhatConfig,
    MccPhatEstimator,
};
use doa::metrics::{angular_error, ospa_rmse, MatchedPair, OspaConfig};
use doa::spectral::{csd, phat_weight, stft, SpectralFrame, StftConfig, Window};
use doa::subspace::{covariance, hermitian_eig, split_subspace, CMatrix};
use doa::synth::circular_delay;

fn direction() -> impl Strategy<Value = Direction> {
    (-179.999f64..=180.0, -90.0f64..=90.0).prop_map(|(a, e)| Direction::new(a, e).unwrap())
}

/// Microphones on a coarse lattice so no two coincide.
fn geometry(max_mics: usize) -> impl Strategy<Value = ArrayGeometry> {
    proptest::collection::btree_set((-20i32..20, -20i32..20, -4i32..4), 2..=max_mics).prop_map(
        |cells| {
            let mics = cells
                .into_iter()
                .map(|(x, y, z)| [x as f64 * 0.01, y as f64 * 0.01, z as f64 * 0.01])
                .collect();
            ArrayGeometry::new("lattice", mics).unwrap()
        },
    )
}

fn complex() -> impl Strategy<Value = Complex64> {
    (-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im))
}

fn hermitian(max: usize) -> impl Strategy<Value = CMatrix> {
    (2..=max).prop_flat_map(|n| {
        proptest::collection::vec(complex(), n * n).prop_map(move |v| {
            let a = DMatrix::from_vec(n, n, v);
            (&a + a.adjoint()) * Complex64::new(0.5, 0.0)
        })
    })
}

fn frames_from(snapshots: &[Vec<Complex64>]) -> Vec<SpectralFrame> {
    snapshots
        .iter()
        .enumerate()
        .map(|(k, x)| SpectralFrame {
            coeffs: x.iter().map(|&v| vec![v]).collect(),
            frame_index: k,
            time: k as f64,
        })
        .collect()
}

proptest! {
    // --- geometry -------------------------------------------------------------

    #[test]
    fn unit_vector_has_unit_norm(d in direction()) {
        let u = d.unit_vector();
        let norm = (u[0] * u[0] + u[1] * u[1] + u[2] * u[2]).sqrt();
        prop_assert!((norm - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn delay_differences_survive_translation(
        geom in geometry(8),
        d in direction(),
        shift in proptest::array::uniform3(-5.0f64..5.0),
    ) {
        let moved: Vec<_> = geom
            .mics()
            .iter()
            .map(|m| [m[0] + shift[0], m[1] + shift[1], m[2] + shift[2]])
            .collect();
        let moved = ArrayGeometry::new("moved", moved).unwrap();
        let a = steering_delays(&geom, &d, 343.0);
        let b = steering_delays(&moved, &d, 343.0);
        for i in 0..a.len() {
            for j in 0..a.len() {
                prop_assert!(((a[i] - a[j]) - (b[i] - b[j])).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn steering_vector_at_dc_is_all_ones(delays in proptest::collection::vec(-1.0f64..1.0, 1..16)) {
        for z in steering_vector(&delays, 0.0) {
            prop_assert_eq!(z, Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn steering_vector_has_unit_magnitude(
        delays in proptest::collection::vec(-1e-3f64..1e-3, 1..16),
        omega in 0.0f64..30_000.0,
    ) {
        for (z, &tau) in steering_vector(&delays, omega).iter().zip(&delays) {
            prop_assert!((z.norm() - 1.0).abs() <= 1e-12);
            prop_assert!((z - Complex64::from_polar(1.0, -omega * tau)).norm() <= 1e-12);
        }
    }

    #[test]
    fn pair_selection_matches_brute_force(geom in geometry(12), f_max in 500.0f64..10_000.0) {
        let threshold = 343.0 / f_max;
        let m = geom.mics();
        let mut expected = Vec::new();
        for i in 0..m.len() {
            for j in i + 1..m.len() {
                let d2: f64 = (0..3).map(|k| (m[i][k] - m[j][k]).powi(2)).sum();
                if d2.sqrt() < threshold {
                    expected.push((i, j));
                }
            }
        }
        match select_pairs(&geom, 343.0, f_max) {
            Ok(set) => prop_assert_eq!(set.pairs(), expected.as_slice()),
            Err(doa::Error::EmptyPairSet { .. }) => prop_assert!(expected.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    // --- spectral --------------------------------------------------------------

    #[test]
    fn phat_bins_have_unit_magnitude(values in proptest::collection::vec(complex(), 1..200)) {
        let cs = doa::spectral::CrossSpectrum { values, pair: (0, 1), frame_index: 0 };
        for z in phat_weight(&cs).values {
            prop_assert!(z.norm() == 0.0 || (z.norm() - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn csd_phase_is_linear_in_a_circular_delay(
        seed in any::<u64>(),
        shift in -20i32..=20,
        bin in 1usize..63,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n = 128;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        // oracle: y[t] = x[t - shift] by index arithmetic
        let y: Vec<f64> = (0..n).map(|t| x[(t as i32 - shift).rem_euclid(n as i32) as usize]).collect();
        let cfg = StftConfig {
            frame_len: n,
            hop: n,
            window: Window::Rectangular,
            sample_rate: n as f64,
            band: (0.0, n as f64 / 2.0),
        };
        let frames = stft(&[y, x], &cfg).unwrap();
        let s = csd(&frames[0], (0, 1), &cfg).values[bin];
        prop_assume!(s.norm() > 1e-6);
        let expected = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * bin as f64 * shift as f64 / n as f64);
        prop_assert!((s / s.norm() - expected).norm() <= 1e-9);
    }

    // --- subspace --------------------------------------------------------------

    #[test]
    fn eigendecomposition_invariants(r in hermitian(12)) {
        let n = r.nrows();
        let eig = hermitian_eig(&r).unwrap();
        let norm = r.norm();
        prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        let v = &eig.eigenvectors;
        let lambda = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            n,
            eig.eigenvalues.iter().map(|&l| Complex64::new(l, 0.0)),
        ));
        prop_assert!((v * lambda * v.adjoint() - &r).norm() <= 1e-8 * norm.max(1e-300));
        prop_assert!((v.adjoint() * v - DMatrix::identity(n, n)).norm() <= 1e-8);
        for k in 0..n {
            let col = v.column(k);
            let (idx, _) = col
                .iter()
                .enumerate()
                .fold((0, -1.0), |best, (i, z)| if z.norm() > best.1 + 1e-12 { (i, z.norm()) } else { best });
            prop_assert!(col[idx].im.abs() <= 1e-12 && col[idx].re > 0.0);
        }
    }

    #[test]
    fn eigendecomposition_is_deterministic(r in hermitian(8)) {
        prop_assert_eq!(hermitian_eig(&r).unwrap(), hermitian_eig(&r).unwrap());
    }

    #[test]
    fn split_bases_are_orthogonal(r in hermitian(10), q in 1usize..9) {
        let n = r.nrows();
        prop_assume!(q < n);
        let split = split_subspace(&hermitian_eig(&r).unwrap(), q).unwrap();
        prop_assert_eq!(split.signal.ncols(), q);
        prop_assert_eq!(split.noise.ncols(), n - q);
        prop_assert!((split.signal.adjoint() * &split.noise).norm() <= 1e-8);
    }

    #[test]
    fn covariance_is_linear_over_windows(
        snaps in proptest::collection::vec(proptest::collection::vec(complex(), 4), 2..20),
        cut in 1usize..19,
    ) {
        let cut = cut.min(snaps.len() - 1);
        let frames = frames_from(&snaps);
        let all = covariance(&frames, 0, 0..frames.len()).unwrap();
        let a = covariance(&frames, 0, 0..cut).unwrap();
        let b = covariance(&frames, 0, cut..frames.len()).unwrap();
        let weighted = (a.matrix * Complex64::from(cut as f64)
            + b.matrix * Complex64::from((frames.len() - cut) as f64))
            / Complex64::from(frames.len() as f64);
        prop_assert!((all.matrix - weighted).norm() <= 1e-12);
        prop_assert_eq!(all.frames_averaged, frames.len());
    }

    #[test]
    fn covariance_is_hermitian_psd(
        snaps in proptest::collection::vec(proptest::collection::vec(complex(), 5), 1..12),
    ) {
        let frames = frames_from(&snaps);
        let r = covariance(&frames, 0, 0..frames.len()).unwrap().matrix;
        prop_assert!((&r - r.adjoint()).norm() <= 1e-10);
        let trace: f64 = (0..5).map(|i| r[(i, i)].re).sum();
        for l in hermitian_eig(&r).unwrap().eigenvalues {
            prop_assert!(l >= -1e-8 * trace);
        }
    }

    // --- mccphat ---------------------------------------------------------------

    #[test]
    fn swapped_pair_mirrors_correlation(
        weights in proptest::collection::vec(complex(), 65),
        tau in -1e-3f64..1e-3,
    ) {
        let cfg = StftConfig { frame_len: 128, hop: 64, sample_rate: 16_000.0, band: (0.0, 8000.0), ..StftConfig::default() };
        let cs = doa::spectral::CrossSpectrum { values: weights, pair: (0, 1), frame_index: 0 };
        let g = GccCorrelation::new(phat_weight(&cs), &cfg);
        prop_assert!((g.correlation_at(tau) - g.swapped().correlation_at(-tau)).abs() <= 1e-9);
    }

    #[test]
    fn log_score_matches_product_and_is_order_free(
        seed in any::<u64>(),
        az in -179.0f64..180.0,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let geom = ArrayGeometry::uniform_circular(6, 0.04).unwrap();
        let cfg = StftConfig { sample_rate: 16_000.0, ..StftConfig::default() };
        // shared source plus independent noise keeps every pair correlated
        let common: Vec<f64> = (0..2048).map(|_| rng.random_range(-1.0..1.0)).collect();
        let channels: Vec<Vec<f64>> = (0..6)
            .map(|_| common.iter().map(|c| c + rng.random_range(-1.0..1.0)).collect())
            .collect();
        let frame = &stft(&channels, &cfg).unwrap()[0];
        let pairs = select_pairs(&geom, 343.0, 4000.0).unwrap();
        let correlations: Vec<_> = pairs
            .pairs()
            .iter()
            .map(|&p| FlooredCorrelation::new(GccCorrelation::from_frame(frame, p, &cfg), 0.08 / 343.0, 1.0 / 64_000.0))
            .collect();
        let delays = steering_delays(&geom, &Direction::new(az, 0.0).unwrap(), 343.0);
        let log = mcc_phat_log_score(&correlations, &delays);
        let product: f64 = correlations
            .iter()
            .map(|c| c.floored_at(delays[c.gcc.pair.0] - delays[c.gcc.pair.1]))
            .product();
        prop_assert!(product > 0.0);
        prop_assert!((log - product.ln()).abs() <= 1e-9 * log.abs().max(1.0));
        prop_assert!((mcc_phat_score(&correlations, &delays) / product - 1.0).abs() <= 1e-9);

        let mut reversed = correlations.clone();
        reversed.reverse();
        let swapped: Vec<_> = correlations
            .iter()
            .map(|c| FlooredCorrelation { gcc: c.gcc.swapped(), floor: c.floor })
            .collect();
        prop_assert!((mcc_phat_log_score(&reversed, &delays) - log).abs() <= 1e-12 * log.abs().max(1.0));
        prop_assert!((mcc_phat_log_score(&swapped, &delays) - log).abs() <= 1e-9 * log.abs().max(1.0));

        // dropping a pair whose floored score is below one cannot lower the total
        for k in 0..correlations.len() {
            let c = &correlations[k];
            if c.floored_at(delays[c.gcc.pair.0] - delays[c.gcc.pair.1]) < 1.0 {
                let mut fewer = correlations.clone();
                fewer.remove(k);
                prop_assert!(mcc_phat_log_score(&fewer, &delays) >= log);
            }
        }
    }

    // --- metrics ---------------------------------------------------------------

    #[test]
    fn angular_error_is_a_metric_on_the_circle(
        a in -179.9f64..180.0,
        b in -179.9f64..180.0,
        c in -179.9f64..180.0,
    ) {
        let e = |x, y| angular_error(x, y, true);
        prop_assert!(e(a, b) >= 0.0 && e(a, b) <= 180.0);
        prop_assert_eq!(e(a, b), e(b, a));
        prop_assert!(e(a, c) <= e(a, b) + e(b, c) + 1e-9);
        prop_assert!(e(a, a) == 0.0);
    }

    #[test]
    fn ospa_is_bounded_and_order_free(
        errors in proptest::collection::vec((-179.0f64..180.0, -179.0f64..180.0, -90.0f64..90.0, -90.0f64..90.0), 1..60),
        cutoff in 0.5f64..90.0,
        power in 1.0f64..4.0,
    ) {
        let pairs: Vec<MatchedPair> = errors
            .iter()
            .enumerate()
            .map(|(k, &(ea, ta, ee, te))| MatchedPair {
                time: k as f64,
                estimate_azimuth: ea,
                estimate_elevation: ee,
                truth_azimuth: ta,
                truth_elevation: te,
            })
            .collect();
        let cfg = OspaConfig { cutoff, power };
        let forward = ospa_rmse(&pairs, &cfg).unwrap();
        prop_assert!(forward.rmse_azimuth <= cutoff + 1e-12);
        prop_assert!(forward.rmse_elevation <= cutoff + 1e-12);
        let mut reversed = pairs.clone();
        reversed.reverse();
        let backward = ospa_rmse(&reversed, &cfg).unwrap();
        prop_assert!((forward.rmse_azimuth - backward.rmse_azimuth).abs() <= 1e-12);
        prop_assert!((forward.rmse_elevation - backward.rmse_elevation).abs() <= 1e-12);
    }

    #[test]
    fn ospa_with_huge_cutoff_is_plain_rmse(errors in proptest::collection::vec(-179.0f64..180.0, 1..100)) {
        let pairs: Vec<MatchedPair> = errors
            .iter()
            .enumerate()
            .map(|(k, &az)| MatchedPair {
                time: k as f64,
                estimate_azimuth: az,
                estimate_elevation: 0.0,
                truth_azimuth: 0.0,
                truth_elevation: 0.0,
            })
            .collect();
        let result = ospa_rmse(&pairs, &OspaConfig { cutoff: 1e6, power: 2.0 }).unwrap();
        let plain = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
        prop_assert!((result.rmse_azimuth - plain).abs() <= 1e-12);
    }

    // --- synth -----------------------------------------------------------------

    #[test]
    fn circular_delay_preserves_energy(
        signal in proptest::collection::vec(-1.0f64..1.0, 1..400),
        shift in -50.0f64..50.0,
    ) {
        let mut signal = signal;
        if signal.len() % 2 == 0 {
            signal.push(0.5);
        }
        let out = circular_delay(&signal, shift / 1000.0, 1000.0);
        let e_in: f64 = signal.iter().map(|x| x * x).sum();
        let e_out: f64 = out.iter().map(|x| x * x).sum();
        prop_assert!((e_in - e_out).abs() <= 1e-9 * e_in.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn music_argmax_ignores_covariance_scale(seed in any::<u64>(), scale in 1e-6f64..1e6) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let geom = ArrayGeometry::uniform_circular(6, 0.05).unwrap();
        let grid = Arc::new(DoaGrid::azimuth_elevation(5.0, ElevationMode::Fixed(0.0)).unwrap());
        let cfg = StftConfig { sample_rate: 16_000.0, ..StftConfig::default() };
        let channels: Vec<Vec<f64>> = (0..6)
            .map(|_| (0..4096).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        let frames = stft(&channels, &cfg).unwrap();
        let scaled: Vec<Vec<f64>> = channels.iter().map(|c| c.iter().map(|x| x * scale.sqrt()).collect()).collect();
        let scaled_frames = stft(&scaled, &cfg).unwrap();
        let music = doa::subspace::MusicEstimator::new(&geom, grid, cfg, Default::default()).unwrap();
        prop_assert_eq!(
            music.spectrum(&frames, 1).unwrap().argmax(),
            music.spectrum(&scaled_frames, 1).unwrap().argmax()
        );
    }

    #[test]
    fn mcc_phat_spectrum_depends_only_on_delay_differences(seed in any::<u64>()) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, StandardNormal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        // identical channels: every direction with equal pair delays scores the same
        let geom = ArrayGeometry::uniform_circular(8, 0.05).unwrap();
        let grid = Arc::new(DoaGrid::azimuth_elevation(10.0, ElevationMode::Full { step_deg: 10.0 }).unwrap());
        let cfg = StftConfig { sample_rate: 16_000.0, ..StftConfig::default() };
        let x: Vec<f64> = (0..2048).map(|_| StandardNormal.sample(&mut rng)).collect();
        let frame = &stft(&vec![x; 8], &cfg).unwrap()[0];
        let pairs = select_pairs(&geom, 343.0, 4000.0).unwrap();
        let mcc = MccPhatEstimator::new(&geom, pairs, grid.clone(), cfg, MccPhatConfig::default()).unwrap();
        let spectrum = mcc.spectrum(frame);
        for (k, d) in grid.directions().iter().enumerate() {
            if d.elevation() > 0.0 {
                // planar array: the mirror below the plane has the same delays
                let mirror = grid
                    .directions()
                    .iter()
                    .position(|m| m.azimuth() == d.azimuth() && m.elevation() == -d.elevation())
                    .unwrap();
                prop_assert!((spectrum.log_scores[k] - spectrum.log_scores[mirror]).abs() <= 1e-9);
            }
        }
    }
}
