use super::*;
use core::f64::consts::PI;

fn tone(grid: &UniformGrid, k: f64) -> Vec<f64> {
    grid.points().iter().map(|x| (k * PI * x).sin()).collect()
}

#[test]
fn constant_signal_jumps_at_zero() {
    let grid = UniformGrid::domain(64);
    let c = ncpsd(&grid, &vec![2.5; 64], 0).unwrap();
    assert!((c.ncpsd[0] - 1.0).abs() < 1e-12);
    assert!(c.ncpsd.iter().all(|&v| (v - 1.0).abs() < 1e-12));
}

#[test]
fn pure_tone_steps_at_its_bin() {
    let grid = UniformGrid::domain(2048);
    let c = ncpsd(&grid, &tone(&grid, 5.0), 0).unwrap();
    // omega_m = pi m on (-1, 1): the tone sits in bin 5
    assert!(c.at(5.0 * PI - 1e-9) < 1e-12);
    assert!((c.at(5.0 * PI) - 1.0).abs() < 1e-12);
    let (lo, hi) = select_bandwidth(&c, 0.05).unwrap();
    assert!((lo - 5.0 * PI).abs() < 1e-9 && (hi - 5.0 * PI).abs() < 1e-9);
}

#[test]
fn negative_index_damps_high_tones() {
    let grid = UniformGrid::domain(1024);
    let g: Vec<f64> = tone(&grid, 2.0).iter().zip(tone(&grid, 20.0)).map(|(a, b)| a + b).collect();
    let flat = ncpsd(&grid, &g, 0).unwrap();
    assert!((flat.at(2.0 * PI) - 0.5).abs() < 1e-12);
    let damped = ncpsd(&grid, &g, -2).unwrap();
    let lo = (1.0 + (2.0 * PI).powi(2)).powi(-2);
    let hi = (1.0 + (20.0 * PI).powi(2)).powi(-2);
    let ratio = hi / lo;
    assert!((1.0 - damped.at(2.0 * PI) - ratio / (1.0 + ratio)).abs() < 1e-12);
    assert!(ratio < 3e-4);
}

#[test]
fn zero_signal_is_degenerate() {
    let grid = UniformGrid::domain(32);
    assert!(matches!(ncpsd(&grid, &[0.0; 32], 0), Err(Error::DegenerateSpectrum)));
}

#[test]
fn non_uniform_points_are_rejected() {
    let mut pts: Vec<f64> = UniformGrid::domain(32).points().to_vec();
    pts[7] += 1e-3;
    assert!(matches!(UniformGrid::from_points(&pts), Err(Error::Contract(_))));
}

#[test]
fn short_or_odd_grids_are_rejected() {
    let g = UniformGrid::domain(8);
    assert!(ncpsd(&g, &[1.0; 8], 0).is_err());
    let g = UniformGrid::domain(17);
    assert!(ncpsd(&g, &[1.0; 17], 0).is_err());
}

#[test]
fn band_contains_dominant_frequency() {
    let grid = UniformGrid::domain(DEFAULT_GRID);
    let c = ncpsd(&grid, &tone(&grid, 40.0), -1).unwrap();
    let (lo, hi) = select_bandwidth(&c, DEFAULT_ALPHA).unwrap();
    assert!(lo <= 40.0 * PI && 40.0 * PI <= hi);
}

#[test]
fn alpha_outside_range_is_rejected() {
    let grid = UniformGrid::domain(64);
    let c = ncpsd(&grid, &tone(&grid, 3.0), 0).unwrap();
    assert!(select_bandwidth(&c, 0.0).is_err());
    assert!(select_bandwidth(&c, 0.5).is_err());
    let (lo, hi) = select_bandwidth(&c, 0.4999).unwrap();
    assert!(lo <= hi);
}

#[test]
fn frequency_sampling_is_log_uniform() {
    let e2 = 2f64.exp();
    let k = sample_frequencies(1.0, e2, 100_000, 9).unwrap();
    assert!(k.iter().all(|&v| (1.0..=e2).contains(&v)));
    let mean = k.iter().map(|v| v.ln()).sum::<f64>() / k.len() as f64;
    // ln kappa ~ U(0, 2): mean 1, std of the mean 0.00183
    assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
}

#[test]
fn frequency_band_errors() {
    assert!(sample_frequencies(0.0, 1.0, 3, 0).is_err());
    assert!(sample_frequencies(2.0, 1.0, 3, 0).is_err());
    assert!(sample_frequencies(1.0, f64::INFINITY, 3, 0).is_err());
}

#[test]
fn strategy_table() {
    let d = |formulation, phase| PhaseDescriptor { formulation, phase };
    assert_eq!(strategy(d(Formulation::Weak, Phase::Initial)), (SourceTag::SourceTerm, -1));
    assert_eq!(strategy(d(Formulation::Weak, Phase::Correction(0))), (SourceTag::StrongResidual, -1));
    assert_eq!(strategy(d(Formulation::Weak, Phase::Correction(3))), (SourceTag::PriorWeakResidual, 1));
    assert_eq!(strategy(d(Formulation::UltraWeak, Phase::Initial)), (SourceTag::SourceTerm, -2));
    assert_eq!(
        strategy(d(Formulation::UltraWeak, Phase::Correction(1))),
        (SourceTag::PriorCorrectionProxy, 0)
    );
}

#[test]
fn missing_signal_is_a_sequencing_error() {
    let grid = UniformGrid::domain(64);
    let desc = PhaseDescriptor {
        formulation: Formulation::Weak,
        phase: Phase::Correction(1),
    };
    let arts = SignalArtifacts {
        source: Some(tone(&grid, 1.0)),
        ..Default::default()
    };
    assert!(matches!(init_plan_for_phase(desc, &arts, &grid, 0.05), Err(Error::Sequencing(_))));
}

#[test]
fn dipole_proxy_pairs_to_minus_slope() {
    let grid = UniformGrid::domain(4096);
    let g = dirac_prime_proxy(&grid).unwrap();
    let h = grid.spacing();
    let pair: f64 = g.iter().zip(grid.points()).map(|(a, x)| h * a * (3.0 * x).sin()).sum();
    assert!((pair + 3.0).abs() < 1e-2);
}

#[test]
fn phase_index_roundtrip() {
    for i in 0..5 {
        assert_eq!(Phase::from_index(i).index(), i);
    }
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn curve_is_monotone_and_scale_free(
            vals in proptest::collection::vec(-5.0f64..5.0, 64),
            scale in 0.01f64..100.0,
            s in -2i32..=2,
        ) {
            prop_assume!(vals.iter().any(|v| v.abs() > 1e-3));
            let grid = UniformGrid::domain(64);
            let a = ncpsd(&grid, &vals, s).unwrap();
            let scaled: Vec<f64> = vals.iter().map(|v| v * scale).collect();
            let b = ncpsd(&grid, &scaled, s).unwrap();
            for w in a.ncpsd.windows(2) {
                prop_assert!(w[1] >= w[0]);
            }
            prop_assert_eq!(*a.ncpsd.last().unwrap(), 1.0);
            for (x, y) in a.ncpsd.iter().zip(&b.ncpsd) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let (lo, hi) = select_bandwidth(&a, 0.05).unwrap();
            prop_assert!(0.0 < lo && lo <= hi);
        }
    }
}
