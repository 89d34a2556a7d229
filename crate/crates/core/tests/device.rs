use std::f64::consts::{PI, TAU};

use approx::assert_abs_diff_eq;
use greenmachine::device::{total_intensity, DEFAULT_BOUNDS};
use greenmachine::network::random_gap_errors;
use greenmachine::{
    build_ideal, extract_codebook, Complex64, CouplerSpec, DeviceModel, Error, IntensityOracle,
    NetworkSpec, NoiseConfig, NoisePreset, PhaseProfile, TransferMatrix,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noiseless(a: TransferMatrix) -> DeviceModel {
    DeviceModel::new(a, NoiseConfig::noiseless()).unwrap()
}

fn random_profile(n: usize, rng: &mut ChaCha8Rng) -> PhaseProfile {
    PhaseProfile::new((0..n).map(|_| rng.random_range(-PI..PI)).collect())
}

/// `|A x̃|²` per port by explicit summation.
fn oracle_intensity(a: &TransferMatrix, x: &PhaseProfile) -> Vec<f64> {
    let n = a.n();
    (0..n)
        .map(|k| {
            let y: Complex64 = (0..n).map(|j| a.get(k, j) * Complex64::from_polar(1.0, x.phases[j])).sum();
            y.norm_sqr()
        })
        .collect()
}

fn noisy() -> NoiseConfig {
    NoiseConfig {
        drift_sigma: 0.02,
        hysteresis_backlash: 0.05,
        visibility: 0.97,
        detector_sigma_rel: 0.01,
        splitting_tolerance: 0.03,
        seed: 42,
    }
}

#[test]
fn codeword_routes_to_its_port() {
    let a = build_ideal(4).unwrap();
    let cb = extract_codebook(&a).unwrap();
    let mut dev = noiseless(a);
    let r = dev.measure(&PhaseProfile::new(cb.codewords[0].phases.clone())).unwrap();
    for (p, v) in r.per_port.iter().enumerate() {
        assert_abs_diff_eq!(*v, if p == 0 { 4.0 } else { 0.0 }, epsilon = 1e-12);
    }
}

#[test]
fn zero_phases_match_matrix_vector_product() {
    let a = build_ideal(4).unwrap();
    let x = PhaseProfile::zeros(4);
    let expected = oracle_intensity(&a, &x);
    let r = noiseless(a).measure(&x).unwrap();
    for (v, e) in r.per_port.iter().zip(expected) {
        assert_abs_diff_eq!(*v, e, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(r.relative.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

#[test]
fn visibility_caps_relative_intensity() {
    let a = build_ideal(4).unwrap();
    let cw = extract_codebook(&a).unwrap().codewords[2].phases.clone();
    let noise = NoiseConfig { visibility: 0.95, ..NoiseConfig::noiseless() };
    let mut dev = DeviceModel::new(a, noise).unwrap();
    let r = dev.measure(&PhaseProfile::new(cw)).unwrap();
    assert_abs_diff_eq!(r.relative[2], (0.95 * 4.0 + 0.05) / 4.0, epsilon = 1e-12);
}

#[test]
fn peak_relative_intensity_falls_with_visibility() {
    let a = build_ideal(4).unwrap();
    let cw = PhaseProfile::new(extract_codebook(&a).unwrap().codewords[1].phases.clone());
    let peaks: Vec<f64> = [1.0, 0.99, 0.97, 0.95]
        .iter()
        .map(|&v| {
            let mut dev = DeviceModel::new(a.clone(), NoiseConfig { visibility: v, ..NoiseConfig::noiseless() }).unwrap();
            dev.measure(&cw).unwrap().relative[1]
        })
        .collect();
    assert_abs_diff_eq!(peaks[0], 1.0, epsilon = 1e-12);
    assert!(peaks.windows(2).all(|w| w[1] < w[0]), "{peaks:?}");
}

#[test]
fn energy_conserved() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let spec = NetworkSpec::butler(8).unwrap().with_errors(&random_gap_errors(8, &mut rng).unwrap(), None).unwrap();
    let mut dev = DeviceModel::from_spec(&spec, NoiseConfig::noiseless()).unwrap();
    for _ in 0..1000 {
        let x = random_profile(8, &mut rng);
        assert_abs_diff_eq!(total_intensity(&mut dev, &x).unwrap(), 8.0, epsilon = 1e-10);
    }
}

#[test]
fn lossy_total_is_gram_quadratic_form() {
    let couplers = vec![vec![CouplerSpec::new(0.53, 0.47).unwrap(); 2]; 2];
    let spec = NetworkSpec::ideal(4).unwrap().with_errors(&[greenmachine::PhaseLayer::zeros(4)], Some(&couplers)).unwrap();
    let mut dev = DeviceModel::from_spec(&spec, NoiseConfig::noiseless()).unwrap();
    let a = dev.matrix().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..50 {
        let x = random_profile(4, &mut rng);
        let field: Vec<Complex64> = x.phases.iter().map(|p| Complex64::from_polar(1.0, *p)).collect();
        let mut quad = Complex64::new(0.0, 0.0);
        for i in 0..4 {
            for j in 0..4 {
                let g: Complex64 = (0..4).map(|m| a.get(m, i).conj() * a.get(m, j)).sum();
                quad += field[i].conj() * g * field[j];
            }
        }
        let total = total_intensity(&mut dev, &x).unwrap();
        assert_abs_diff_eq!(total, quad.re, epsilon = 1e-12);
        assert!(total < 4.0);
    }
}

#[test]
fn two_pi_periodic_in_every_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let spec = NetworkSpec::ideal(4).unwrap().with_errors(&random_gap_errors(4, &mut rng).unwrap(), None).unwrap();
    let mut dev = DeviceModel::from_spec(&spec, NoiseConfig::noiseless()).unwrap();
    for _ in 0..100 {
        let x = random_profile(4, &mut rng);
        let base = dev.measure(&x).unwrap();
        for j in 0..4 {
            let mut y = x.clone();
            y.phases[j] += TAU;
            let shifted = dev.measure(&y).unwrap();
            for (a, b) in base.per_port.iter().zip(&shifted.per_port) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn global_phase_invisible() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut dev = noiseless(build_ideal(8).unwrap());
    for _ in 0..100 {
        let x = random_profile(8, &mut rng);
        let shift = rng.random_range(-3.0..3.0);
        let y = PhaseProfile::new(x.phases.iter().map(|p| p + shift).collect());
        let (a, b) = (dev.measure(&x).unwrap(), dev.measure(&y).unwrap());
        for (p, q) in a.per_port.iter().zip(&b.per_port) {
            assert_abs_diff_eq!(*p, *q, epsilon = 1e-10);
        }
    }
}

#[test]
fn detector_noise_is_unbiased() {
    let a = build_ideal(4).unwrap();
    let x = PhaseProfile::new(vec![0.3, -0.2, 1.1, 0.0]);
    let clean = oracle_intensity(&a, &x);
    let sigma = 0.01;
    let mut dev = DeviceModel::new(a, NoiseConfig { detector_sigma_rel: sigma, seed: 5, ..NoiseConfig::noiseless() }).unwrap();
    let calls = 1000;
    let mut sums = [0.0; 4];
    for _ in 0..calls {
        for (s, v) in sums.iter_mut().zip(dev.measure(&x).unwrap().per_port) {
            *s += v;
        }
    }
    for (s, c) in sums.iter().zip(clean) {
        let mean = s / calls as f64;
        let three_sigma = 3.0 * sigma * c / (calls as f64).sqrt();
        assert!((mean - c).abs() <= three_sigma + 1e-12, "mean {mean} vs {c}");
    }
}

#[test]
fn out_of_bounds_rejected() {
    let mut dev = noiseless(build_ideal(4).unwrap());
    assert_eq!(dev.bounds(), DEFAULT_BOUNDS);
    let x = PhaseProfile::new(vec![0.0, 4.0 * PI + 0.1, 0.0, 0.0]);
    assert!(matches!(dev.measure(&x), Err(Error::OutOfBounds { channel: 1, .. })));
    assert!(dev.measure(&PhaseProfile::zeros(3)).is_err());
    assert_eq!(dev.evaluations(), 0);
}

#[test]
fn same_seed_same_readings() {
    let spec = NetworkSpec::butler(4).unwrap();
    let run = || {
        let mut dev = DeviceModel::from_spec(&spec, noisy()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        (0..200).map(|_| dev.measure(&random_profile(4, &mut rng)).unwrap()).collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn snapshot_restore_replays_exactly() {
    let spec = NetworkSpec::hadamard(4).unwrap();
    let mut dev = DeviceModel::from_spec(&spec, noisy()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let commands: Vec<PhaseProfile> = (0..100).map(|_| random_profile(4, &mut rng)).collect();
    for x in &commands[..40] {
        dev.measure(x).unwrap();
    }
    let state = dev.snapshot();
    let json = serde_json::to_string(&state).unwrap();
    let first: Vec<_> = commands[40..].iter().map(|x| dev.measure(x).unwrap()).collect();

    let mut other = DeviceModel::from_spec(&spec, noisy()).unwrap();
    other.restore(&serde_json::from_str(&json).unwrap()).unwrap();
    let second: Vec<_> = commands[40..].iter().map(|x| other.measure(x).unwrap()).collect();
    assert_eq!(first, second);
    assert_eq!(other.evaluations(), 100);
}

#[test]
fn reset_clears_drift_and_backlash() {
    let mut dev = DeviceModel::from_spec(&NetworkSpec::ideal(4).unwrap(), noisy()).unwrap();
    let x = PhaseProfile::new(vec![0.5; 4]);
    for _ in 0..20 {
        dev.measure(&x).unwrap();
    }
    assert!(dev.drift().iter().any(|d| *d != 0.0));
    dev.reset();
    assert!(dev.drift().iter().all(|d| *d == 0.0));
    assert!(dev.snapshot().actuator.is_none());
}

#[test]
fn reset_noiseless_repeatable() {
    let mut dev = noiseless(build_ideal(4).unwrap());
    let x = PhaseProfile::new(vec![0.1, 0.2, 0.3, 0.4]);
    dev.reset();
    assert_eq!(dev.measure(&x).unwrap(), dev.measure(&x).unwrap());
}

#[test]
fn split_tolerance_redraws_couplers() {
    let spec = NetworkSpec::ideal(8).unwrap();
    let noise = NoiseConfig { splitting_tolerance: 0.03, seed: 3, ..NoiseConfig::noiseless() };
    let dev = DeviceModel::from_spec(&spec, noise).unwrap();
    let realized = dev.realized_spec().unwrap();
    assert_eq!(realized.couplers.len(), 3);
    for c in realized.couplers.iter().flatten() {
        assert!(c.is_lossless());
        assert!((c.t * c.t - 0.5).abs() <= 0.03 + 1e-12);
    }
    assert!(dev.matrix().unitarity_residual() < 1e-10);
    assert!(dev.matrix().max_abs_diff(&build_ideal(8).unwrap()) > 1e-4);
}

#[test]
fn experiment_preset_ranges() {
    for seed in 0..50 {
        let cfg = NoisePreset::Experiment.resolve(seed);
        assert!((0.95..=0.99).contains(&cfg.visibility));
        assert_eq!(cfg.splitting_tolerance, 0.03);
        assert_eq!(cfg.seed, seed);
    }
    assert!(NoisePreset::None.resolve(3).is_noiseless());
}

#[test]
fn noise_config_json_round_trip() {
    let cfg = noisy();
    let back: NoiseConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(back, cfg);
    let bad = NoiseConfig { visibility: 1.5, ..NoiseConfig::noiseless() };
    assert!(DeviceModel::new(build_ideal(2).unwrap(), bad).is_err());
}

proptest! {
    #[test]
    fn relative_sums_to_one(phases in prop::collection::vec(-4.0 * PI..4.0 * PI, 4), seed in any::<u64>()) {
        let mut dev = DeviceModel::from_spec(&NetworkSpec::butler(4).unwrap(), NoiseConfig { seed, ..noisy() }).unwrap();
        let r = dev.measure(&PhaseProfile::new(phases)).unwrap();
        prop_assert!(r.per_port.iter().all(|v| *v >= 0.0));
        prop_assert!((r.relative.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
