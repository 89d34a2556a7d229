use std::f64::consts::{FRAC_1_SQRT_2, PI, TAU};

use approx::assert_abs_diff_eq;
use greenmachine::network::{
    random_gap_errors, shuffle_stage, stage_count, build_recursive,
};
use greenmachine::{
    build, build_butler, build_hadamard, build_ideal, build_with_errors, coupler_matrix, Complex64,
    CouplerSpec, Flavor, NetworkSpec, PhaseLayer, TransferMatrix,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn from_rows(scale: f64, rows: &[&[Complex64]]) -> TransferMatrix {
    let rows: Vec<Vec<Complex64>> = rows.iter().map(|r| r.iter().map(|z| z * scale).collect()).collect();
    TransferMatrix::from_rows(&rows).unwrap()
}

/// Dense product of explicit per-stage matrices, assembled entry by entry.
fn brute_force(n: usize, couplers: &dyn Fn(usize, usize) -> CouplerSpec, layers: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let k = stage_count(n).unwrap();
    let zero = c(0.0, 0.0);
    let matmul = |a: &Vec<Vec<Complex64>>, b: &Vec<Vec<Complex64>>| -> Vec<Vec<Complex64>> {
        (0..n)
            .map(|i| (0..n).map(|j| (0..n).map(|m| a[i][m] * b[m][j]).sum()).collect())
            .collect()
    };
    let diag = |phases: &[f64]| -> Vec<Vec<Complex64>> {
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { Complex64::from_polar(1.0, phases[i]) } else { zero }).collect())
            .collect()
    };
    let mut acc: Vec<Vec<Complex64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { c(1.0, 0.0) } else { zero }).collect())
        .collect();
    if !layers.is_empty() {
        acc = diag(&layers[0]);
    }
    for s in 0..k {
        let bit = 1 << s;
        let mut stage = vec![vec![zero; n]; n];
        let mut idx = 0;
        for lo in 0..n {
            if lo & bit != 0 {
                continue;
            }
            let hi = lo | bit;
            let cs = couplers(s, idx);
            idx += 1;
            stage[lo][lo] = c(cs.t, 0.0);
            stage[lo][hi] = c(0.0, cs.r);
            stage[hi][lo] = c(0.0, cs.r);
            stage[hi][hi] = c(cs.t, 0.0);
        }
        acc = matmul(&stage, &acc);
        if !layers.is_empty() {
            acc = matmul(&diag(&layers[s + 1]), &acc);
        }
    }
    acc
}

fn max_diff(a: &TransferMatrix, b: &[Vec<Complex64>]) -> f64 {
    let mut worst = 0.0f64;
    for (i, row) in b.iter().enumerate() {
        for (j, z) in row.iter().enumerate() {
            worst = worst.max((a.get(i, j) - z).norm());
        }
    }
    worst
}

fn sylvester(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 }).collect())
        .collect()
}

#[test]
fn symmetric_coupler() {
    let m = coupler_matrix(CouplerSpec::ideal()).unwrap();
    let h = FRAC_1_SQRT_2;
    let expected = from_rows(h, &[&[c(1.0, 0.0), c(0.0, 1.0)], &[c(0.0, 1.0), c(1.0, 0.0)]]);
    assert!(m.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn bar_state_coupler() {
    let m = coupler_matrix(CouplerSpec::new(1.0, 0.0).unwrap()).unwrap();
    assert_eq!(m.max_abs_diff(&TransferMatrix::identity(2)), 0.0);
}

#[test]
fn imperfect_coupler_entries() {
    let r = (1.0f64 - 0.53 * 0.53).sqrt();
    let spec = CouplerSpec::new(0.53, r).unwrap();
    assert!(spec.is_lossless());
    let m = coupler_matrix(spec).unwrap();
    assert_eq!(m.get(0, 0), c(0.53, 0.0));
    assert_eq!(m.get(1, 1), c(0.53, 0.0));
    assert_eq!(m.get(0, 1), c(0.0, r));
    assert_eq!(m.get(1, 0), c(0.0, r));
}

#[test]
fn ideal_four_port() {
    let i = c(0.0, 1.0);
    let o = c(1.0, 0.0);
    let expected = from_rows(0.5, &[&[o, i, i, -o], &[i, o, -o, i], &[i, -o, o, i], &[-o, i, i, o]]);
    assert!(build_ideal(4).unwrap().max_abs_diff(&expected) < 1e-10);
}

/// The printed first factor of the 4-port product lists rows 2 and 4 of the
/// recursion step in swapped order; the printed product only follows without
/// that swap.
#[test]
fn printed_first_factor_is_recursion_step_with_swapped_rows() {
    let h = FRAC_1_SQRT_2;
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    let step = shuffle_stage(4, &a2).unwrap();
    let (o, z, i) = (c(h, 0.0), c(0.0, 0.0), c(0.0, h));
    let printed = from_rows(1.0, &[&[o, z, i, z], &[z, i, z, o], &[i, z, o, z], &[z, o, z, i]]);
    let swap = TransferMatrix::permutation(&[0, 3, 2, 1]);
    assert!((&swap * &step).max_abs_diff(&printed) < 1e-15);
    let second = TransferMatrix::identity(2).kron(&a2);
    assert!((&step * &second).max_abs_diff(&build_ideal(4).unwrap()) < 1e-15);
}

#[test]
fn shuffle_stage_rejects_wrong_half() {
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    assert!(shuffle_stage(8, &a2).is_err());
    assert!(shuffle_stage(3, &a2).is_err());
}

#[test]
fn two_port_builds_are_the_element() {
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    assert_eq!(build_recursive(2, &a2).unwrap(), a2);
    assert!(build_ideal(2).unwrap().max_abs_diff(&a2) < 1e-15);
}

#[test]
fn recursion_matches_stage_product() {
    let ideal = |_: usize, _: usize| CouplerSpec::ideal();
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    for n in [4, 8, 16] {
        let oracle = brute_force(n, &ideal, &[]);
        assert!(max_diff(&build_ideal(n).unwrap(), &oracle) < 1e-12);
        assert!(max_diff(&build_recursive(n, &a2).unwrap(), &oracle) < 1e-12);
    }
}

#[test]
fn phase_errors_and_imperfect_couplers_match_stage_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 8;
    let k = 3;
    let couplers: Vec<Vec<CouplerSpec>> = (0..k)
        .map(|s| (0..n / 2).map(|j| CouplerSpec::from_power_split(0.45 + 0.02 * (s + j) as f64).unwrap()).collect())
        .collect();
    let gaps = random_gap_errors(n, &mut rng).unwrap();
    let spec = NetworkSpec::ideal(n).unwrap().with_errors(&gaps, Some(&couplers)).unwrap();
    let mut layers = vec![vec![0.0; n]; k + 1];
    for (g, layer) in gaps.iter().enumerate() {
        layers[g + 1] = layer.phases.clone();
    }
    let oracle = brute_force(n, &|s, j| couplers[s][j], &layers);
    assert!(max_diff(&build(&spec).unwrap(), &oracle) < 1e-12);
}

#[test]
fn ideal_entries_have_equal_modulus() {
    for n in [2, 4, 8, 16, 32, 64] {
        let a = build_ideal(n).unwrap();
        let expect = 1.0 / (n as f64).sqrt();
        for r in a.rows() {
            for z in r {
                assert_abs_diff_eq!(z.norm(), expect, epsilon = 1e-12);
            }
        }
        assert!(a.unitarity_residual() < 1e-10);
    }
}

#[test]
fn hadamard_two_port() {
    let expected = from_rows(FRAC_1_SQRT_2, &[&[c(1.0, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(-1.0, 0.0)]]);
    assert!(build_hadamard(2).unwrap().max_abs_diff(&expected) < 1e-10);
}

#[test]
fn hadamard_matches_sylvester() {
    for n in [4, 8, 16, 32] {
        let a = build_hadamard(n).unwrap();
        let s = sylvester(n);
        let scale = 1.0 / (n as f64).sqrt();
        for (i, row) in s.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                let z = a.get(i, j);
                assert!(z.im.abs() < 1e-12, "n={n} ({i},{j}) imaginary residue {}", z.im);
                assert_abs_diff_eq!(z.re, v * scale, epsilon = 1e-12);
            }
        }
    }
}

/// Asymmetric stage built from the symmetric coupler and two phase diagonals.
#[test]
fn asymmetric_stage_decomposition() {
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    let out = TransferMatrix::phase_diagonal(&[-PI / 2.0, PI]);
    let inp = TransferMatrix::phase_diagonal(&[PI / 2.0, 0.0]);
    let h = &(&out * &a2) * &inp;
    assert!(h.max_abs_diff(&build_hadamard(2).unwrap()) < 1e-15);
}

#[test]
fn butler_two_port() {
    let h = FRAC_1_SQRT_2;
    let expected = from_rows(1.0, &[&[c(h, 0.0), c(0.0, h)], &[c(h, 0.0), c(0.0, -h)]]);
    assert!(build_butler(2).unwrap().max_abs_diff(&expected) < 1e-10);
}

/// Corrected Butler stage: diag(−i, −1) · A₂ · diag(i, i).
#[test]
fn butler_stage_decomposition() {
    let a2 = coupler_matrix(CouplerSpec::ideal()).unwrap();
    let out = TransferMatrix::from_rows(&[vec![c(0.0, -1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]]).unwrap();
    let inp = TransferMatrix::from_rows(&[vec![c(0.0, 1.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]]).unwrap();
    assert!((&(&out * &a2) * &inp).max_abs_diff(&build_butler(2).unwrap()) < 1e-15);
}

#[test]
fn butler_rows_follow_dft() {
    for n in [4, 8, 16, 32] {
        let a = build_butler(n).unwrap();
        assert!(a.unitarity_residual() < 1e-10);
        for k in 0..n {
            let first = a.get(k, 0);
            assert_abs_diff_eq!(first.norm(), 1.0 / (n as f64).sqrt(), epsilon = 1e-12);
            for m in 0..n {
                let expected = first * Complex64::from_polar(1.0, -TAU * (k * m % n) as f64 / n as f64);
                assert!((a.get(k, m) - expected).norm() < 1e-12, "n={n} row {k} col {m}");
            }
        }
    }
}

#[test]
fn zero_errors_reproduce_flavor() {
    for flavor in [Flavor::Ideal, Flavor::Hadamard, Flavor::Butler] {
        for n in [4, 8, 16] {
            let base = NetworkSpec::for_flavor(flavor, n).unwrap();
            let k = stage_count(n).unwrap();
            let zeros = vec![PhaseLayer::zeros(n); k - 1];
            assert_eq!(build_with_errors(&base, &zeros, None).unwrap(), build(&base).unwrap());
        }
    }
}

/// `A₄ = S₁ · diag(e^{iφ}) · S₀` with the stages written out by hand.
#[test]
fn four_port_phase_error_structure() {
    let phi = [0.3, -1.1, 2.5, 0.7];
    let (t, r) = (0.6f64, 0.8f64);
    let coupler = CouplerSpec::new(t, r).unwrap();
    let couplers = vec![vec![coupler; 2]; 2];
    let base = NetworkSpec::ideal(4).unwrap();
    let a = build_with_errors(&base, &[PhaseLayer::new(phi.to_vec())], Some(&couplers)).unwrap();
    let (tt, ir, z) = (c(t, 0.0), c(0.0, r), c(0.0, 0.0));
    let s1 = from_rows(1.0, &[&[tt, z, ir, z], &[z, tt, z, ir], &[ir, z, tt, z], &[z, ir, z, tt]]);
    let s0 = from_rows(1.0, &[&[tt, ir, z, z], &[ir, tt, z, z], &[z, z, tt, ir], &[z, z, ir, tt]]);
    let expected = &(&s1 * &TransferMatrix::phase_diagonal(&phi)) * &s0;
    assert!(a.max_abs_diff(&expected) < 1e-15);
}

#[test]
fn lossy_couplers_keep_columns_orthogonal() {
    let coupler = CouplerSpec::new(0.53, 0.47).unwrap();
    assert!(!coupler.is_lossless());
    let couplers = vec![vec![coupler; 2]; 2];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let gaps = random_gap_errors(4, &mut rng).unwrap();
    let a = build_with_errors(&NetworkSpec::ideal(4).unwrap(), &gaps, Some(&couplers)).unwrap();
    let g = a.gram();
    let expected = (0.53f64 * 0.53 + 0.47 * 0.47).powi(2);
    for i in 0..4 {
        for j in 0..4 {
            if i == j {
                assert_abs_diff_eq!(g.get(i, i).re, expected, epsilon = 1e-12);
            } else {
                assert!(g.get(i, j).norm() < 1e-12);
            }
        }
    }
    assert!(a.unitarity_residual() > 0.01);
    assert!(a.column_orthogonality_residual() < 1e-12);
}

#[test]
fn with_errors_rejects_bad_layers() {
    let base = NetworkSpec::ideal(8).unwrap();
    assert!(base.with_errors(&[PhaseLayer::zeros(8)], None).is_err());
    assert!(base.with_errors(&[PhaseLayer::zeros(8), PhaseLayer::zeros(4)], None).is_err());
    let bad = vec![vec![CouplerSpec { t: 1.5, r: 0.0 }; 4]; 3];
    assert!(base.with_errors(&[PhaseLayer::zeros(8), PhaseLayer::zeros(8)], Some(&bad)).is_err());
}

#[test]
fn spec_json_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let spec = NetworkSpec::butler(8)
        .unwrap()
        .with_errors(&random_gap_errors(8, &mut rng).unwrap(), None)
        .unwrap();
    let text = serde_json::to_string(&spec).unwrap();
    let back: NetworkSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(back, spec);
    assert_eq!(build(&back).unwrap(), build(&spec).unwrap());
}

#[test]
fn minimal_spec_json_parses() {
    let spec: NetworkSpec = serde_json::from_str(r#"{"n": 4, "flavor": "ideal"}"#).unwrap();
    assert_eq!(build(&spec).unwrap(), build_ideal(4).unwrap());
}

fn flavor_strategy() -> impl Strategy<Value = Flavor> {
    prop_oneof![Just(Flavor::Ideal), Just(Flavor::Hadamard), Just(Flavor::Butler), Just(Flavor::Custom)]
}

proptest! {
    #[test]
    fn lossless_builds_are_unitary(flavor in flavor_strategy(), k in 1usize..6, seed in any::<u64>()) {
        let n = 1usize << k;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = NetworkSpec::for_flavor(flavor, n).unwrap();
        let spec = base.with_errors(&random_gap_errors(n, &mut rng).unwrap(), None).unwrap();
        prop_assert!(build(&spec).unwrap().unitarity_residual() < 1e-10);
    }

    #[test]
    fn imperfect_lossless_couplers_stay_unitary(split in 0.4f64..0.6, phi in prop::collection::vec(-PI..PI, 4)) {
        let couplers = vec![vec![CouplerSpec::from_power_split(split).unwrap(); 2]; 2];
        let a = build_with_errors(&NetworkSpec::ideal(4).unwrap(), &[PhaseLayer::new(phi)], Some(&couplers)).unwrap();
        prop_assert!(a.unitarity_residual() < 1e-10);
    }
}
