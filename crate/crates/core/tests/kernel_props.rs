use kbandit_core::{information_gain, kernel_eval, kernel_matrix, logdet_ratio, spd_factor, KernelSpec};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;

fn points(max_n: usize, d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-1.0f64..1.0, d), 1..=max_n)
}

fn kernel() -> impl Strategy<Value = KernelSpec> {
    prop_oneof![
        Just(KernelSpec::linear()),
        (0.05f64..8.0).prop_map(KernelSpec::gaussian),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kernel_is_exactly_symmetric(k in kernel(), x in prop::collection::vec(-2.0f64..2.0, 4), y in prop::collection::vec(-2.0f64..2.0, 4)) {
        prop_assert_eq!(kernel_eval(&k, &x, &y).unwrap(), kernel_eval(&k, &y, &x).unwrap());
    }

    #[test]
    fn gram_is_positive_semidefinite(k in kernel(), d in 1usize..6, seed in any::<u64>()) {
        let pts = gen_points(seed, 20, d);
        let m = kernel_matrix(&k, &pts, &pts).unwrap();
        let min = SymmetricEigen::new(m).eigenvalues.min();
        prop_assert!(min >= -1e-8, "min eigenvalue {min}");
    }

    #[test]
    fn block_ratios_telescope(k in kernel(), pts in points(24, 3), cuts in prop::collection::vec(0usize..24, 0..5), lambda in 0.1f64..10.0) {
        let mut cuts: Vec<usize> = cuts.into_iter().map(|c| c.min(pts.len())).collect();
        cuts.push(0);
        cuts.push(pts.len());
        cuts.sort_unstable();
        cuts.dedup();
        let total: f64 = cuts
            .windows(2)
            .map(|w| logdet_ratio(&k, lambda, &pts[..w[0]], &pts[w[0]..w[1]]).unwrap())
            .sum();
        let full = 2.0 * information_gain(&k, lambda, &pts).unwrap();
        prop_assert!((total - full).abs() <= 1e-8 * (1.0 + full), "{total} vs {full}");
    }

    #[test]
    fn factor_round_trips(k in kernel(), pts in points(20, 3), ridge in 0.0f64..1.0) {
        let mut m = kernel_matrix(&k, &pts, &pts).unwrap();
        for i in 0..pts.len() {
            m[(i, i)] += ridge;
        }
        let f = spd_factor(&m, 0.0).unwrap();
        let l = f.to_matrix();
        let shifted = &m + DMatrix::identity(pts.len(), pts.len()) * f.jitter();
        let err = (&l * l.transpose() - shifted).norm();
        prop_assert!(err <= 1e-8 * (1.0 + m.norm()), "residual {err}");
    }
}

fn gen_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn duplicated_points_still_factor() {
    let pts = vec![vec![0.3, -0.2]; 12];
    let m = kernel_matrix(&KernelSpec::gaussian(1.0), &pts, &pts).unwrap();
    let f = spd_factor(&m, 0.0).unwrap();
    assert!(f.jitter() > 0.0);
    assert!(f.logdet().is_finite());
}

#[test]
fn information_gain_of_nothing_is_zero() {
    let none: Vec<Vec<f64>> = Vec::new();
    assert_eq!(information_gain(&KernelSpec::gaussian(1.0), 1.0, &none).unwrap(), 0.0);
}
