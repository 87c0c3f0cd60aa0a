use kbandit_core::env::{load_arm_pool, write_arm_pool, ArmPool, CandidatePolicy};
use kbandit_core::{ArmPoolEnv, Environment, Error, RewardFn, SyntheticEnv};
use proptest::prelude::*;

#[test]
fn synthetic_arms_are_uniform_in_the_ball() {
    for d in [2usize, 5, 10] {
        let mut env = SyntheticEnv::new(d, RewardFn::F2, 0.0, 50, 11).unwrap();
        let mut sum = 0.0;
        let mut count = 0;
        for _ in 0..200 {
            for x in env.draw_candidates().unwrap().features() {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                assert!(r2 <= 1.0 + 1e-12);
                sum += r2.sqrt().powi(d as i32);
                count += 1;
            }
        }
        // ||x||^d is uniform on [0, 1] for a uniform draw from the ball
        let mean = sum / count as f64;
        assert!((mean - 0.5).abs() < 3.0 * (1.0f64 / 12.0 / count as f64).sqrt() + 1e-3, "d={d}: {mean}");
    }
}

#[test]
fn noise_is_centered_with_the_configured_scale() {
    let mut env = SyntheticEnv::new(3, RewardFn::F1, 0.3, 5, 12).unwrap();
    let x = vec![0.2, -0.1, 0.4];
    let f = env.mean_reward(&x).unwrap();
    let draws: Vec<f64> = (0..20_000).map(|_| env.observe_x(&x).unwrap() - f).collect();
    let mean = draws.iter().sum::<f64>() / draws.len() as f64;
    let sd = (draws.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / draws.len() as f64).sqrt();
    assert!(mean.abs() < 3.0 * 0.3 / (draws.len() as f64).sqrt());
    assert!((sd - 0.3).abs() < 0.01);
}

#[test]
fn same_seed_same_environment() {
    let mut a = SyntheticEnv::new(4, RewardFn::F1, 0.1, 7, 3).unwrap();
    let mut b = SyntheticEnv::new(4, RewardFn::F1, 0.1, 7, 3).unwrap();
    assert_eq!(a.theta_star(), b.theta_star());
    for _ in 0..5 {
        let ca = a.draw_candidates().unwrap();
        let cb = b.draw_candidates().unwrap();
        assert_eq!(ca.features(), cb.features());
        assert_eq!(a.observe(&ca, 2).unwrap(), b.observe(&cb, 2).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn regret_is_never_negative(seed in any::<u64>(), d in 1usize..8, f in prop_oneof![Just(RewardFn::F1), Just(RewardFn::F2)]) {
        let mut env = SyntheticEnv::new(d, f, 0.1, 12, seed).unwrap();
        let c = env.draw_candidates().unwrap();
        for k in 0..c.len() {
            prop_assert!(c.regret(k) >= 0.0);
        }
    }

    #[test]
    fn arm_pools_round_trip(rows in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 3), 0.0f64..1.0), 1..30)) {
        let pool = ArmPool {
            features: rows.iter().map(|r| r.0.clone()).collect(),
            rewards: rows.iter().map(|r| r.1).collect(),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pool.csv");
        write_arm_pool(&pool, &path).unwrap();
        prop_assert_eq!(load_arm_pool(&path).unwrap(), pool);
    }
}

fn pool_file(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("arms.csv");
    std::fs::write(&path, text).unwrap();
    (dir, path)
}

#[test]
fn malformed_pools_are_rejected() {
    let (_d, p) = pool_file("a,b,reward\n1,2,0\n");
    assert!(matches!(load_arm_pool(&p), Err(Error::Schema(_))));
    let (_d, p) = pool_file("f0,f1,reward\n1,2,0\n1,x,1\n");
    assert!(matches!(load_arm_pool(&p), Err(Error::Parse { line: 3, .. })));
    let (_d, p) = pool_file("f0,reward\n1,inf\n");
    assert!(matches!(load_arm_pool(&p), Err(Error::Parse { line: 2, .. })));
    assert!(load_arm_pool("/nonexistent/arms.csv").is_err());
}

#[test]
fn one_positive_candidates_hold_exactly_one_rewarding_arm() {
    let mut text = String::from("f0,f1,reward\n");
    for i in 0..12 {
        text.push_str(&format!("{},{},{}\n", i as f64 / 12.0, 1.0 - i as f64 / 12.0, u8::from(i % 4 == 0)));
    }
    let pool = ArmPool::from_reader(text.as_bytes()).unwrap();
    let mut env = ArmPoolEnv::new(pool.clone(), CandidatePolicy::OnePositiveRestNegative, 5, 0.0, 1).unwrap();
    for _ in 0..50 {
        let c = env.draw_candidates().unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c.best_mean(), 1.0);
        let winners = (0..c.len()).filter(|&k| c.regret(k) == 0.0).count();
        assert_eq!(winners, 1);
        let k = (0..c.len()).find(|&k| c.regret(k) == 0.0).unwrap();
        assert_eq!(env.observe(&c, k).unwrap(), 1.0);
    }
    assert!(ArmPoolEnv::new(pool.clone(), CandidatePolicy::UniformK, 13, 0.0, 1).is_err());
    assert!(ArmPoolEnv::new(pool, CandidatePolicy::OnePositiveRestNegative, 11, 0.0, 1).is_err());
}
