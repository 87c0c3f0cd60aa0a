use kbandit_core::harness::{
    run, run_replicate, summary_csv, sweep, Algorithm, EnvironmentConfig, ExperimentConfig, MetricsTrace,
    OutputFormat, SweepGrid, CSV_HEADER, SUMMARY_HEADER,
};
use kbandit_core::env::{write_arm_pool, ArmPool, CandidatePolicy};

const ALL: [Algorithm; 5] = [
    Algorithm::DiskernelExact,
    Algorithm::ApproxDiskernel,
    Algorithm::Dislinucb,
    Algorithm::OneKernelucb,
    Algorithm::NKernelucb,
];

#[test]
fn zero_rounds_give_an_empty_trace() {
    for algo in ALL {
        let out = run_replicate(&ExperimentConfig::synthetic(algo, 3, 0, 2), 0).unwrap();
        assert!(out.trace.is_empty());
        assert_eq!(out.gamma_hat(), 0.0);
        assert_eq!(out.trace.to_csv(), format!("{CSV_HEADER}\n"));
    }
}

#[test]
fn traces_accumulate_in_order() {
    for algo in ALL {
        let out = run_replicate(&ExperimentConfig::synthetic(algo, 3, 6, 3), 4).unwrap();
        let mut cum = 0.0;
        let mut comm = 0;
        for (i, s) in out.trace.steps.iter().enumerate() {
            assert_eq!(s.t, i + 1);
            cum += s.regret;
            assert_eq!(s.cum_regret, cum);
            assert!(s.cum_comm_scalars >= comm);
            comm = s.cum_comm_scalars;
        }
        let synced: u64 = out.trace.syncs.iter().map(|s| s.scalars).sum();
        if matches!(algo, Algorithm::DiskernelExact | Algorithm::ApproxDiskernel | Algorithm::Dislinucb) {
            assert_eq!(synced, out.trace.cumulative_scalars());
        }
    }
}

#[test]
fn csv_and_json_carry_the_same_trace() {
    let mut cfg = ExperimentConfig::synthetic(Algorithm::ApproxDiskernel, 3, 8, 3);
    cfg.approx.qbar = Some(1.0);
    let out = run_replicate(&cfg, 2).unwrap();
    let back = MetricsTrace::steps_from_csv(&out.trace.render(OutputFormat::Csv)).unwrap();
    assert_eq!(back, out.trace.steps);
    let json: serde_json::Value = serde_json::from_str(&out.trace.render(OutputFormat::Json)).unwrap();
    assert_eq!(json["syncs"].as_array().unwrap().len(), out.sync_count());
    assert_eq!(json["sync_count"].as_u64().unwrap() as usize, out.sync_count());
    assert_eq!(json["steps"].as_array().unwrap().len(), 24);
    assert_eq!(json["algorithm"], "approx_diskernel");
}

#[test]
fn replicates_use_consecutive_seeds() {
    let mut cfg = ExperimentConfig::synthetic(Algorithm::DiskernelExact, 2, 4, 2);
    cfg.seed = 10;
    cfg.replicates = 3;
    let outs = run(&cfg).unwrap();
    assert_eq!(outs.iter().map(|o| o.seed).collect::<Vec<_>>(), vec![10, 11, 12]);
    assert_eq!(outs[1], run_replicate(&cfg, 11).unwrap());
}

#[test]
fn configs_round_trip_through_toml() {
    let cfg = ExperimentConfig::synthetic(Algorithm::Dislinucb, 4, 9, 5);
    let text = cfg.to_toml_string().unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    assert!(ExperimentConfig::from_toml_str("algorithm = \"dislinucb\"\n").unwrap_err().is_config());
    assert!(ExperimentConfig::from_toml_str(&format!("unknown = 1\n{text}")).unwrap_err().is_config());
}

#[test]
fn pool_paths_resolve_against_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let pool = ArmPool {
        features: (0..6).map(|i| vec![i as f64 / 6.0, 0.5]).collect(),
        rewards: (0..6).map(|i| f64::from(u8::from(i == 0))).collect(),
    };
    write_arm_pool(&pool, dir.path().join("arms.csv")).unwrap();
    std::fs::write(
        dir.path().join("exp.toml"),
        "algorithm = \"n_kernelucb\"\nn_clients = 2\nrounds = 3\ndim = 2\n\n\
         [environment]\nkind = \"arm_pool\"\npath = \"arms.csv\"\npolicy = \"one_positive_rest_negative\"\n\
         noise_std = 0.0\ncandidate_size = 4\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::from_file(dir.path().join("exp.toml")).unwrap();
    match &cfg.environment {
        EnvironmentConfig::ArmPool { path, policy, .. } => {
            assert_eq!(path, &dir.path().join("arms.csv"));
            assert_eq!(*policy, CandidatePolicy::OnePositiveRestNegative);
        }
        other => panic!("unexpected environment {other:?}"),
    }
    assert_eq!(run_replicate(&cfg, 0).unwrap().trace.len(), 6);

    let mut wrong = cfg.clone();
    wrong.dim = 3;
    assert!(run_replicate(&wrong, 0).unwrap_err().is_config());
}

#[test]
fn sweeps_produce_one_row_per_point_and_seed() {
    let mut base = ExperimentConfig::synthetic(Algorithm::NKernelucb, 2, 3, 2);
    base.replicates = 2;
    let grid = SweepGrid::from_toml_str("algorithm = [\"n_kernelucb\", \"one_kernelucb\"]\nalpha = [0.5, 1.0]\n").unwrap();
    let rows = sweep(&base, &grid).unwrap();
    assert_eq!(rows.len(), 8);
    let csv = summary_csv(&rows);
    assert_eq!(csv.lines().next(), Some(SUMMARY_HEADER));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cfg = ExperimentConfig::from_file(dir.join("desk_f1.toml")).unwrap();
    assert_eq!((cfg.n_clients, cfg.rounds, cfg.dim), (20, 50, 10));
    let grid = SweepGrid::from_toml_str(&std::fs::read_to_string(dir.join("alpha_gamma_grid.toml")).unwrap()).unwrap();
    assert_eq!(grid.expand(&cfg).unwrap().len(), 45);
}
