use std::fs;
use std::path::Path;

use segab_core::baselines::SchemeId;
use segab_core::experiment::output::{read_aggregate, read_run_dir, read_sweep};
use segab_core::experiment::stats::channel_uses_to_reach;
use segab_core::experiment::{
    aggregate_dir, run_experiment, run_sweep, ExperimentConfig, SolverConfig, SweepParam, AGGREGATE_FILE, METADATA_FILE,
    RUNS_DIR, SWEEP_FILE,
};
use segab_core::Error;

fn small_config(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        n_antennas: 4,
        n_devices: 3,
        rounds: 3,
        batch_size: 10,
        n_drops: 2,
        n_realizations: 2,
        output_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.data.n_features = 4;
    cfg.data.n_classes = 3;
    cfg.data.samples_per_device = 30;
    cfg.data.test_samples = 100;
    cfg
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_experiment(&small_config(a.path()), 2).unwrap();
    run_experiment(&small_config(b.path()), 1).unwrap();
    let (ra, rb) = (files(&a.path().join(RUNS_DIR)), files(&b.path().join(RUNS_DIR)));
    assert_eq!(ra.len(), 2 * 2 * SchemeId::ALL.len());
    assert_eq!(ra, rb);
    assert_eq!(
        fs::read(a.path().join(AGGREGATE_FILE)).unwrap(),
        fs::read(b.path().join(AGGREGATE_FILE)).unwrap()
    );
}

#[test]
fn offline_aggregate_matches_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let outcome = run_experiment(&small_config(dir.path()), 1).unwrap();
    assert!(outcome.is_complete());
    let offline = aggregate_dir(&dir.path().join(RUNS_DIR)).unwrap();
    assert_eq!(offline, outcome.aggregate);
    assert_eq!(read_aggregate(&dir.path().join(AGGREGATE_FILE)).unwrap(), outcome.aggregate);

    let rows = read_run_dir(&dir.path().join(RUNS_DIR)).unwrap();
    assert_eq!(rows.len(), 4 * SchemeId::ALL.len() * 4);
    for agg in &outcome.aggregate {
        let members: Vec<f64> = rows
            .iter()
            .filter(|r| r.scheme == agg.scheme && r.round == agg.round)
            .map(|r| r.gap)
            .collect();
        assert_eq!(members.len(), agg.n_runs);
        let mean = members.iter().sum::<f64>() / members.len() as f64;
        assert!((mean - agg.gap.mean).abs() <= 1e-12 * mean.abs().max(1.0));
        assert!(agg.gap.lo <= agg.gap.mean && agg.gap.mean <= agg.gap.hi);
    }
    let meta = fs::read_to_string(dir.path().join(METADATA_FILE)).unwrap();
    assert!(meta.contains("status = \"complete\""));
}

#[test]
fn segments_cut_channel_uses_to_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.schemes = vec![SchemeId::IdealSeg, SchemeId::IdealFM];
    cfg.n_drops = 1;
    cfg.n_realizations = 1;
    let outcome = run_experiment(&cfg, 1).unwrap();
    let first = outcome.aggregate.iter().find(|r| r.round == 1).unwrap().gap.mean;
    let seg = channel_uses_to_reach(&outcome.aggregate, SchemeId::IdealSeg, first).unwrap();
    let fm = channel_uses_to_reach(&outcome.aggregate, SchemeId::IdealFM, first).unwrap();
    assert!(seg * 3 <= fm + 3, "{seg} vs {fm}");
}

#[test]
fn sweep_writes_one_point_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_config(dir.path());
    cfg.schemes = vec![SchemeId::SegAB, SchemeId::IdealSeg];
    cfg.n_drops = 1;
    cfg.n_realizations = 1;
    let param: SweepParam = "S_t=1,2".parse().unwrap();
    let outcome = run_sweep(&cfg, &param, 1).unwrap();
    assert!(outcome.is_complete());
    assert!(dir.path().join("S_t_1").join(AGGREGATE_FILE).is_file());
    assert!(dir.path().join("S_t_2").join(AGGREGATE_FILE).is_file());
    let rows = read_sweep(&dir.path().join(SWEEP_FILE)).unwrap();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r.param == "S_t" && r.stats.round == cfg.rounds));
}

#[test]
fn config_errors_name_the_problem() {
    let unknown = ExperimentConfig::from_toml_str("rounds = 3\nn_antenas = 4\n").unwrap_err();
    assert!(matches!(unknown, Error::Config(_)));
    let text = unknown.to_string();
    assert!(text.contains("n_antenas") && text.contains("line 2"), "{text}");

    let empty = ExperimentConfig::from_toml_str("schemes = []\n").unwrap_err().to_string();
    assert!(empty.contains("schemes"), "{empty}");

    let bad = ExperimentConfig::from_toml_str("schemes = [\"SegAB\", \"Oracle\"]\n").unwrap_err().to_string();
    assert!(bad.contains("Oracle"), "{bad}");

    assert!("rho=1,2".parse::<SweepParam>().is_err());
    assert!("gamma=0.1,x".parse::<SweepParam>().is_err());
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = small_config(Path::new("some/dir"));
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
    assert_eq!(back, cfg);
}

#[test]
fn shipped_desk_config_parses() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk.toml");
    let cfg = ExperimentConfig::from_path(&path).unwrap();
    assert_eq!(cfg.schemes, SchemeId::ALL.to_vec());
    assert_eq!((cfg.n_antennas, cfg.n_devices, cfg.n_segments), (16, 5, 3));
    assert_eq!(cfg.solver, SolverConfig::default());
}
