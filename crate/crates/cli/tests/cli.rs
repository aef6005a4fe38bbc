use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
n_antennas = 4
n_devices = 3
rounds = 2
batch_size = 10
n_drops = 1
n_realizations = 2

[data]
n_features = 4
n_classes = 3
samples_per_device = 30
test_samples = 100
"#;

fn segab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_segab")).args(args).output().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn run_aggregate_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();

    let run = segab(&["run", &cfg, "--out", &out_s, "--jobs", "2"]);
    assert!(run.status.success(), "{}", stderr(&run));
    let agg_path = out.join("aggregate.csv");
    let original = fs::read(&agg_path).unwrap();

    fs::remove_file(&agg_path).unwrap();
    let again = segab(&["aggregate", &out_s]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(fs::read(&agg_path).unwrap(), original);

    let plot = segab(&["plot", agg_path.to_str().unwrap()]);
    assert!(plot.status.success(), "{}", stderr(&plot));
    let svg = fs::read_to_string(out.join("aggregate_accuracy.svg")).unwrap();
    let positions: Vec<usize> = ["SegAB", "IdealSeg", "IdealFM", "MinSum", "MinMax"]
        .iter()
        .map(|name| svg.find(&format!("\n{name}\n")).unwrap_or_else(|| panic!("{name} missing from legend")))
        .collect();
    assert!(positions.windows(2).all(|w| w[0] < w[1]));
    assert!(!out.join("aggregate_gap.svg").exists());
}

#[test]
fn plot_spec_selects_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &CONFIG.replace("n_realizations = 2", "n_realizations = 1\nschemes = [\"SegAB\", \"MinMax\"]"));
    let out = dir.path().join("out");
    let out_s = out.to_string_lossy().into_owned();
    assert!(segab(&["run", &cfg, "--out", &out_s]).status.success());
    let spec = dir.path().join("plot.toml");
    fs::write(&spec, "metrics = [\"worst_H\"]\nx_axis = \"round\"\nlog_y = true\n").unwrap();
    let plot = segab(&["plot", out.join("aggregate.csv").to_str().unwrap(), "--spec", spec.to_str().unwrap()]);
    assert!(plot.status.success(), "{}", stderr(&plot));
    assert!(out.join("aggregate_worst_H.svg").is_file());
    assert!(!out.join("aggregate_accuracy.svg").exists());
}

#[test]
fn sweep_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &CONFIG.replace("n_realizations = 2", "n_realizations = 1\nschemes = [\"SegAB\", \"IdealSeg\"]"),
    );
    let out = dir.path().join("sw");
    let out_s = out.to_string_lossy().into_owned();
    let sweep = segab(&["sweep", &cfg, "--param", "gamma=0.05,0.2", "--out", &out_s]);
    assert!(sweep.status.success(), "{}", stderr(&sweep));
    assert!(out.join("gamma_0.05").join("aggregate.csv").is_file());
    let plot = segab(&["plot", out.join("sweep.csv").to_str().unwrap()]);
    assert!(plot.status.success(), "{}", stderr(&plot));
    assert!(out.join("sweep_accuracy.svg").is_file());
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "rounds = 2\nn_antenas = 4\n");
    let out = segab(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    let msg = stderr(&out);
    assert!(msg.contains("n_antenas") && msg.contains("line 2"), "{msg}");
}

#[test]
fn empty_scheme_list_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "schemes = []\n");
    let out = segab(&["run", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("schemes"));
}

#[test]
fn plot_reports_missing_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.csv");
    fs::write(&path, "scheme,round,channel_uses\nSegAB,0,0\n").unwrap();
    let out = segab(&["plot", path.to_str().unwrap()]);
    assert!(!out.status.success());
    let msg = stderr(&out);
    assert!(msg.contains("missing column"), "{msg}");
}

#[test]
fn bad_sweep_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let out = segab(&["sweep", &cfg, "--param", "rho=1,2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("rho"));
}
