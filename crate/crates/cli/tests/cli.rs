use std::path::Path;
use std::process::{Command, Output};

fn blockneg(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blockneg"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn mu_sweep_writes_csv_with_exact_header() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "8,12", "--kept-states", "16", "--out", "r.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n_sites,gamma,lambda,kept_states,block_len,separation,mu,negativity,log_negativity,truncated_weight"
    );
    // N=8 gives μ ∈ {2/3, 2} and N=12 gives {0.4, 1, 2} inside [0.1, 3].
    assert_eq!(lines.count(), 5);
}

#[test]
fn json_output_has_provenance() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["mu-sweep", "--gamma", "0", "--lambda", "0", "--sizes", "8", "--kept-states", "16", "--out", "r.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["provenance"]["command"], "mu-sweep");
    assert_eq!(v["provenance"]["config"]["kept_states"], 16);
    assert!(v["provenance"]["version"].is_string());
    assert_eq!(v["records"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_configuration_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "9"][..],
        &["mu-sweep", "--gamma", "1", "--sizes", "8"][..],
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "8", "--window", "3,0.1"][..],
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "8", "--kept-states", "1"][..],
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "8", "--jobs", "0"][..],
        &["lambda-scan", "--gamma", "1", "--sizes", "8", "--mu", "x", "--lambdas", "1"][..],
        &["mu-sweep", "--bogus"][..],
    ] {
        let o = blockneg(args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}");
    }
    std::fs::write(dir.path().join("bad.toml"), "gama = 1.0\n").unwrap();
    let o = blockneg(&["mu-sweep", "--config", "bad.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.toml"),
        "gamma = 0.5\nlambda = 1.0\nsizes = [8]\nkept_states = 16\noutput = \"from_file.csv\"\n",
    )
    .unwrap();
    let o = blockneg(&["mu-sweep", "--config", "run.toml", "--out", "flag.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("flag.json").exists());
    assert!(!dir.path().join("from_file.csv").exists());
}

#[test]
fn fit_reads_exported_records() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["mu-sweep", "--gamma", "0", "--lambda", "0", "--sizes", "16,20,24", "--kept-states", "24", "--out", "xx.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = blockneg(&["fit", "xx.csv", "--out", "fit.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("h = "));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert_eq!(v["fits"][0]["fit_window"], serde_json::json!([0.1, 3.0]));
    assert_eq!(v["fits"][0]["use_log_negativity"], false);

    let o = blockneg(&["fit", "xx.csv", "--log-negativity", "--out", "fit_ln.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(dir.path().join("fit_ln.csv")).unwrap();
    assert!(text.starts_with("h,alpha,amplitude,mu_min,mu_max,residual_norm,n_points,use_log_negativity,covariance\n"));
    assert!(text.contains(",true,"));

    // Too few points in a narrow window.
    let o = blockneg(&["fit", "xx.csv", "--window", "2.5,3"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn compare_identical_files_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "12", "--kept-states", "16", "--out", "a.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = blockneg(&["compare", "a.csv", "a.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("= 0.000000"), "{}", stdout(&o));
}

#[test]
fn oracle_check_passes_on_small_chain() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(&["oracle-check", "--gamma", "1", "--lambda", "1", "--sizes", "10"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("max difference"));
}

#[test]
fn lambda_scan_reports_skipped_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["lambda-scan", "--gamma", "1", "--sizes", "8,10", "--mu", "2/3", "--lambdas", "0.9,1.1", "--kept-states", "16", "--out", "s.json"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("N = 10"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("s.json")).unwrap()).unwrap();
    assert_eq!(v["scan"]["points"].as_array().unwrap().len(), 2);
    assert_eq!(v["scan"]["skipped"], serde_json::json!([10]));
}

#[test]
fn unwritable_output_is_a_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = blockneg(
        &["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "8", "--kept-states", "8", "--out", "missing/dir/r.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn checkpoint_dir_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mu-sweep", "--gamma", "1", "--lambda", "1", "--sizes", "10", "--kept-states", "16", "--checkpoint-dir", "ck"];
    let first = blockneg(&args, dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path().join("ck")).unwrap().collect();
    assert_eq!(files.len(), 1);
    let second = blockneg(&args, dir.path());
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(stdout(&first), stdout(&second));
}
