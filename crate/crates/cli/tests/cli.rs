use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const LGSSM: &str = "model = lgssm
true_params = 0.9, 0.6, 1.0
init_params = 0.1, 1.0, 2.0
observations = 3000
replications = 3
checkpoints = 1000, 3000
";

const FINITE: &str = "model = finite-hmm
true_params = 0.7,0.3, 0.2,0.8, -1, 1, 0.5
init_params = 0.5,0.5, 0.5,0.5, -0.5, 0.5, 1
observations = 2000
replications = 2
";

fn boem(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boem")).args(args).env_remove("BOEM_WORKERS").output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_writes_tables_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lg.conf", LGSSM);
    let out = tmp.path().join("out");
    let o = boem(&["run", "--config", &cfg, "--out", out.to_str().unwrap(), "--format", "svg"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("replications=3"));
    assert!(text.contains("phi at 3000: median="));
    for f in ["raw.csv", "quantiles.csv", "phi.svg", "var_u.svg", "var_v.svg"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let q = fs::read_to_string(out.join("quantiles.csv")).unwrap();
    assert!(q.starts_with("# config_hash="));
    assert_eq!(q.lines().nth(1), Some("observations,coordinate,q1,median,q3"));
    assert_eq!(q.lines().count(), 2 + 2 * 3);
}

#[test]
fn reruns_are_byte_identical_and_seed_changes_output() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lg.conf", LGSSM);
    let dirs = ["a", "b", "c"].map(|d| tmp.path().join(d));
    let a = boem(&["run", "--config", &cfg, "--out", dirs[0].to_str().unwrap(), "--workers", "1"]);
    let b = boem(&["run", "--config", &cfg, "--out", dirs[1].to_str().unwrap(), "--workers", "2"]);
    let c = boem(&["run", "--config", &cfg, "--out", dirs[2].to_str().unwrap(), "--seed", "7"]);
    assert!(a.status.success() && b.status.success() && c.status.success());
    let raw = |d: &Path| fs::read(d.join("raw.csv")).unwrap();
    assert_eq!(raw(&dirs[0]), raw(&dirs[1]));
    assert_ne!(raw(&dirs[0]), raw(&dirs[2]));
}

#[test]
fn compare_reports_medians_and_deltas() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lg.conf", LGSSM);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert!(boem(&["run", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(boem(&["run", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "3"]).status.success());
    let qa = a.join("quantiles.csv");
    let qb = b.join("quantiles.csv");
    let o = boem(&["compare", qa.to_str().unwrap(), qb.to_str().unwrap(), "--checkpoint", "1000"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("coordinate,median_a,iqr_a,median_b,iqr_b,median_delta,iqr_delta"));
    assert_eq!(lines.count(), 3);

    let same = boem(&["compare", qa.to_str().unwrap(), qa.to_str().unwrap()]);
    for line in stdout(&same).lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols[5].parse::<f64>().unwrap(), 0.0);
    }
    assert!(!boem(&["compare", qa.to_str().unwrap(), qb.to_str().unwrap(), "--checkpoint", "5"]).status.success());
}

#[test]
fn simulate_writes_the_stream() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.conf", FINITE);
    let out = tmp.path().join("sim");
    let o = boem(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap(), "--replication", "1"]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("observations.csv")).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next(), Some("t,state,observation"));
    assert_eq!(lines.count(), 2001);
}

#[test]
fn finite_model_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "f.conf", FINITE);
    let o = boem(&["rate-probe", "--config", &cfg, "--taus", "16,64,256", "--seeds", "5"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.starts_with("tau,error,std_error\n16,"));
    assert!(text.contains("# slope="));

    let o = boem(&["verify-forgetting", "--config", &cfg, "--trials", "50"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("trials=50 violations=0"));

    let o = boem(&["diagnostics", "--config", &cfg]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("observations,loglik_true,loglik_init\n"));
    assert!(text.contains("# normalized score at true parameter:"));
}

#[test]
fn finite_only_commands_reject_other_models() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "lg.conf", LGSSM);
    let o = boem(&["verify-forgetting", "--config", &cfg]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("finite-hmm"));
}

#[test]
fn bad_configs_fail_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "bad.conf", "model = lgssm\nmodel = sv\n");
    let o = boem(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.starts_with("error: parsing"), "{err}");
    assert!(err.contains("duplicate key"), "{err}");

    let missing = tmp.path().join("nope.conf");
    assert!(!boem(&["run", "--config", missing.to_str().unwrap()]).status.success());
    assert!(!boem(&["run"]).status.success());
}
