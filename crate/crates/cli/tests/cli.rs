use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparsespike"))
}

fn write_config(dir: &Path, name: &str, json: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn field(stdout: &str, key: &str) -> Vec<f64> {
    stdout
        .lines()
        .filter_map(|l| l.strip_prefix(&format!("{key}=")))
        .filter(|v| !v.is_empty())
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn analytic_prints_regular_graph_thresholds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "a.json", r#"{"mode":"analytic","degree":{"kind":"regular","c":4},"theta":4}"#);
    let o = run(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s = String::from_utf8(o.stdout).unwrap();
    assert!((field(&s, "theta_b")[0] - 1.1547).abs() < 1e-4);
    assert!((field(&s, "theta_crit")[0] - 2.6667).abs() < 1e-4);
    assert!((field(&s, "lambda_top")[0] - 4.9443).abs() < 1e-4);
    assert!((field(&s, "overlap_sq")[0] - 0.7889).abs() < 1e-4);
    let csv = fs::read_to_string(out.join("analytic.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert!(csv.lines().nth(1).unwrap().starts_with("# seed: 0"));
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 2);
}

#[test]
fn diag_at_zero_signal_finds_the_structural_eigenvalue() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "d.json",
        r#"{"mode":"diag","degree":{"kind":"regular","c":4},"theta":0,"n":2000,"instances":10}"#,
    );
    let out = dir.path().join("out");
    let o = run(&["run", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("diag.csv")).unwrap();
    let tops: Vec<f64> = csv
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(5).unwrap().parse().unwrap())
        .collect();
    assert_eq!(tops.len(), 10);
    let mean = tops.iter().sum::<f64>() / 10.0;
    assert!((mean - 4.0).abs() < 1e-8, "{mean}");
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let json = format!(
        r#"{{"mode":"sweep","degree":{{"kind":"truncated_poisson","c_bar":3,"k_max":12}},
            "theta":[0,2,5],"connectivity":[3,4],"n":200,"instances":3,"seed":11,
            "lambda_structural":4.0,"out_dir":{:?}}}"#,
        out.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "s.json", &json);
    let mut outputs = Vec::new();
    for workers in ["1", "4"] {
        let o = run(&["run", cfg.to_str().unwrap(), "--workers", workers]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(fs::read(out.join("sweep.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    let text = String::from_utf8(outputs.remove(0)).unwrap();
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 2);
}

#[test]
fn popdyn_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let json = format!(
        r#"{{"mode":"popdyn","degree":{{"kind":"truncated_poisson","c_bar":4,"k_max":20}},"theta":6,
            "popdyn":{{"population_size":5000,"alpha_samples":50000,"alpha_tol":0.05}},"out_dir":{:?}}}"#,
        out.to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "p.json", &json);
    let mut outputs = Vec::new();
    for _ in 0..2 {
        let o = run(&["run", cfg.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            fs::read(out.join("popdyn.csv")).unwrap(),
            fs::read(out.join("checkpoints/p0_t0.txt")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", "{\"mode\":\"diag\",\n\"degree\":{\"kind\":\"regular\",\"c\":4},\n\"thetta\":1}");
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":3:") && err.contains("thetta"), "{err}");

    let cfg = write_config(dir.path(), "n.json", r#"{"mode":"diag","degree":{"kind":"regular","c":4},"n":1}"#);
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`n`"));

    let o = run(&["run", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let json = format!(
        r#"{{"mode":"popdyn","degree":{{"kind":"truncated_poisson","c_bar":4,"k_max":20}},"theta":6,
            "popdyn":{{"population_size":2000,"alpha_samples":20000,"alpha_tol":1e-9,"max_rescales":1}},"out_dir":{:?}}}"#,
        dir.path().join("out").to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "p.json", &json);
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn generation_failure_exits_with_four() {
    let dir = tempfile::tempdir().unwrap();
    let json = format!(
        r#"{{"mode":"diag","degree":{{"kind":"table","probabilities":[0,1]}},"n":3,"instances":1,"out_dir":{:?}}}"#,
        dir.path().join("out").to_str().unwrap()
    );
    let cfg = write_config(dir.path(), "g.json", &json);
    let o = run(&["run", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn mode_subcommand_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "x.json", r#"{"mode":"diag","degree":{"kind":"regular","c":5},"theta":1}"#);
    let o = run(&["analytic", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--seed", "7"]);
    assert!(o.status.success());
    let csv = fs::read_to_string(out.join("analytic.csv")).unwrap();
    assert!(csv.contains("\"mode\":\"analytic\""));
    assert!(csv.contains("# seed: 7"));
    assert!(!out.join("diag.csv").exists());
}
