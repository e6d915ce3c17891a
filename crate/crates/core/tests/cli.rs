use std::process::{Command, Output};

fn bergman(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bergman")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn bounded_check_reports_verdict_and_exits_zero() {
    let out = bergman(&["check", "bounded", "--psi", "poly:0,0.5", "--g", "poly:1,1"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["schema"], 1);
    assert_eq!(v["command"], "check bounded");
    assert_eq!(v["result"]["verdict"], "bounded");
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = ["kernel", "norms", "--points", "20", "--r-cut", "0.9"];
    let (a, b) = (bergman(&args), bergman(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn parse_errors_exit_one_with_position() {
    let out = bergman(&["weights", "probe", "--psi", "poly:0,zz"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("position"));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = std::env::temp_dir().join(format!("bergman-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    let csv = dir.join("probe.csv");
    std::fs::write(&cfg, r#"{"weight": "exp:b=0.5,alpha=2", "points": 7}"#).unwrap();
    let out = bergman(&["weights", "probe", "--config", cfg.to_str().unwrap(), "--csv", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["config_echo"]["weight"], "exp:b=0.5,alpha=2");
    assert_eq!(v["result"]["rows"].as_array().unwrap().len(), 7);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("r,tau,log_omega"));
    assert_eq!(text.lines().count(), 8);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = std::env::temp_dir().join(format!("bergman-cli-bad-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, r#"{"bogus": true}"#).unwrap();
    let out = bergman(&["weights", "probe", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn toeplitz_verify_passes_at_small_size() {
    let out = bergman(&["toeplitz", "verify", "--psi", "poly:0,0.5", "--g", "poly:0,1", "--N", "10"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let err = json(&out)["result"]["frobenius_rel_err"].as_f64().unwrap();
    assert!(err < 1e-8);
}
