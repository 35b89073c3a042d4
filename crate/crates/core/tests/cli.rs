use std::path::Path;
use std::process::{Command, Output};

fn corrlab(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_corrlab"));
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn family_then_verify_factorization() {
    let dir = tempfile::tempdir().unwrap();
    let corr = dir.path().join("bm.csv");
    let fac = dir.path().join("bm_fac.json");
    let o = corrlab(
        &["family", "bm", "--m", "6", "--k", "0.5", "--output", s(&corr), "--factorization", s(&fac)],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let edge = 1.0 - 0.5f64.sqrt();
    let at = format!("{edge}");
    let o = corrlab(&["verify", "--correlation", s(&corr), "--factorization", s(&fac), "--lambda", &at], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let past = format!("{}", edge + 1e-4);
    let o = corrlab(&["verify", "--correlation", s(&corr), "--factorization", s(&fac), "--lambda", &past], &[]);
    assert_eq!(code(&o), 1);
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn sweep_certificates_reverify() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("sweep.csv");
    let certs = dir.path().join("certs.json");
    let o = corrlab(
        &[
            "sweep", "--family", "bm", "--m", "5", "--k", "0.4", "--lambdas", "0,0.1,0.3,0.5", "--output", s(&csv),
            "--certificates", s(&certs),
        ],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(&csv).unwrap();
    let feasible: Vec<&str> = table.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(feasible, ["true", "true", "true", "false"]);
    let o = corrlab(&["verify", "--certificate", s(&certs)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let report: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["checked"], 3);

    // push one certificate past its noise level
    let mut dump: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&certs).unwrap()).unwrap();
    dump["certificates"][2]["lambda"] = serde_json::json!(0.45);
    std::fs::write(&certs, dump.to_string()).unwrap();
    let o = corrlab(&["verify", "--certificate", s(&certs)], &[]);
    assert_eq!(code(&o), 1);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(
        &cfg,
        "family = \"product\"\nu = \"uniform:3\"\nv = \"0.2,0.3,0.5\"\nlambdas = [0.0, 0.5]\nseed = 3\n",
    )
    .unwrap();
    let o = corrlab(&["sweep", "--config", s(&cfg)], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
    let o = corrlab(&["sweep", "--config", s(&cfg), "--lambdas", "0.1,0.2,0.9"], &[]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8_lossy(&o.stdout).to_string();
    assert_eq!(out.lines().count(), 4);
    assert!(out.lines().skip(1).all(|l| l.split(',').nth(1) == Some("true")));
}

#[test]
fn thread_count_does_not_change_output() {
    let args = ["sweep", "--family", "am", "--m", "5", "--k", "0.4", "--lambda-count", "6", "--lambda-stop", "0.3", "--seed", "9"];
    let one = corrlab(&args, &[("CORRLAB_THREADS", "1")]);
    let four = corrlab(&args, &[("CORRLAB_THREADS", "4")]);
    assert_eq!(code(&one), 0);
    assert_eq!(one.stdout, four.stdout);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&corrlab(&["--help"], &[])), 0);
    assert_eq!(code(&corrlab(&["frobnicate"], &[])), 2);
    assert_eq!(code(&corrlab(&["family", "bm", "--m", "x"], &[])), 2);
    // missing file
    assert_eq!(code(&corrlab(&["family", "file", "--input", "/nonexistent/p.csv"], &[])), 2);
    // malformed file
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "x,y,p\n1,1,oops\n").unwrap();
    assert_eq!(code(&corrlab(&["family", "file", "--input", s(&bad)], &[])), 2);
    // entries that do not sum to one
    let off = dir.path().join("off.csv");
    std::fs::write(&off, "x,y,p\n1,1,0.5\n1,2,0.5\n2,1,0.5\n2,2,0.5\n").unwrap();
    assert_eq!(code(&corrlab(&["family", "file", "--input", s(&off)], &[])), 3);
    assert_eq!(code(&corrlab(&["family", "bm", "--m", "6", "--k", "1.5"], &[])), 3);
    assert_eq!(code(&corrlab(&["sweep", "--family", "bm", "--m", "4", "--k", "0.3", "--lambdas", "0.3,0.1"], &[])), 3);
    // a single search with no restarts and no iterations cannot certify anything
    let o = corrlab(
        &["sweep", "--family", "am", "--m", "8", "--k", "0.5", "--lambdas", "0.26", "--max-iters", "0", "--restarts", "1"],
        &[],
    );
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).contains("unresolved"));
}

#[test]
fn reproduce_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = corrlab(&["reproduce", "thm3", "--out-dir", s(dir.path())], &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("PASS [1]"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(report.as_array().unwrap().iter().all(|o| o["passed"] == true));
    assert!(dir.path().join("bm_step.csv").exists());
}
