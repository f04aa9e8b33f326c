use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "model": {"deep_linear": {"depth": 2, "width": 32}},
  "data": {"synthetic_linear": {"d_in": 4, "d_out": 2, "n": 12}},
  "federation": {"clients": 4, "local_steps": 2, "rounds": 6, "eta": 0.001, "rate": 0.5}
}"#;

fn fedpp(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fedpp"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn fedpp")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    std::fs::write(dir.join(name), text).unwrap();
    name.to_string()
}

#[test]
fn train_writes_one_row_per_round() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = fedpp(dir.path(), &["train", "--config", &cfg, "--out", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,participants,loss,ratio,rho_theory,bound_cum");
    assert_eq!(lines.len(), 7);
    for (t, line) in lines[1..].iter().enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 6);
        assert_eq!(cells[0], t.to_string());
        assert_eq!(cells[1].split(';').count(), 2);
        assert!(cells[2].parse::<f64>().unwrap() > 0.0);
        assert!(!cells[4].is_empty() && !cells[5].is_empty());
    }
    assert!(dir.path().join("o/trace.json").exists());
    let svg = std::fs::read_to_string(dir.path().join("o/loss.svg")).unwrap();
    assert!(svg.starts_with("<svg"));
}

#[test]
fn zero_rounds_give_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = fedpp(dir.path(), &["train", "--config", &cfg, "--out", "o", "--rounds", "0"]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    assert_eq!(csv, "t,participants,loss,ratio,rho_theory,bound_cum\n");
}

#[test]
fn replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let files = ["trace.csv", "trace.json", "loss.svg"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        assert!(fedpp(dir.path(), &["train", "--config", &cfg, "--out", "o", "--seed", "7"]).status.success());
        runs.push(files.map(|f| std::fs::read(dir.path().join("o").join(f)).unwrap()));
    }
    for (i, f) in files.iter().enumerate() {
        assert_eq!(runs[0][i], runs[1][i], "{f} differs");
    }
}

#[test]
fn large_gram_leaves_bound_columns_empty() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("\"rate\": 0.5}", "\"rate\": 0.5}, \"analysis\": {\"max_gram_dim\": 4}");
    let cfg = write_config(dir.path(), "c.json", &text);
    assert!(fedpp(dir.path(), &["train", "--config", &cfg, "--out", "o"]).status.success());
    let csv = std::fs::read_to_string(dir.path().join("o/trace.csv")).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(",,"), "{line}");
    }
}

#[test]
fn verify_with_no_checks_passes() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("\"rate\": 0.5}", "\"rate\": 0.5}, \"analysis\": {\"checks\": []}");
    let cfg = write_config(dir.path(), "c.json", &text);
    let out = fedpp(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/verify.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
    assert_eq!(v["reports"].as_array().unwrap().len(), 0);
}

#[test]
fn verify_small_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    let out = fedpp(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn oversized_step_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"federation": {"eta": 50, "rounds": 1, "local_steps": 1}}"#);
    let out = fedpp(dir.path(), &["verify", "--config", &cfg, "--out", "o"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/verify.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], false);
    assert!(v["summary"]["local-descent"]["failed"].as_u64().unwrap() > 0);
}

#[test]
fn config_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"federation": {"rate": 0}}"#);
    let out = fedpp(dir.path(), &["train", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("federation.rate"));
    let cfg = write_config(dir.path(), "d.json", r#"{"federaton": {}}"#);
    assert_eq!(fedpp(dir.path(), &["train", "--config", &cfg]).status.code(), Some(3));
}

#[test]
fn missing_files_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(fedpp(dir.path(), &["train", "--config", "nope.json"]).status.code(), Some(4));
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"data": {"idx": {"images": "missing-images", "labels": "missing-labels"}}}"#,
    );
    assert_eq!(fedpp(dir.path(), &["train", "--config", &cfg]).status.code(), Some(4));
}

#[test]
fn single_cell_sweep_matches_train() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL);
    assert!(fedpp(dir.path(), &["train", "--config", &cfg, "--out", "t", "--seed", "3"]).status.success());
    let out = fedpp(dir.path(), &["sweep", "--config", &cfg, "--out", "s", "--seed", "3", "--rate", "0.5"]);
    assert!(out.status.success());
    let trace = std::fs::read_to_string(dir.path().join("t/trace.csv")).unwrap();
    let sweep = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    let sweep_rows: Vec<Vec<&str>> = sweep.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(sweep_rows.len(), 7);
    for (row, line) in sweep_rows.iter().zip(trace.lines().skip(1)) {
        let loss = line.split(',').nth(2).unwrap();
        assert_eq!(row[2], loss);
        assert_eq!(row[3], loss);
        assert_eq!(row[4], loss);
    }
}

#[test]
fn sweep_covers_every_rate() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace(
        "\"rate\": 0.5}",
        "\"rate\": 0.5}, \"sweep\": {\"rates\": [0.25, 1.0], \"seeds\": [0, 1]}",
    );
    let cfg = write_config(dir.path(), "c.json", &text);
    assert!(fedpp(dir.path(), &["sweep", "--config", &cfg, "--out", "s"]).status.success());
    let sweep = std::fs::read_to_string(dir.path().join("s/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().next().unwrap(), "rate,t,mean_loss,min_loss,max_loss");
    assert_eq!(sweep.lines().count(), 1 + 2 * 7);
    for line in sweep.lines().skip(1) {
        let c: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(c[3] <= c[2] && c[2] <= c[4]);
    }
}
