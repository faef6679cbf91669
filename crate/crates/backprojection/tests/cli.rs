use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn backproj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_backproj"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_and_echoes_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("bp");
    let out = backproj(&["run", "--epochs", "3", "--trace", "--output-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let curve = fs::read_to_string(dir.join("loss_curve.csv")).unwrap();
    let lines: Vec<&str> = curve.lines().collect();
    assert_eq!(lines[0], "epoch,mean_loss,wall_seconds");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("3,"));

    let report = read_json(&dir.join("report.json"));
    let config = &report["config"];
    assert_eq!(config["algorithm"], "backprojection");
    assert_eq!(config["train"]["learning_rate"], 1e-4);
    assert_eq!(config["train"]["batch_size"], 30);
    assert_eq!(config["train"]["procedure"], "forward");
    assert_eq!(config["dataset"]["kind"], "two_blobs");
    let units: Vec<u64> = config["architecture"]
        .as_array()
        .unwrap()
        .iter()
        .map(|l| l["units"].as_u64().unwrap())
        .collect();
    assert_eq!(units, [15, 20, 1]);
    assert!(report["final_accuracy"].as_f64().unwrap() <= 1.0);
    assert_eq!(report["epoch_loss"].as_array().unwrap().len(), 3);

    let model = read_json(&dir.join("model.json"));
    assert_eq!(model["layers"].as_array().unwrap().len(), 3);
    assert_eq!(model["layers"][0]["weights"].as_array().unwrap().len(), 2 * 15);
    assert!(model["kernel"].is_null());

    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    // 300 samples / 30 per batch = 10 batches, 3 layers, 3 epochs
    assert_eq!(trace.lines().count(), 1 + 10 * 3 * 3);
}

#[test]
fn kernel_run_defaults_to_smaller_learning_rate() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("kernel");
    let out = backproj(&[
        "run",
        "--algorithm",
        "kernel_backprojection",
        "--kernel",
        "rbf",
        "--epochs",
        "2",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["config"]["train"]["learning_rate"], 1e-5);
    assert_eq!(report["config"]["kernel"]["gamma"], 0.5);
    let model = read_json(&dir.join("model.json"));
    assert_eq!(model["layers"][0]["in_dim"], 300);
    assert_eq!(model["kernel"]["train_x"].as_array().unwrap().len(), 300);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("config.json");
    let dir = tmp.path().join("from-file");
    fs::write(
        &config,
        format!(
            r#"{{"algorithm": "backpropagation", "train": {{"epochs": 50, "batch_size": 20}}, "output_dir": {:?}}}"#,
            dir.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = backproj(&["run", "--config", config.to_str().unwrap(), "--epochs", "2"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["config"]["algorithm"], "backpropagation");
    assert_eq!(report["config"]["train"]["epochs"], 2);
    assert_eq!(report["config"]["train"]["batch_size"], 20);
}

#[test]
fn config_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("x");
    let dir = dir.to_str().unwrap();
    for args in [
        vec!["run", "--algorithm", "kernel_backprojection", "--output-dir", dir],
        vec!["run", "--kernel", "rbf", "--output-dir", dir],
        vec!["run", "--batch-size", "0", "--output-dir", dir],
        vec!["run", "--algorithm", "adam"],
        vec!["run", "--dataset", "/nonexistent/data.csv", "--output-dir", dir],
        vec!["frobnicate"],
    ] {
        let out = backproj(&args);
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"train": {"epochs": "many"}}"#).unwrap();
    assert_eq!(code(&backproj(&["run", "--config", bad.to_str().unwrap()])), 2);
    assert!(!Path::new(dir).exists());
}

#[test]
fn divergent_training_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("diverge.json");
    fs::write(
        &config,
        r#"{"architecture": [{"units": 5, "activation": "linear"}, {"activation": "linear"}],
            "algorithm": "backpropagation", "train": {"learning_rate": 10.0, "epochs": 50}}"#,
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let out = backproj(&["run", "--config", config.to_str().unwrap(), "--output-dir", dir.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numerical abort"));
}

#[test]
fn datagen_output_feeds_run() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("three.csv");
    assert_eq!(code(&backproj(&["datagen", "--dataset", "three_blobs", "--seed", "4", "--out", data.to_str().unwrap()])), 0);
    let text = fs::read_to_string(&data).unwrap();
    assert!(text.starts_with("x1,x2,label\n"));
    assert_eq!(text.lines().count(), 301);

    let dir = tmp.path().join("run");
    let out = backproj(&[
        "run",
        "--dataset",
        data.to_str().unwrap(),
        "--epochs",
        "2",
        "--output-dir",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.join("report.json"));
    assert_eq!(report["config"]["architecture"][2]["units"], 3);
    assert_eq!(report["config"]["train"]["epochs"], 2);
}

#[test]
fn gradcheck_reports_pass_and_fail() {
    let pass = backproj(&["gradcheck", "--trials", "20"]);
    assert_eq!(code(&pass), 0);
    let stdout = String::from_utf8_lossy(&pass.stdout);
    assert!(stdout.contains("\"max_relative_error\"") && stdout.trim_end().ends_with("PASS"));

    let linear = backproj(&[
        "gradcheck",
        "--dims",
        "2,3,2",
        "--activations",
        "linear",
        "--losses",
        "mse",
        "--tolerance",
        "1e-8",
    ]);
    assert_eq!(code(&linear), 0, "{}", String::from_utf8_lossy(&linear.stdout));

    let fail = backproj(&["gradcheck", "--trials", "2", "--tolerance", "0"]);
    assert_eq!(code(&fail), 1);
    assert!(String::from_utf8_lossy(&fail.stdout).trim_end().ends_with("FAIL"));

    assert_eq!(code(&backproj(&["gradcheck", "--dims", "3,9"])), 2);
}

#[test]
fn grid_from_trained_model() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("trained");
    assert_eq!(code(&backproj(&["run", "--output-dir", dir.to_str().unwrap()])), 0);
    let grid = tmp.path().join("grid.csv");
    let out = backproj(&[
        "grid",
        "--model",
        dir.join("model.json").to_str().unwrap(),
        "--resolution",
        "30",
        "--out",
        grid.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&grid).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,predicted_class,output_1"));
    let classes: std::collections::BTreeSet<&str> = lines.map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(classes.into_iter().collect::<Vec<_>>(), ["0", "1"]);

    let corners = backproj(&[
        "grid",
        "--model",
        dir.join("model.json").to_str().unwrap(),
        "--resolution",
        "2",
        "--bounds",
        "0,1,0,1",
    ]);
    assert_eq!(code(&corners), 0);
    let stdout = String::from_utf8_lossy(&corners.stdout);
    let rows: Vec<&str> = stdout.lines().skip(1).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("0,0,") && rows[3].starts_with("1,1,"));

    assert_eq!(code(&backproj(&["grid", "--model", dir.join("model.json").to_str().unwrap(), "--resolution", "1"])), 2);
}

#[test]
fn sweep_runs_configs_concurrently() {
    let tmp = tempfile::tempdir().unwrap();
    let mut paths = Vec::new();
    for (i, algorithm) in ["backprojection", "backpropagation"].iter().enumerate() {
        let path = tmp.path().join(format!("c{i}.json"));
        let dir = tmp.path().join(format!("out{i}"));
        fs::write(
            &path,
            format!(
                r#"{{"algorithm": "{algorithm}", "train": {{"epochs": 3}}, "output_dir": {:?}}}"#,
                dir.to_str().unwrap()
            ),
        )
        .unwrap();
        paths.push(path);
    }
    let args: Vec<&str> = ["sweep"].into_iter().chain(paths.iter().map(|p| p.to_str().unwrap())).collect();
    let out = backproj(&args);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for i in 0..2 {
        assert!(tmp.path().join(format!("out{i}/report.json")).exists());
    }

    let same = backproj(&["sweep", paths[0].to_str().unwrap(), paths[0].to_str().unwrap()]);
    assert_eq!(code(&same), 2);
}

#[test]
fn timing_table_lists_all_algorithms() {
    let out = backproj(&["timing", "--epochs", "20"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let table: Value = serde_json::from_slice(&out.stdout).unwrap();
    for name in ["backprojection", "kernel_backprojection", "backpropagation"] {
        assert!(table[name]["mean_epoch_seconds"].as_f64().unwrap() > 0.0);
        assert!(table[name]["std"].as_f64().unwrap() >= 0.0);
    }
    assert_eq!(code(&backproj(&["timing", "--epochs", "5"])), 2);
}
