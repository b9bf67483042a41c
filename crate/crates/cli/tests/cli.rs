//! End-to-end tests that drive the `sparkperf` binary the way a user would.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sparkperf() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sparkperf"))
}

fn run(args: &[&str]) -> Output {
    sparkperf().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

/// A small interpolation experiment over a noiseless analytic law.
fn experiment_config(dir: &Path) -> PathBuf {
    let path = dir.join("exp.json");
    fs::write(
        &path,
        r#"{
  "dataset": {"kind": "synthetic", "spec": {
    "workload_id": "tiny",
    "stage_count": 2,
    "core_grid": [4, 6, 8, 10, 12, 14],
    "data_sizes": [100.0],
    "replicates": 3,
    "noise_cv": 0.05,
    "law": {"kind": "ernest", "theta": [2.0, 1.0, 0.5, 0.0]},
    "seed": 11
  }},
  "scenario": {"family": "core-interpolation", "train_sizes": [100.0],
               "test_sizes": [100.0], "n_cases": 1},
  "families": ["decision-tree", "lasso"],
  "feature_sets": ["gray-box", "black-box"],
  "seeds": [3, 4],
  "out_dir": "results"
}"#,
    )
    .expect("config written");
    path
}

// ---------------------------------------------------------------------------
// exit codes and usage
// ---------------------------------------------------------------------------

#[test]
fn missing_config_flag_is_a_usage_error() {
    let out = run(&["experiment"]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("--config"));
}

#[test]
fn unknown_flag_exits_one_and_help_exits_zero() {
    let out = run(&["experiment", "--frobnicate"]);
    assert_eq!(exit_code(&out), 1);
    let help = run(&["--help"]);
    assert_eq!(exit_code(&help), 0);
    assert!(stdout(&help).contains("experiment"));
}

#[test]
fn config_problems_are_listed_exhaustively_before_any_work() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{
  "dataset": {"kind": "synthetic", "spec": {
    "workload_id": "w", "stage_count": 1,
    "core_grid": [2, 4], "data_sizes": [10.0],
    "replicates": 1, "noise_cv": 0.0,
    "law": {"kind": "ernest", "theta": [1.0, 0.0, 0.0, 0.0]},
    "seed": 1
  }},
  "scenario": {"family": "core-interpolation", "train_sizes": [10.0],
               "test_sizes": [20.0], "n_cases": 0},
  "seeds": [],
  "out_dir": "results"
}"#,
    )
    .unwrap();
    let out = run(&["experiment", "--config", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let err = stderr(&out);
    assert!(err.contains("at least one seed"), "{err}");
    assert!(err.contains("n_cases"), "{err}");
    assert!(err.contains("must be identical"), "{err}");
    assert!(!dir.path().join("results").exists(), "no work before validation");
}

#[test]
fn missing_seed_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let path = experiment_config(dir.path());
    let text = fs::read_to_string(&path).unwrap().replace("\"seed\": 11", "\"seed2\": 11");
    fs::write(&path, text).unwrap();
    let out = run(&["synth", "--config", path.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    assert!(stderr(&out).contains("seed"), "{}", stderr(&out));
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[test]
fn synth_writes_the_published_grid_shape() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("synth.json");
    // 19 core settings x 1 size x 6 replicates = 114 rows.
    let cores: Vec<u32> = (6..=44).step_by(2).filter(|c| *c != 20).collect();
    assert_eq!(cores.len(), 19);
    fs::write(
        &path,
        format!(
            r#"{{
  "dataset": {{"kind": "synthetic", "spec": {{
    "workload_id": "q26like", "stage_count": 2,
    "core_grid": {cores:?}, "data_sizes": [750.0],
    "replicates": 6, "noise_cv": 0.0,
    "law": {{"kind": "ernest", "theta": [2.0, 5.0, 1.0, 0.001]}},
    "seed": 9
  }}}},
  "scenario": {{"family": "core-interpolation", "train_sizes": [750.0],
               "test_sizes": [750.0], "n_cases": 1}},
  "seeds": [1],
  "out_dir": "results"
}}"#
        ),
    )
    .unwrap();
    let out_dir = dir.path().join("data");
    let out = run(&[
        "synth",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("19 configurations x 6 replicates"), "{}", stdout(&out));

    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 115, "header + 114 rows");

    // noise_cv = 0: replicates of one configuration are identical except ids.
    let rows: Vec<&str> = runs.lines().skip(1).take(6).collect();
    let strip_id = |row: &str| row.rsplit_once(',').unwrap().0.to_string();
    assert!(rows.iter().all(|r| strip_id(r) == strip_id(rows[0])), "{rows:?}");
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

/// A minimal but faithful event log: application bounds, one stage, two tasks.
fn write_event_log(dir: &Path, cores: u32, replicate: u32, wall_ms: i64) {
    let name = format!("webjoin-s500-c{cores}-r{replicate}.jsonl");
    let task = |run_time: f64| {
        format!(
            concat!(
                r#"{{"Event":"SparkListenerTaskEnd","Stage ID":0,"Stage Attempt ID":0,"#,
                r#""Task Metrics":{{"Executor Run Time":{},"Shuffle Read Metrics":null,"#,
                r#""Shuffle Write Metrics":{{"Shuffle Write Time":1000000,"Shuffle Bytes Written":64.0}}}}}}"#
            ),
            run_time
        )
    };
    let log = [
        r#"{"Event":"SparkListenerApplicationStart","Timestamp":1000}"#.to_string(),
        r#"{"Event":"SparkListenerBlockManagerAdded","extra":true}"#.to_string(),
        task(120.0),
        task(80.0),
        r#"{"Event":"SparkListenerStageCompleted","Stage Info":{"Stage ID":0,"Stage Attempt ID":0}}"#
            .to_string(),
        format!(r#"{{"Event":"SparkListenerApplicationEnd","Timestamp":{}}}"#, 1000 + wall_ms),
    ]
    .join("\n");
    fs::write(dir.join(name), log).unwrap();
}

fn ingest_config(dir: &Path, logs: &Path) -> PathBuf {
    let path = dir.join("ingest.json");
    fs::write(
        &path,
        format!(
            r#"{{
  "dataset": {{"kind": "event-logs", "dir": {:?}, "size_unit": "GB"}},
  "scenario": {{"family": "core-interpolation", "train_sizes": [500.0],
               "test_sizes": [500.0], "n_cases": 1}},
  "seeds": [1],
  "out_dir": "results"
}}"#,
            logs.display()
        ),
    )
    .unwrap();
    path
}

#[test]
fn ingest_reports_configurations_and_replicates() {
    let dir = TempDir::new().unwrap();
    let logs = dir.path().join("logs");
    fs::create_dir(&logs).unwrap();
    // 120 logs: 20 core settings x 6 replicates.
    let mut replicate = 0;
    for cores in (4..=42).step_by(2) {
        for _ in 0..6 {
            write_event_log(&logs, cores, replicate, 60_000 + i64::from(cores) * 10);
            replicate += 1;
        }
    }
    let config = ingest_config(dir.path(), &logs);
    let out_dir = dir.path().join("canon");
    let out = run(&[
        "ingest",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    assert!(
        stdout(&out).contains("ingested 120 runs of `webjoin` over 20 configurations x 6 replicates"),
        "{}",
        stdout(&out)
    );
    let runs = fs::read_to_string(out_dir.join("runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 121);
    let stages = fs::read_to_string(out_dir.join("stages.csv")).unwrap();
    assert_eq!(stages.lines().count(), 121, "one stage per run");
    let summary = fs::read_to_string(out_dir.join("ingest-summary.json")).unwrap();
    assert!(summary.contains("\"runs\": 120"));
}

#[test]
fn ingest_of_an_empty_directory_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let logs = dir.path().join("logs");
    fs::create_dir(&logs).unwrap();
    let config = ingest_config(dir.path(), &logs);
    let out = run(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr(&out).contains("no input logs"), "{}", stderr(&out));
}

#[test]
fn corrupt_log_aborts_with_file_and_line_unless_skipped() {
    let dir = TempDir::new().unwrap();
    let logs = dir.path().join("logs");
    fs::create_dir(&logs).unwrap();
    for replicate in 0..3 {
        write_event_log(&logs, 8, replicate, 30_000);
    }
    let bad = logs.join("webjoin-s500-c12-r3.jsonl");
    fs::write(
        &bad,
        "{\"Event\":\"SparkListenerApplicationStart\",\"Timestamp\":1000}\nnot json at all\n",
    )
    .unwrap();
    let config = ingest_config(dir.path(), &logs);

    let strict = run(&["ingest", "--config", config.to_str().unwrap()]);
    assert_eq!(exit_code(&strict), 2);
    let err = stderr(&strict);
    assert!(err.contains("webjoin-s500-c12-r3.jsonl"), "{err}");
    assert!(err.contains("line 2"), "{err}");

    let out_dir = dir.path().join("canon");
    let lenient = run(&[
        "ingest",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "--skip-bad",
    ]);
    assert_eq!(exit_code(&lenient), 0, "{}", stderr(&lenient));
    assert!(stdout(&lenient).contains("ingested 3 runs"), "{}", stdout(&lenient));
    assert!(stdout(&lenient).contains("skipped 1 bad log"), "{}", stdout(&lenient));
    assert!(stderr(&lenient).contains("warning"), "{}", stderr(&lenient));
}

// ---------------------------------------------------------------------------
// experiment + report
// ---------------------------------------------------------------------------

#[test]
fn experiment_rerun_is_byte_identical_and_filters_shrink_the_table() {
    let dir = TempDir::new().unwrap();
    let config = experiment_config(dir.path());
    let config = config.to_str().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    for out in [&out_a, &out_b] {
        let run = run(&["experiment", "--config", config, "--out", out.to_str().unwrap()]);
        assert_eq!(exit_code(&run), 0, "{}", stderr(&run));
    }
    assert_identical_trees(&out_a, &out_b);

    let filtered = run(&[
        "experiment",
        "--config",
        config,
        "--out",
        dir.path().join("f").to_str().unwrap(),
        "--only-case",
        "C1",
        "--only-model",
        "blackbox:LR",
    ]);
    assert_eq!(exit_code(&filtered), 0, "{}", stderr(&filtered));
    let table = stdout(&filtered);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 2, "header + one case: {table}");
    assert_eq!(lines[0].split_whitespace().collect::<Vec<_>>(), ["case", "black:LR"]);

    // report renders the same table from the written files
    let reported = run(&["report", "--out", dir.path().join("f").to_str().unwrap()]);
    assert_eq!(exit_code(&reported), 0);
    assert_eq!(stdout(&reported), table);
}

#[test]
fn report_without_results_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(&["report", "--out", dir.path().join("nowhere").to_str().unwrap()]);
    assert_eq!(exit_code(&out), 1);
    let none = run(&["report"]);
    assert_eq!(exit_code(&none), 1);
}

#[test]
fn failing_cells_are_marked_and_exit_nonzero() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("diverge.json");
    // A learning rate of 1e12 diverges immediately on every grid point, so
    // the NN cell fails while the LR cell succeeds.
    fs::write(
        &path,
        r#"{
  "dataset": {"kind": "synthetic", "spec": {
    "workload_id": "tiny",
    "stage_count": 1,
    "core_grid": [4, 6, 8, 10, 12, 14],
    "data_sizes": [100.0],
    "replicates": 2,
    "noise_cv": 0.0,
    "law": {"kind": "ernest", "theta": [2.0, 1.0, 0.5, 0.0]},
    "seed": 11
  }},
  "scenario": {"family": "core-interpolation", "train_sizes": [100.0],
               "test_sizes": [100.0], "n_cases": 1},
  "families": ["lasso", "mlp"],
  "feature_sets": ["black-box"],
  "include_ernest": false,
  "grids": [{"family": "mlp", "hidden_layer_counts": [1], "layer_widths": [3],
             "activations": ["relu"], "l2_penalties": [0.0], "learning_rates": [1e12],
             "beta1s": [0.9], "minibatches": [1], "optimizers": ["sgd"], "epochs": 50}],
  "seeds": [3],
  "out_dir": "results"
}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2, "{}", stderr(&out));
    assert!(stdout(&out).contains("ERR"), "{}", stdout(&out));
    assert!(stderr(&out).contains("1 of 2 cells failed"), "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("\"status\": \"error\""), "{summary}");
    assert!(summary.contains("diverged"), "{summary}");
    // the healthy cell still wrote its report
    assert!(out_dir.join("cells").join("C1-blackbox-LR.json").exists());
}

#[test]
fn overwrite_needs_force_and_force_succeeds() {
    let dir = TempDir::new().unwrap();
    let config = experiment_config(dir.path());
    let config = config.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out = out_dir.to_str().unwrap();
    assert_eq!(exit_code(&run(&["experiment", "--config", config, "--out", out])), 0);
    let refused = run(&["experiment", "--config", config, "--out", out]);
    assert_eq!(exit_code(&refused), 1);
    assert!(stderr(&refused).contains("--force"), "{}", stderr(&refused));
    let forced = run(&["experiment", "--config", config, "--out", out, "--force"]);
    assert_eq!(exit_code(&forced), 0, "{}", stderr(&forced));
}

#[test]
fn seed_list_overrides_config_seeds() {
    let dir = TempDir::new().unwrap();
    let config = experiment_config(dir.path());
    let config = config.to_str().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        "--config",
        config,
        "--out",
        out_dir.to_str().unwrap(),
        "--seed-list",
        "41,42,43",
        "--only-model",
        "blackbox:LR",
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(out_dir.join("summary.json")).unwrap();
    assert!(summary.contains("41"), "{summary}");
    assert!(summary.contains("43"), "{summary}");
}

// ---------------------------------------------------------------------------
// bundled configs
// ---------------------------------------------------------------------------

fn bundled_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn every_bundled_config_validates() {
    let dir = bundled_config("");
    let mut names: Vec<String> = fs::read_dir(&dir)
        .expect("configs directory exists")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".json"))
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "acceptance-recovery.json",
            "kmeans-extrap.json",
            "kmeans-interp.json",
            "q26-extrap.json",
            "q26-interp.json",
            "sparkdl-extrap.json",
            "sparkdl-interp.json",
        ]
    );
    for name in &names {
        let config = bundled_config(name);
        // `report` without --out validates the config before resolving its
        // out_dir; a validation failure would print "invalid config" instead
        // of complaining about missing results.
        let out = run(&["report", "--config", config.to_str().unwrap()]);
        let err = stderr(&out);
        assert!(!err.contains("invalid config"), "{name}: {err}");
        assert!(!err.contains("malformed config"), "{name}: {err}");
    }
}

#[test]
fn bundled_smoke_config_runs_end_to_end() {
    let config = bundled_config("acceptance-recovery.json");
    let dir = TempDir::new().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "experiment",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "{}", stderr(&out));
    let table = stdout(&out);
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines.len(), 3, "header + C1 + C2: {table}");
    assert_eq!(
        lines[0].split_whitespace().collect::<Vec<_>>(),
        ["case", "gray:DT", "gray:LR", "black:DT", "black:LR", "Ernest"]
    );
    // the analytic column should sit near the 2% noise floor
    let ernest: f64 = lines[1].split_whitespace().last().unwrap().parse().unwrap();
    assert!(ernest < 5.0, "analytic MAPE {ernest} too high: {table}");
}

fn assert_identical_trees(a: &Path, b: &Path) {
    let mut paths_a = collect_files(a);
    let mut paths_b = collect_files(b);
    paths_a.sort();
    paths_b.sort();
    let rel = |paths: &[PathBuf], root: &Path| -> Vec<PathBuf> {
        paths.iter().map(|p| p.strip_prefix(root).unwrap().to_path_buf()).collect()
    };
    assert_eq!(rel(&paths_a, a), rel(&paths_b, b), "same file sets");
    for (pa, pb) in paths_a.iter().zip(&paths_b) {
        let ba = fs::read(pa).unwrap();
        let bb = fs::read(pb).unwrap();
        assert!(ba == bb, "{} differs from {}", pa.display(), pb.display());
    }
}

fn collect_files(root: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                files.push(path);
            }
        }
    }
    files
}
