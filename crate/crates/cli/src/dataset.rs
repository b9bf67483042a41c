use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sparkperf_core::ingest::{
    dataset_from_csv, dataset_from_runs, parse_event_log, parse_run_filename, run_record,
};
use sparkperf_core::synthgen::generate;
use sparkperf_core::Dataset;

use crate::config::{DatasetSource, LoadedConfig};
use crate::error::Failure;

/// How many runs exist per (size, cores, tf) configuration.
#[derive(Debug, Serialize)]
pub struct ConfigurationCount {
    pub data_size: f64,
    pub spark_cores: u32,
    pub tf_cores: Option<u32>,
    pub runs: u32,
}

/// What loading produced, for summaries and logs.
#[derive(Debug, Serialize)]
pub struct SourceReport {
    pub workload_id: String,
    pub runs: usize,
    pub configurations: Vec<ConfigurationCount>,
    /// Files skipped under `--skip-bad`, with the reason (file names only).
    pub skipped: Vec<String>,
}

impl SourceReport {
    fn of(ds: &Dataset, skipped: Vec<String>) -> Self {
        let mut configurations: Vec<ConfigurationCount> = Vec::new();
        for run in &ds.runs {
            let key = (run.data_size, run.spark_cores, run.tf_cores);
            match configurations
                .iter_mut()
                .find(|c| (c.data_size, c.spark_cores, c.tf_cores) == key)
            {
                Some(c) => c.runs += 1,
                None => configurations.push(ConfigurationCount {
                    data_size: run.data_size,
                    spark_cores: run.spark_cores,
                    tf_cores: run.tf_cores,
                    runs: 1,
                }),
            }
        }
        configurations.sort_by(|a, b| {
            (a.data_size, a.spark_cores, a.tf_cores)
                .partial_cmp(&(b.data_size, b.spark_cores, b.tf_cores))
                .expect("finite sizes")
        });
        SourceReport {
            workload_id: ds.profile.workload_id.clone(),
            runs: ds.runs.len(),
            configurations,
            skipped,
        }
    }

    /// `"20 configurations x 6 replicates"` when counts are uniform,
    /// `"20 configurations (4-6 replicates)"` otherwise.
    pub fn shape(&self) -> String {
        let (min, max) = self
            .configurations
            .iter()
            .fold((u32::MAX, 0), |(lo, hi), c| (lo.min(c.runs), hi.max(c.runs)));
        if min == max {
            format!("{} configurations x {min} replicates", self.configurations.len())
        } else {
            format!("{} configurations ({min}-{max} replicates)", self.configurations.len())
        }
    }
}

/// Materializes the dataset a config points at.
pub fn load_dataset(loaded: &LoadedConfig, skip_bad: bool) -> Result<(Dataset, SourceReport), Failure> {
    match &loaded.config.dataset {
        DatasetSource::Synthetic { spec } => {
            let ds = generate(spec).map_err(|e| Failure::usage(format!("synthetic spec: {e}")))?;
            let report = SourceReport::of(&ds, Vec::new());
            Ok((ds, report))
        }
        DatasetSource::EventLogs { dir, size_unit } => {
            let dir = loaded.resolve(dir);
            load_event_logs(&dir, size_unit, skip_bad)
        }
        DatasetSource::Csv { runs, stages, size_unit } => {
            let runs_path = loaded.resolve(runs);
            let runs_text = fs::read_to_string(&runs_path)
                .map_err(|e| Failure::data(format!("cannot read {}: {e}", runs_path.display())))?;
            let stages_text = match stages {
                Some(p) => {
                    let p = loaded.resolve(p);
                    Some(fs::read_to_string(&p).map_err(|e| {
                        Failure::data(format!("cannot read {}: {e}", p.display()))
                    })?)
                }
                None => None,
            };
            let ds = dataset_from_csv(&runs_text, stages_text.as_deref(), size_unit)
                .map_err(|e| Failure::data(format!("{}: {e}", runs_path.display())))?;
            let report = SourceReport::of(&ds, Vec::new());
            Ok((ds, report))
        }
    }
}

fn load_event_logs(dir: &Path, size_unit: &str, skip_bad: bool) -> Result<(Dataset, SourceReport), Failure> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Failure::data(format!("cannot list {}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::data(format!("no input logs in {}", dir.display())));
    }

    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for path in &paths {
        match load_one_log(path) {
            Ok(run) => runs.push(run),
            Err(reason) if skip_bad => {
                eprintln!("warning: skipping {reason}");
                skipped.push(reason);
            }
            Err(reason) => return Err(Failure::data(reason)),
        }
    }
    if runs.is_empty() {
        return Err(Failure::data(format!(
            "no input logs in {}: all {} were skipped",
            dir.display(),
            skipped.len()
        )));
    }
    let ds = dataset_from_runs(runs, size_unit).map_err(|e| Failure::data(e.to_string()))?;
    let report = SourceReport::of(&ds, skipped);
    Ok((ds, report))
}

fn load_one_log(path: &Path) -> Result<sparkperf_core::RunRecord, String> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| format!("{}: non-UTF-8 file name", path.display()))?;
    let identity = parse_run_filename(name).map_err(|e| format!("{}: {e}", path.display()))?;
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let parsed = parse_event_log(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(run_record(identity, parsed))
}
