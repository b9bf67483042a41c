//! Data ingestion: Spark event logs and CSV datasets.
//!
//! Event logs are newline-delimited JSON as written by Spark's event
//! logging. Only four event types matter here — application start/end,
//! stage completion, and task end — everything else is skipped. When a
//! stage was retried, only its last completed attempt counts. Task-level
//! metrics are aggregated into one [`StageMetrics`] row per stage, stages
//! ordered by ascending stage id.
//!
//! The CSV format is a runs table (one row per run) plus an optional
//! per-stage sidecar table joined on `(workload_id, replicate_id)`, which
//! therefore must identify a run uniquely within its workload.

use crate::data::{Dataset, RunRecord, StageMetrics, ValidationError, WorkloadProfile};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Ingestion failures.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line}: malformed event JSON: {source}")]
    MalformedLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("log is truncated: application start or end event is missing")]
    TruncatedLog,
    #[error("application end does not follow its start (duration {seconds}s)")]
    BadTimestamps { seconds: f64 },
    #[error("stage {stage} has tasks but no completion event")]
    OrphanTask { stage: u32 },
    #[error("stage {stage} completed but none of its tasks carry metrics")]
    StageWithoutTasks { stage: u32 },
    #[error("`{name}` does not match `{{workload}}-s{{size}}-c{{cores}}[-t{{tf}}]-r{{replicate}}.jsonl`: {reason}")]
    BadFilename { name: String, reason: &'static str },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("stage rows reference run `{workload_id}`/{replicate_id}, which is not in the runs table")]
    StageJoinMismatch {
        workload_id: String,
        replicate_id: u32,
    },
    #[error("run `{workload_id}`/{replicate_id} has stage indices {found:?}; expected 0..{expected}")]
    BadStageIndices {
        workload_id: String,
        replicate_id: u32,
        expected: usize,
        found: Vec<usize>,
    },
    #[error("no runs to ingest")]
    Empty,
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

// ---------------------------------------------------------------------------
// Spark event logs
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct StageInfo {
    #[serde(rename = "Stage ID")]
    stage_id: u32,
    #[serde(rename = "Stage Attempt ID")]
    attempt_id: u32,
}

#[derive(Deserialize)]
struct ShuffleReadMetrics {
    #[serde(rename = "Fetch Wait Time", default)]
    fetch_wait_time_ms: f64,
    #[serde(rename = "Remote Bytes Read", default)]
    remote_bytes_read: f64,
    #[serde(rename = "Local Bytes Read", default)]
    local_bytes_read: f64,
}

#[derive(Deserialize)]
struct ShuffleWriteMetrics {
    /// Nanoseconds in Spark logs, unlike every other duration.
    #[serde(rename = "Shuffle Write Time", default)]
    shuffle_write_time_ns: f64,
    #[serde(rename = "Shuffle Bytes Written", default)]
    shuffle_bytes_written: f64,
}

#[derive(Deserialize)]
struct TaskMetrics {
    #[serde(rename = "Executor Run Time")]
    executor_run_time_ms: f64,
    #[serde(rename = "Shuffle Read Metrics")]
    shuffle_read: Option<ShuffleReadMetrics>,
    #[serde(rename = "Shuffle Write Metrics")]
    shuffle_write: Option<ShuffleWriteMetrics>,
}

#[derive(Deserialize)]
#[serde(tag = "Event")]
enum SparkEvent {
    #[serde(rename = "SparkListenerApplicationStart")]
    ApplicationStart {
        #[serde(rename = "Timestamp")]
        timestamp: i64,
    },
    #[serde(rename = "SparkListenerApplicationEnd")]
    ApplicationEnd {
        #[serde(rename = "Timestamp")]
        timestamp: i64,
    },
    #[serde(rename = "SparkListenerStageCompleted")]
    StageCompleted {
        #[serde(rename = "Stage Info")]
        stage_info: StageInfo,
    },
    #[serde(rename = "SparkListenerTaskEnd")]
    TaskEnd {
        #[serde(rename = "Stage ID")]
        stage_id: u32,
        #[serde(rename = "Stage Attempt ID")]
        stage_attempt_id: u32,
        /// Absent for tasks that failed before reporting metrics.
        #[serde(rename = "Task Metrics")]
        task_metrics: Option<TaskMetrics>,
    },
    #[serde(other)]
    Other,
}

struct TaskSummary {
    run_time_ms: f64,
    shuffle_time_ms: f64,
    bytes: f64,
}

/// Everything a single event log contributes to a run record; the
/// workload identity comes from the filename instead.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRun {
    pub completion_time_s: f64,
    pub stages: Vec<StageMetrics>,
}

/// Parses one Spark event log.
pub fn parse_event_log(text: &str) -> Result<ParsedRun, IngestError> {
    let mut start: Option<i64> = None;
    let mut end: Option<i64> = None;
    // stage id → attempt id of the last completion event seen
    let mut completed: BTreeMap<u32, u32> = BTreeMap::new();
    // (stage id, attempt id) → task summaries
    let mut tasks: BTreeMap<(u32, u32), Vec<TaskSummary>> = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let event: SparkEvent =
            serde_json::from_str(line).map_err(|source| IngestError::MalformedLine {
                line: lineno + 1,
                source,
            })?;
        match event {
            SparkEvent::ApplicationStart { timestamp } => {
                start.get_or_insert(timestamp);
            }
            SparkEvent::ApplicationEnd { timestamp } => {
                end = Some(timestamp);
            }
            SparkEvent::StageCompleted { stage_info } => {
                completed.insert(stage_info.stage_id, stage_info.attempt_id);
            }
            SparkEvent::TaskEnd {
                stage_id,
                stage_attempt_id,
                task_metrics,
            } => {
                if let Some(m) = task_metrics {
                    let shuffle_time_ms = m
                        .shuffle_read
                        .as_ref()
                        .map_or(0.0, |r| r.fetch_wait_time_ms)
                        + m.shuffle_write
                            .as_ref()
                            .map_or(0.0, |w| w.shuffle_write_time_ns / 1e6);
                    let bytes = m
                        .shuffle_read
                        .as_ref()
                        .map_or(0.0, |r| r.remote_bytes_read + r.local_bytes_read)
                        + m.shuffle_write
                            .as_ref()
                            .map_or(0.0, |w| w.shuffle_bytes_written);
                    tasks
                        .entry((stage_id, stage_attempt_id))
                        .or_default()
                        .push(TaskSummary {
                            run_time_ms: m.executor_run_time_ms,
                            shuffle_time_ms,
                            bytes,
                        });
                }
            }
            SparkEvent::Other => {}
        }
    }
    let (Some(start), Some(end)) = (start, end) else {
        return Err(IngestError::TruncatedLog);
    };
    let completion_time_s = (end - start) as f64 / 1000.0;
    if completion_time_s <= 0.0 {
        return Err(IngestError::BadTimestamps {
            seconds: completion_time_s,
        });
    }
    // A task whose stage never completed points at a truncated or corrupt
    // log; tasks of superseded attempts are simply dropped.
    for &(stage_id, _) in tasks.keys() {
        if !completed.contains_key(&stage_id) {
            return Err(IngestError::OrphanTask { stage: stage_id });
        }
    }
    let mut stages = Vec::with_capacity(completed.len());
    for (&stage_id, &attempt_id) in &completed {
        let summaries = tasks
            .get(&(stage_id, attempt_id))
            .filter(|s| !s.is_empty())
            .ok_or(IngestError::StageWithoutTasks { stage: stage_id })?;
        let n = summaries.len() as f64;
        let agg = |f: fn(&TaskSummary) -> f64| -> (f64, f64) {
            let max = summaries.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
            let avg = summaries.iter().map(f).sum::<f64>() / n;
            (max, avg)
        };
        let (task_time_max_ms, task_time_avg_ms) = agg(|t| t.run_time_ms);
        let (shuffle_time_max_ms, shuffle_time_avg_ms) = agg(|t| t.shuffle_time_ms);
        let (bytes_max, bytes_avg) = agg(|t| t.bytes);
        stages.push(StageMetrics {
            num_tasks: summaries.len() as u32,
            task_time_max_ms,
            task_time_avg_ms,
            shuffle_time_max_ms,
            shuffle_time_avg_ms,
            bytes_max,
            bytes_avg,
        });
    }
    Ok(ParsedRun {
        completion_time_s,
        stages,
    })
}

// ---------------------------------------------------------------------------
// Filename convention
// ---------------------------------------------------------------------------

/// Run identity encoded in an event-log filename:
/// `{workload}-s{size}-c{cores}[-t{tf}]-r{replicate}.jsonl`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunIdentity {
    pub workload_id: String,
    pub data_size: f64,
    pub spark_cores: u32,
    pub tf_cores: Option<u32>,
    pub replicate_id: u32,
}

/// Parses the filename convention. The workload id may itself contain
/// dashes; the tagged fields are recognized from the end.
pub fn parse_run_filename(name: &str) -> Result<RunIdentity, IngestError> {
    let bad = |reason: &'static str| IngestError::BadFilename {
        name: name.to_string(),
        reason,
    };
    let stem = name
        .strip_suffix(".jsonl")
        .ok_or_else(|| bad("missing .jsonl extension"))?;
    let mut parts: Vec<&str> = stem.split('-').collect();
    let tagged = |parts: &mut Vec<&str>, tag: char| -> Option<String> {
        let last = parts.last()?;
        let rest = last.strip_prefix(tag)?;
        if rest.is_empty() {
            return None;
        }
        let owned = rest.to_string();
        parts.pop();
        Some(owned)
    };
    let replicate_id: u32 = tagged(&mut parts, 'r')
        .ok_or_else(|| bad("expected a trailing -r{replicate}"))?
        .parse()
        .map_err(|_| bad("replicate is not an unsigned integer"))?;
    let tf_cores: Option<u32> = match tagged(&mut parts, 't') {
        Some(text) => Some(
            text.parse()
                .map_err(|_| bad("tf cores is not an unsigned integer"))?,
        ),
        None => None,
    };
    let spark_cores: u32 = tagged(&mut parts, 'c')
        .ok_or_else(|| bad("expected -c{cores}"))?
        .parse()
        .map_err(|_| bad("cores is not an unsigned integer"))?;
    let data_size: f64 = tagged(&mut parts, 's')
        .ok_or_else(|| bad("expected -s{size}"))?
        .parse()
        .map_err(|_| bad("size is not a number"))?;
    if parts.iter().all(|p| p.is_empty()) {
        return Err(bad("workload id is empty"));
    }
    Ok(RunIdentity {
        workload_id: parts.join("-"),
        data_size,
        spark_cores,
        tf_cores,
        replicate_id,
    })
}

/// Combines a parsed log with its filename identity.
pub fn run_record(identity: RunIdentity, parsed: ParsedRun) -> RunRecord {
    RunRecord {
        workload_id: identity.workload_id,
        data_size: identity.data_size,
        spark_cores: identity.spark_cores,
        tf_cores: identity.tf_cores,
        completion_time_s: parsed.completion_time_s,
        replicate_id: identity.replicate_id,
        stages: parsed.stages,
    }
}

/// Builds a validated dataset from ingested runs; the profile (stage count,
/// TensorFlow side, workload id) is taken from the first run and every
/// other run must agree.
pub fn dataset_from_runs(runs: Vec<RunRecord>, size_unit: &str) -> Result<Dataset, IngestError> {
    let first = runs.first().ok_or(IngestError::Empty)?;
    let profile = WorkloadProfile {
        workload_id: first.workload_id.clone(),
        stage_count: first.stages.len(),
        has_tf_cores: first.tf_cores.is_some(),
        size_unit: size_unit.to_string(),
    };
    let ds = Dataset::new(profile, runs);
    ds.validate()?;
    Ok(ds)
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct RunRow {
    workload_id: String,
    data_size: f64,
    spark_cores: u32,
    tf_cores: Option<u32>,
    completion_time_s: f64,
    replicate_id: u32,
}

#[derive(Serialize, Deserialize)]
struct StageRow {
    workload_id: String,
    replicate_id: u32,
    stage_index: usize,
    num_tasks: u32,
    task_time_max_ms: f64,
    task_time_avg_ms: f64,
    shuffle_time_max_ms: f64,
    shuffle_time_avg_ms: f64,
    bytes_max: f64,
    bytes_avg: f64,
}

/// Renders the runs table (one CSV row per run, stages not included).
pub fn runs_to_csv(ds: &Dataset) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for run in &ds.runs {
        writer
            .serialize(RunRow {
                workload_id: run.workload_id.clone(),
                data_size: run.data_size,
                spark_cores: run.spark_cores,
                tf_cores: run.tf_cores,
                completion_time_s: run.completion_time_s,
                replicate_id: run.replicate_id,
            })
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Renders the per-stage sidecar table.
pub fn stages_to_csv(ds: &Dataset) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for run in &ds.runs {
        for (stage_index, stage) in run.stages.iter().enumerate() {
            writer
                .serialize(StageRow {
                    workload_id: run.workload_id.clone(),
                    replicate_id: run.replicate_id,
                    stage_index,
                    num_tasks: stage.num_tasks,
                    task_time_max_ms: stage.task_time_max_ms,
                    task_time_avg_ms: stage.task_time_avg_ms,
                    shuffle_time_max_ms: stage.shuffle_time_max_ms,
                    shuffle_time_avg_ms: stage.shuffle_time_avg_ms,
                    bytes_max: stage.bytes_max,
                    bytes_avg: stage.bytes_avg,
                })
                .expect("csv row");
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Parses a runs table plus optional stage sidecar back into a dataset.
pub fn dataset_from_csv(
    runs_csv: &str,
    stages_csv: Option<&str>,
    size_unit: &str,
) -> Result<Dataset, IngestError> {
    let mut reader = csv::Reader::from_reader(runs_csv.as_bytes());
    let mut runs: Vec<RunRecord> = Vec::new();
    for row in reader.deserialize() {
        let row: RunRow = row?;
        runs.push(RunRecord {
            workload_id: row.workload_id,
            data_size: row.data_size,
            spark_cores: row.spark_cores,
            tf_cores: row.tf_cores,
            completion_time_s: row.completion_time_s,
            replicate_id: row.replicate_id,
            stages: Vec::new(),
        });
    }
    if let Some(stages_csv) = stages_csv {
        let mut by_key: BTreeMap<(String, u32), Vec<StageRow>> = BTreeMap::new();
        let mut reader = csv::Reader::from_reader(stages_csv.as_bytes());
        for row in reader.deserialize() {
            let row: StageRow = row?;
            by_key
                .entry((row.workload_id.clone(), row.replicate_id))
                .or_default()
                .push(row);
        }
        let mut claimed: std::collections::BTreeSet<(String, u32)> = Default::default();
        for run in &mut runs {
            let key = (run.workload_id.clone(), run.replicate_id);
            if let Some(mut rows) = by_key.remove(&key) {
                rows.sort_by_key(|r| r.stage_index);
                let found: Vec<usize> = rows.iter().map(|r| r.stage_index).collect();
                if found != (0..rows.len()).collect::<Vec<usize>>() {
                    return Err(IngestError::BadStageIndices {
                        workload_id: key.0,
                        replicate_id: key.1,
                        expected: rows.len(),
                        found,
                    });
                }
                claimed.insert(key);
                run.stages = rows
                    .into_iter()
                    .map(|r| StageMetrics {
                        num_tasks: r.num_tasks,
                        task_time_max_ms: r.task_time_max_ms,
                        task_time_avg_ms: r.task_time_avg_ms,
                        shuffle_time_max_ms: r.shuffle_time_max_ms,
                        shuffle_time_avg_ms: r.shuffle_time_avg_ms,
                        bytes_max: r.bytes_max,
                        bytes_avg: r.bytes_avg,
                    })
                    .collect();
            }
        }
        if let Some(((workload_id, replicate_id), _)) = by_key.into_iter().next() {
            return Err(IngestError::StageJoinMismatch {
                workload_id,
                replicate_id,
            });
        }
    }
    dataset_from_runs(runs, size_unit)
}
