//! Core data model: one run of a workload, its per-stage metrics, and
//! datasets of runs tied to a workload profile.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Schema version stamped into every serialized dataset document.
pub const DATASET_SCHEMA_VERSION: u32 = 1;

/// Aggregated task metrics for one stage of one run.
///
/// Times are milliseconds; byte counts are raw. `*_avg` fields are arithmetic
/// means over the stage's tasks and can never exceed their `*_max` partner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageMetrics {
    pub num_tasks: u32,
    pub task_time_max_ms: f64,
    pub task_time_avg_ms: f64,
    pub shuffle_time_max_ms: f64,
    pub shuffle_time_avg_ms: f64,
    pub bytes_max: f64,
    pub bytes_avg: f64,
}

impl StageMetrics {
    /// Field-name / (avg, max) views used by validation.
    fn avg_max_pairs(&self) -> [(&'static str, f64, f64); 3] {
        [
            ("task_time", self.task_time_avg_ms, self.task_time_max_ms),
            (
                "shuffle_time",
                self.shuffle_time_avg_ms,
                self.shuffle_time_max_ms,
            ),
            ("bytes", self.bytes_avg, self.bytes_max),
        ]
    }
}

/// One execution of a workload at a fixed configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub workload_id: String,
    /// Input scale in the workload's own unit (GB, millions of rows, images…).
    pub data_size: f64,
    /// Cores allocated to the Spark side of the job.
    pub spark_cores: u32,
    /// Cores of an attached TensorFlow cluster, for hybrid workloads only.
    pub tf_cores: Option<u32>,
    /// End-to-end completion time in seconds.
    pub completion_time_s: f64,
    /// Identifies the run within its workload; unique per workload in
    /// canonical files so stage rows can be joined back to their run.
    pub replicate_id: u32,
    /// Per-stage metrics in stage order; empty when only black-box features
    /// are needed.
    pub stages: Vec<StageMetrics>,
}

/// Static description of a workload: how many stages its DAG has and whether
/// runs carry a TensorFlow core count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadProfile {
    pub workload_id: String,
    pub stage_count: usize,
    pub has_tf_cores: bool,
    /// Unit of `data_size`, informational only (e.g. "GB", "M rows").
    pub size_unit: String,
}

/// A set of runs of a single workload.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub profile: WorkloadProfile,
    pub runs: Vec<RunRecord>,
}

/// A run (or dataset) that violates the data model, naming the field at
/// fault.
#[derive(Debug, Error, PartialEq)]
pub enum ValidationError {
    #[error("field `{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
    #[error("field `{field}` must be positive, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("field `{field}` must be non-negative, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("spark_cores must be at least 1")]
    ZeroSparkCores,
    #[error("tf_cores must be at least 1 when present")]
    ZeroTfCores,
    #[error(
        "run has {found} stage metric(s) but profile `{workload_id}` declares {expected} stages"
    )]
    StageCountMismatch {
        workload_id: String,
        expected: usize,
        found: usize,
    },
    #[error("stage {stage}: num_tasks must be at least 1")]
    StageWithoutTasks { stage: usize },
    #[error("stage {stage}: `{field}` average {avg} exceeds maximum {max}")]
    AvgExceedsMax {
        stage: usize,
        field: &'static str,
        avg: f64,
        max: f64,
    },
    #[error(
        "run `{workload_id}`/{replicate_id}: tf_cores {} but profile says has_tf_cores={expected}",
        if *expected { "missing" } else { "present" }
    )]
    TfCoresMismatch {
        workload_id: String,
        replicate_id: u32,
        expected: bool,
    },
    #[error("run belongs to workload `{found}` but dataset profile is `{expected}`")]
    ForeignWorkload { expected: String, found: String },
    #[error("replicate id {replicate_id} appears more than once for workload `{workload_id}`")]
    DuplicateReplicate {
        workload_id: String,
        replicate_id: u32,
    },
}

fn check_finite(field: &'static str, value: f64) -> Result<(), ValidationError> {
    if !value.is_finite() {
        return Err(ValidationError::NonFinite { field, value });
    }
    Ok(())
}

fn check_positive(field: &'static str, value: f64) -> Result<(), ValidationError> {
    check_finite(field, value)?;
    if value <= 0.0 {
        return Err(ValidationError::NonPositive { field, value });
    }
    Ok(())
}

fn check_non_negative(field: &'static str, value: f64) -> Result<(), ValidationError> {
    check_finite(field, value)?;
    if value < 0.0 {
        return Err(ValidationError::Negative { field, value });
    }
    Ok(())
}

/// Checks one run against its workload profile.
///
/// Verifies positivity/finiteness of sizes and times, core counts, the
/// presence of `tf_cores` exactly when the profile declares it, and that the
/// stage list is either empty or matches the profile's stage count with
/// internally consistent (avg ≤ max, non-negative) metrics.
pub fn validate_run(run: &RunRecord, profile: &WorkloadProfile) -> Result<(), ValidationError> {
    if run.workload_id != profile.workload_id {
        return Err(ValidationError::ForeignWorkload {
            expected: profile.workload_id.clone(),
            found: run.workload_id.clone(),
        });
    }
    check_positive("data_size", run.data_size)?;
    check_positive("completion_time_s", run.completion_time_s)?;
    if run.spark_cores == 0 {
        return Err(ValidationError::ZeroSparkCores);
    }
    match (run.tf_cores, profile.has_tf_cores) {
        (Some(0), _) => return Err(ValidationError::ZeroTfCores),
        (Some(_), true) | (None, false) => {}
        (_, expected) => {
            return Err(ValidationError::TfCoresMismatch {
                workload_id: run.workload_id.clone(),
                replicate_id: run.replicate_id,
                expected,
            })
        }
    }
    if !run.stages.is_empty() && run.stages.len() != profile.stage_count {
        return Err(ValidationError::StageCountMismatch {
            workload_id: profile.workload_id.clone(),
            expected: profile.stage_count,
            found: run.stages.len(),
        });
    }
    for (idx, stage) in run.stages.iter().enumerate() {
        if stage.num_tasks == 0 {
            return Err(ValidationError::StageWithoutTasks { stage: idx });
        }
        for (field, avg, max) in stage.avg_max_pairs() {
            check_non_negative(field, avg)?;
            check_non_negative(field, max)?;
            if avg > max {
                return Err(ValidationError::AvgExceedsMax {
                    stage: idx,
                    field,
                    avg,
                    max,
                });
            }
        }
    }
    Ok(())
}

impl Dataset {
    pub fn new(profile: WorkloadProfile, runs: Vec<RunRecord>) -> Self {
        Dataset { profile, runs }
    }

    /// Validates every run plus dataset-level uniqueness of replicate ids.
    pub fn validate(&self) -> Result<(), ValidationError> {
        let mut seen = BTreeSet::new();
        for run in &self.runs {
            validate_run(run, &self.profile)?;
            if !seen.insert(run.replicate_id) {
                return Err(ValidationError::DuplicateReplicate {
                    workload_id: self.profile.workload_id.clone(),
                    replicate_id: run.replicate_id,
                });
            }
        }
        Ok(())
    }

    /// Distinct core counts in ascending order.
    pub fn core_grid(&self) -> Vec<u32> {
        let set: BTreeSet<u32> = self.runs.iter().map(|r| r.spark_cores).collect();
        set.into_iter().collect()
    }

    /// Distinct data sizes in ascending order.
    pub fn sizes(&self) -> Vec<f64> {
        let mut sizes: Vec<f64> = Vec::new();
        for run in &self.runs {
            if !sizes.contains(&run.data_size) {
                sizes.push(run.data_size);
            }
        }
        sizes.sort_by(f64::total_cmp);
        sizes
    }
}

/// Returns the runs satisfying `keep`, preserving order, replicate ids and
/// the profile. Idempotent: filtering twice with the same predicate is the
/// same as filtering once.
pub fn dataset_filter<F>(ds: &Dataset, keep: F) -> Dataset
where
    F: Fn(&RunRecord) -> bool,
{
    Dataset {
        profile: ds.profile.clone(),
        runs: ds.runs.iter().filter(|r| keep(r)).cloned().collect(),
    }
}

/// Versioned on-disk wrapper for [`Dataset`] JSON documents.
#[derive(Debug, Serialize, Deserialize)]
struct DatasetDocument {
    schema_version: u32,
    #[serde(flatten)]
    dataset: Dataset,
}

/// Why a dataset document could not be read back.
#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("unsupported dataset schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("malformed dataset document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ValidationError),
}

/// Serializes a dataset to its versioned JSON document.
pub fn dataset_to_json(ds: &Dataset) -> String {
    let doc = DatasetDocument {
        schema_version: DATASET_SCHEMA_VERSION,
        dataset: ds.clone(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("dataset serializes");
    out.push('\n');
    out
}

/// Parses and validates a versioned dataset document.
pub fn dataset_from_json(text: &str) -> Result<Dataset, DatasetIoError> {
    let doc: DatasetDocument = serde_json::from_str(text)?;
    if doc.schema_version != DATASET_SCHEMA_VERSION {
        return Err(DatasetIoError::SchemaVersion {
            expected: DATASET_SCHEMA_VERSION,
            found: doc.schema_version,
        });
    }
    doc.dataset.validate()?;
    Ok(doc.dataset)
}
