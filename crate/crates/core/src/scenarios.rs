//! Train/test scenario construction.
//!
//! Two scenario families probe a model's ability to predict configurations
//! it has never seen:
//!
//! * **Core interpolation**: all data sizes are available for training, but
//!   only a strided subset of the core grid. Case `Ck` keeps every
//!   `(k+1)`-th working-grid entry for training and tests on the rest, so
//!   higher cases train on progressively sparser grids.
//! * **Data extrapolation**: training is restricted to the case's strided
//!   core subset at the training sizes; testing covers the full working
//!   grid at held-out (larger) sizes.
//!
//! The working grid is the core grid with excluded cores removed — the
//! exclusion happens *before* striding, so excluding a core reshapes every
//! case downstream of it.

use crate::data::{dataset_filter, Dataset};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version stamped into scenario-configuration documents.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Which axis the scenario holds out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioFamily {
    CoreInterpolation,
    DataExtrapolation,
}

impl ScenarioFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioFamily::CoreInterpolation => "core-interpolation",
            ScenarioFamily::DataExtrapolation => "data-extrapolation",
        }
    }
}

impl std::fmt::Display for ScenarioFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One train/test split over core counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioCase {
    pub id: String,
    pub train_cores: Vec<u32>,
    pub test_cores: Vec<u32>,
}

/// A full scenario: the held-out axis, the size ranges, and the per-case
/// core splits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub workload_id: String,
    pub family: ScenarioFamily,
    pub excluded_cores: Vec<u32>,
    pub train_sizes: Vec<f64>,
    pub test_sizes: Vec<f64>,
    pub cases: Vec<ScenarioCase>,
}

/// Scenario construction and application failures.
#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("core grid must be non-empty and strictly increasing, with no zero entries")]
    BadCoreGrid,
    #[error("excluded core {0} is not in the core grid")]
    ExcludedCoreNotInGrid(u32),
    #[error("working grid has {0} entries after exclusions; at least 2 are needed")]
    WorkingGridTooSmall(usize),
    #[error("sizes must be non-empty, finite, positive, and strictly increasing")]
    BadSizes,
    #[error("at least one case is required")]
    NoCases,
    #[error("core interpolation tests at the training sizes, so test_sizes must equal train_sizes")]
    SizesMustMatchForInterpolation,
    #[error("data extrapolation must hold out sizes: test_sizes may not overlap train_sizes")]
    SizesMustBeHeldOut,
    #[error("scenario has no case `{0}`")]
    UnknownCase(String),
    #[error("case `{case_id}` selects no {part} runs from this dataset")]
    EmptySplit {
        case_id: String,
        part: &'static str,
    },
    #[error("scenario is for workload `{expected}`, dataset is `{found}`")]
    WorkloadMismatch { expected: String, found: String },
}

fn check_sizes(sizes: &[f64]) -> Result<(), ScenarioError> {
    if sizes.is_empty()
        || sizes.iter().any(|&s| !s.is_finite() || s <= 0.0)
        || sizes.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ScenarioError::BadSizes);
    }
    Ok(())
}

/// Builds the scenario configuration for a workload.
///
/// `n_cases` produces cases `C1..Cn`; case `Ck` trains on working-grid
/// indices divisible by `k+1`.
pub fn build_scenarios(
    workload_id: &str,
    family: ScenarioFamily,
    core_grid: &[u32],
    excluded_cores: &[u32],
    train_sizes: &[f64],
    test_sizes: &[f64],
    n_cases: usize,
) -> Result<ScenarioConfig, ScenarioError> {
    if core_grid.is_empty()
        || core_grid.contains(&0)
        || core_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(ScenarioError::BadCoreGrid);
    }
    for &e in excluded_cores {
        if !core_grid.contains(&e) {
            return Err(ScenarioError::ExcludedCoreNotInGrid(e));
        }
    }
    check_sizes(train_sizes)?;
    check_sizes(test_sizes)?;
    match family {
        ScenarioFamily::CoreInterpolation => {
            if train_sizes != test_sizes {
                return Err(ScenarioError::SizesMustMatchForInterpolation);
            }
        }
        ScenarioFamily::DataExtrapolation => {
            if test_sizes.iter().any(|t| train_sizes.contains(t)) {
                return Err(ScenarioError::SizesMustBeHeldOut);
            }
        }
    }
    if n_cases == 0 {
        return Err(ScenarioError::NoCases);
    }
    let working: Vec<u32> = core_grid
        .iter()
        .copied()
        .filter(|c| !excluded_cores.contains(c))
        .collect();
    if working.len() < 2 {
        return Err(ScenarioError::WorkingGridTooSmall(working.len()));
    }
    let cases = (1..=n_cases)
        .map(|k| {
            let stride = k + 1;
            let train_cores: Vec<u32> = working
                .iter()
                .enumerate()
                .filter_map(|(i, &c)| (i % stride == 0).then_some(c))
                .collect();
            let test_cores: Vec<u32> = match family {
                ScenarioFamily::CoreInterpolation => working
                    .iter()
                    .copied()
                    .filter(|c| !train_cores.contains(c))
                    .collect(),
                // Extrapolation tests the held-out sizes across the whole
                // working grid, trained cores included.
                ScenarioFamily::DataExtrapolation => working.clone(),
            };
            ScenarioCase {
                id: format!("C{k}"),
                train_cores,
                test_cores,
            }
        })
        .collect();
    Ok(ScenarioConfig {
        workload_id: workload_id.to_string(),
        family,
        excluded_cores: excluded_cores.to_vec(),
        train_sizes: train_sizes.to_vec(),
        test_sizes: test_sizes.to_vec(),
        cases,
    })
}

impl ScenarioConfig {
    pub fn case(&self, case_id: &str) -> Result<&ScenarioCase, ScenarioError> {
        self.cases
            .iter()
            .find(|c| c.id == case_id)
            .ok_or_else(|| ScenarioError::UnknownCase(case_id.to_string()))
    }
}

/// Splits a dataset into the train and test datasets of one case.
///
/// Training keeps runs at the case's training cores and the training sizes;
/// testing keeps runs at the case's test cores and the test sizes. Run order
/// within each side follows the input dataset.
pub fn apply_split(
    ds: &Dataset,
    config: &ScenarioConfig,
    case_id: &str,
) -> Result<(Dataset, Dataset), ScenarioError> {
    if ds.profile.workload_id != config.workload_id {
        return Err(ScenarioError::WorkloadMismatch {
            expected: config.workload_id.clone(),
            found: ds.profile.workload_id.clone(),
        });
    }
    let case = config.case(case_id)?;
    let train = dataset_filter(ds, |r| {
        case.train_cores.contains(&r.spark_cores) && config.train_sizes.contains(&r.data_size)
    });
    let test = dataset_filter(ds, |r| {
        case.test_cores.contains(&r.spark_cores) && config.test_sizes.contains(&r.data_size)
    });
    if train.runs.is_empty() {
        return Err(ScenarioError::EmptySplit {
            case_id: case_id.to_string(),
            part: "training",
        });
    }
    if test.runs.is_empty() {
        return Err(ScenarioError::EmptySplit {
            case_id: case_id.to_string(),
            part: "test",
        });
    }
    Ok((train, test))
}

/// On-disk scenario document.
#[derive(Serialize, Deserialize)]
struct ScenarioDocument {
    schema_version: u32,
    #[serde(flatten)]
    config: ScenarioConfig,
}

/// Scenario (de)serialization failures.
#[derive(Debug, Error)]
pub enum ScenarioIoError {
    #[error("unsupported scenario schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("malformed scenario document: {0}")]
    Malformed(#[from] serde_json::Error),
}

/// Serializes a scenario to pretty JSON (newline-terminated). The rendering
/// is byte-stable: the same configuration always produces the same text.
pub fn scenario_to_json(config: &ScenarioConfig) -> String {
    let doc = ScenarioDocument {
        schema_version: SCENARIO_SCHEMA_VERSION,
        config: config.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("scenario serializes");
    text.push('\n');
    text
}

/// Parses a scenario document, checking the schema version.
pub fn scenario_from_json(text: &str) -> Result<ScenarioConfig, ScenarioIoError> {
    let doc: ScenarioDocument = serde_json::from_str(text)?;
    if doc.schema_version != SCENARIO_SCHEMA_VERSION {
        return Err(ScenarioIoError::SchemaVersion {
            expected: SCENARIO_SCHEMA_VERSION,
            found: doc.schema_version,
        });
    }
    Ok(doc.config)
}
