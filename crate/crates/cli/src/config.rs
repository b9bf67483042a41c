use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sparkperf_core::features::FeatureSetKind;
use sparkperf_core::regressors::ModelFamily;
use sparkperf_core::scenarios::ScenarioFamily;
use sparkperf_core::synthgen::SynthSpec;
use sparkperf_core::tuning::ModelGrid;

use crate::error::Failure;

/// Where the runs come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSource {
    /// Generate runs from a scaling law.
    Synthetic { spec: SynthSpec },
    /// Parse a directory of Spark event logs named
    /// `{workload}-s{size}-c{cores}[-t{tf}]-r{replicate}.jsonl`.
    EventLogs {
        dir: PathBuf,
        #[serde(default = "default_size_unit")]
        size_unit: String,
    },
    /// Load canonical runs/stages CSV files.
    Csv {
        runs: PathBuf,
        #[serde(default)]
        stages: Option<PathBuf>,
        #[serde(default = "default_size_unit")]
        size_unit: String,
    },
}

fn default_size_unit() -> String {
    "GB".into()
}

/// How train/test splits are carved out of the run grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub family: ScenarioFamily,
    #[serde(default)]
    pub excluded_cores: Vec<u32>,
    pub train_sizes: Vec<f64>,
    pub test_sizes: Vec<f64>,
    pub n_cases: usize,
}

/// One experiment: a dataset, a scenario, and the model/feature cells to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub scenario: ScenarioSection,
    #[serde(default = "default_feature_sets")]
    pub feature_sets: Vec<FeatureSetKind>,
    #[serde(default = "default_families")]
    pub families: Vec<ModelFamily>,
    /// Whether the analytic NNLS model runs alongside the learned cells.
    #[serde(default = "default_true")]
    pub include_ernest: bool,
    /// Per-family grid overrides; families not listed use the stock grids.
    #[serde(default)]
    pub grids: Vec<ModelGrid>,
    /// Seeds for repeated tuning+evaluation runs. Mandatory and explicit:
    /// nothing in a pipeline may depend on wall-clock entropy.
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    /// Free-form annotation carried with the config (provenance remarks,
    /// caveats about the setup). Never interpreted.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

fn default_feature_sets() -> Vec<FeatureSetKind> {
    vec![FeatureSetKind::GrayBox, FeatureSetKind::BlackBox]
}

fn default_families() -> Vec<ModelFamily> {
    vec![
        ModelFamily::DecisionTree,
        ModelFamily::Lasso,
        ModelFamily::Mlp,
        ModelFamily::RandomForest,
    ]
}

fn default_true() -> bool {
    true
}

/// A loaded config plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    pub base_dir: PathBuf,
}

impl LoadedConfig {
    /// Resolves a config-relative path against the config file's directory,
    /// so a config means the same thing from any working directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            self.base_dir.join(path)
        }
    }

    pub fn out_dir(&self, flag: Option<&Path>) -> PathBuf {
        match flag {
            Some(p) => p.to_path_buf(),
            None => self.resolve(&self.config.out_dir),
        }
    }
}

/// Reads and parses a config file. Shape errors (unknown fields, missing
/// required fields such as seeds) abort immediately; semantic problems are
/// collected exhaustively by [`validate`].
pub fn load_config(path: &Path) -> Result<LoadedConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
    let config: ExperimentConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::usage(format!("malformed config {}: {e}", path.display())))?;
    let base_dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    Ok(LoadedConfig { config, base_dir })
}

/// Checks everything checkable before any work starts and reports the
/// complete list of problems, not just the first.
pub fn validate(loaded: &LoadedConfig) -> Result<(), Failure> {
    let cfg = &loaded.config;
    let mut problems: Vec<String> = Vec::new();

    if cfg.seeds.is_empty() {
        problems.push("seeds must list at least one seed".into());
    }
    let unique: BTreeSet<u64> = cfg.seeds.iter().copied().collect();
    if unique.len() != cfg.seeds.len() {
        problems.push("seeds contains duplicates; repeated runs need distinct seeds".into());
    }

    check_cells(cfg, &mut problems);
    check_grids(cfg, &mut problems);
    check_scenario(&cfg.scenario, &mut problems);
    check_dataset(loaded, &mut problems);

    if problems.is_empty() {
        Ok(())
    } else {
        Err(Failure::usage(format!(
            "invalid config ({} problem{}):\n  {}",
            problems.len(),
            if problems.len() == 1 { "" } else { "s" },
            problems.join("\n  ")
        )))
    }
}

fn check_cells(cfg: &ExperimentConfig, problems: &mut Vec<String>) {
    if cfg.feature_sets.contains(&FeatureSetKind::Ernest) {
        problems.push(
            "feature_sets may not contain \"ernest\"; the analytic encoding is owned by the \
             analytic model (include_ernest)"
                .into(),
        );
    }
    if cfg.families.contains(&ModelFamily::Ernest) {
        problems.push(
            "families may not contain \"ernest\"; use include_ernest to run the analytic model"
                .into(),
        );
    }
    let fs_unique: BTreeSet<&str> = cfg.feature_sets.iter().map(|f| f.as_str()).collect();
    if fs_unique.len() != cfg.feature_sets.len() {
        problems.push("feature_sets contains duplicates".into());
    }
    let fam_unique: BTreeSet<&str> = cfg.families.iter().map(|f| f.as_str()).collect();
    if fam_unique.len() != cfg.families.len() {
        problems.push("families contains duplicates".into());
    }
    if cfg.families.is_empty() != cfg.feature_sets.is_empty() {
        problems.push("families and feature_sets must be both empty or both non-empty".into());
    }
    if cfg.families.is_empty() && cfg.feature_sets.is_empty() && !cfg.include_ernest {
        problems.push("nothing to run: no families/feature_sets and include_ernest is false".into());
    }
}

fn check_grids(cfg: &ExperimentConfig, problems: &mut Vec<String>) {
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for grid in &cfg.grids {
        let family = grid.family();
        if !seen.insert(family.as_str()) {
            problems.push(format!("grids lists family {family} more than once"));
        }
        if family == ModelFamily::Ernest {
            problems.push("grids may not override the analytic model (it has no grid)".into());
        } else if !cfg.families.contains(&family) {
            problems.push(format!(
                "grids overrides family {family}, which is not in families"
            ));
        }
        if grid.expand().is_empty() {
            problems.push(format!("the {family} grid expands to zero points"));
        }
    }
}

fn check_scenario(s: &ScenarioSection, problems: &mut Vec<String>) {
    if s.n_cases == 0 {
        problems.push("scenario.n_cases must be at least 1".into());
    }
    for (name, sizes) in [("train_sizes", &s.train_sizes), ("test_sizes", &s.test_sizes)] {
        if sizes.is_empty() {
            problems.push(format!("scenario.{name} must be non-empty"));
        }
        if sizes.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            problems.push(format!("scenario.{name} must contain finite positive sizes"));
        }
        if sizes.windows(2).any(|w| w[0] >= w[1]) {
            problems.push(format!("scenario.{name} must be strictly increasing"));
        }
    }
    match s.family {
        ScenarioFamily::CoreInterpolation => {
            if s.train_sizes != s.test_sizes {
                problems.push(
                    "core-interpolation holds out cores, not sizes: train_sizes and test_sizes \
                     must be identical"
                        .into(),
                );
            }
        }
        ScenarioFamily::DataExtrapolation => {
            if s.train_sizes.iter().any(|t| s.test_sizes.contains(t)) {
                problems.push(
                    "data-extrapolation predicts unseen sizes: train_sizes and test_sizes must \
                     be disjoint"
                        .into(),
                );
            }
        }
    }
}

fn check_dataset(loaded: &LoadedConfig, problems: &mut Vec<String>) {
    match &loaded.config.dataset {
        DatasetSource::Synthetic { spec } => {
            let declared: BTreeSet<u64> = spec.data_sizes.iter().map(|s| s.to_bits()).collect();
            let wanted = loaded
                .config
                .scenario
                .train_sizes
                .iter()
                .chain(&loaded.config.scenario.test_sizes);
            for &size in wanted {
                if !declared.contains(&size.to_bits()) {
                    problems.push(format!(
                        "scenario references size {size}, which the synthetic spec does not \
                         generate"
                    ));
                }
            }
        }
        DatasetSource::EventLogs { dir, .. } => {
            let dir = loaded.resolve(dir);
            if !dir.is_dir() {
                problems.push(format!("event-log directory {} does not exist", dir.display()));
            }
        }
        DatasetSource::Csv { runs, stages, .. } => {
            let runs = loaded.resolve(runs);
            if !runs.is_file() {
                problems.push(format!("runs CSV {} does not exist", runs.display()));
            }
            if let Some(stages) = stages {
                let stages = loaded.resolve(stages);
                if !stages.is_file() {
                    problems.push(format!("stages CSV {} does not exist", stages.display()));
                }
            }
        }
    }
}

/// One `--only-model` selector: a feature encoding plus a model family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSelector {
    pub feature_set: FeatureSetKind,
    pub family: ModelFamily,
}

impl ModelSelector {
    /// Parses `graybox:DT`, `blackbox:LR`, `ernest` and friends.
    pub fn parse(text: &str) -> Result<Self, Failure> {
        let bad = || {
            Failure::usage(format!(
                "invalid --only-model `{text}`: expected ernest, graybox:{{DT,LR,NN,RF}}, or \
                 blackbox:{{DT,LR,NN,RF}}"
            ))
        };
        let (kind_text, family_text) = match text.split_once(':') {
            Some((k, f)) => (k, Some(f)),
            None => (text, None),
        };
        let feature_set = match kind_text.to_ascii_lowercase().as_str() {
            "ernest" => FeatureSetKind::Ernest,
            "graybox" | "gray-box" | "gray" => FeatureSetKind::GrayBox,
            "blackbox" | "black-box" | "black" => FeatureSetKind::BlackBox,
            _ => return Err(bad()),
        };
        let family = match family_text.map(str::to_ascii_uppercase).as_deref() {
            None | Some("ERNEST") if feature_set == FeatureSetKind::Ernest => ModelFamily::Ernest,
            Some("DT") => ModelFamily::DecisionTree,
            Some("LR") => ModelFamily::Lasso,
            Some("NN") => ModelFamily::Mlp,
            Some("RF") => ModelFamily::RandomForest,
            _ => return Err(bad()),
        };
        if (family == ModelFamily::Ernest) != (feature_set == FeatureSetKind::Ernest) {
            return Err(bad());
        }
        Ok(ModelSelector { feature_set, family })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synth_config(extra: &str) -> String {
        format!(
            r#"{{
              "dataset": {{"kind": "synthetic", "spec": {{
                "workload_id": "w", "stage_count": 2,
                "core_grid": [2, 4, 6, 8], "data_sizes": [100.0],
                "replicates": 2, "noise_cv": 0.0,
                "law": {{"kind": "ernest", "theta": [1.0, 1.0, 1.0, 0.0]}},
                "seed": 5
              }}}},
              "scenario": {{"family": "core-interpolation", "train_sizes": [100.0],
                            "test_sizes": [100.0], "n_cases": 1}},
              "seeds": [1],
              "out_dir": "out"{extra}
            }}"#
        )
    }

    fn load_text(text: &str) -> LoadedConfig {
        let config = serde_json::from_str(text).expect("config parses");
        LoadedConfig { config, base_dir: PathBuf::from(".") }
    }

    #[test]
    fn minimal_synthetic_config_is_valid() {
        let loaded = load_text(&synth_config(""));
        validate(&loaded).unwrap();
        assert_eq!(loaded.config.feature_sets.len(), 2);
        assert_eq!(loaded.config.families.len(), 4);
        assert!(loaded.config.include_ernest);
    }

    #[test]
    fn missing_seed_in_synth_spec_is_a_shape_error() {
        let text = synth_config("").replace("\"seed\": 5\n", "\"ignored\": 5\n");
        let err = serde_json::from_str::<ExperimentConfig>(&text).unwrap_err();
        assert!(err.to_string().contains("seed") || err.to_string().contains("ignored"));
    }

    #[test]
    fn problems_are_reported_exhaustively() {
        let mut loaded = load_text(&synth_config(""));
        loaded.config.seeds = vec![];
        loaded.config.scenario.n_cases = 0;
        loaded.config.scenario.test_sizes = vec![200.0];
        let msg = validate(&loaded).unwrap_err().to_string();
        assert!(msg.contains("at least one seed"), "{msg}");
        assert!(msg.contains("n_cases"), "{msg}");
        assert!(msg.contains("must be identical"), "{msg}");
        assert!(msg.contains("does not generate"), "{msg}");
    }

    #[test]
    fn extrapolation_sizes_must_be_disjoint() {
        let mut loaded = load_text(&synth_config(""));
        loaded.config.scenario.family = ScenarioFamily::DataExtrapolation;
        loaded.config.scenario.train_sizes = vec![100.0, 200.0];
        loaded.config.scenario.test_sizes = vec![200.0];
        let msg = validate(&loaded).unwrap_err().to_string();
        assert!(msg.contains("disjoint"), "{msg}");
    }

    #[test]
    fn selector_parsing_covers_the_documented_forms() {
        assert_eq!(
            ModelSelector::parse("blackbox:LR").unwrap(),
            ModelSelector { feature_set: FeatureSetKind::BlackBox, family: ModelFamily::Lasso }
        );
        assert_eq!(
            ModelSelector::parse("gray-box:nn").unwrap(),
            ModelSelector { feature_set: FeatureSetKind::GrayBox, family: ModelFamily::Mlp }
        );
        assert_eq!(
            ModelSelector::parse("ernest").unwrap(),
            ModelSelector { feature_set: FeatureSetKind::Ernest, family: ModelFamily::Ernest }
        );
        assert!(ModelSelector::parse("blackbox").is_err());
        assert!(ModelSelector::parse("blackbox:Ernest").is_err());
        assert!(ModelSelector::parse("purple:LR").is_err());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let text = synth_config(", \"surprise\": 1");
        assert!(serde_json::from_str::<ExperimentConfig>(&text).is_err());
    }
}
