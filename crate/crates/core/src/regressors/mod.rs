//! The model zoo: an analytic scaling model and four learned regressors
//! behind one fit/predict facade.
//!
//! [`fit_model`] owns the input-scaling policy: LASSO and network inputs
//! are standardized with statistics fitted on the training block (the
//! fitted [`Scaler`] travels inside the [`TrainedModel`]), while the
//! analytic model, trees, and forests consume raw features.

pub mod forest;
pub mod linear;
pub mod mlp;
pub mod tree;

use crate::features::{fit_scaler, Scaler};
use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use forest::{fit_forest, ForestParams, RandomForest};
pub use linear::{lasso, nnls, LassoParams, LinearError, LinearModel};
pub use mlp::{fit_mlp, Activation, MlpError, MlpFit, MlpModel, MlpParams, Optimizer};
pub use tree::{
    fit_tree, DecisionTree, MaxFeatures, MinLeaf, Node, SplitCriterion, TreeError, TreeParams,
};

/// Schema version stamped into serialized model documents.
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// The five model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    /// Non-negative least squares on the analytic scaling basis.
    Ernest,
    /// L1-regularized linear regression.
    Lasso,
    DecisionTree,
    RandomForest,
    /// Feed-forward neural network.
    Mlp,
}

impl ModelFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::Ernest => "ernest",
            ModelFamily::Lasso => "lasso",
            ModelFamily::DecisionTree => "decision-tree",
            ModelFamily::RandomForest => "random-forest",
            ModelFamily::Mlp => "mlp",
        }
    }

    /// Compact label used in comparison tables.
    pub fn short_label(self) -> &'static str {
        match self {
            ModelFamily::Ernest => "Ernest",
            ModelFamily::Lasso => "LR",
            ModelFamily::DecisionTree => "DT",
            ModelFamily::RandomForest => "RF",
            ModelFamily::Mlp => "NN",
        }
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Family-specific hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum HyperParams {
    /// The analytic model has no knobs.
    Ernest,
    Lasso(LassoParams),
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    Mlp(MlpParams),
}

impl HyperParams {
    pub fn family(&self) -> ModelFamily {
        match self {
            HyperParams::Ernest => ModelFamily::Ernest,
            HyperParams::Lasso(_) => ModelFamily::Lasso,
            HyperParams::DecisionTree(_) => ModelFamily::DecisionTree,
            HyperParams::RandomForest(_) => ModelFamily::RandomForest,
            HyperParams::Mlp(_) => ModelFamily::Mlp,
        }
    }
}

/// Fitted parameters, by family shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    Linear(LinearModel),
    Tree(DecisionTree),
    Forest(RandomForest),
    Network(MlpFit),
}

/// A fitted model bundled with everything prediction needs: the
/// hyperparameters it was fitted under, the input scaler (when the family
/// uses one), the training seed, and the expected feature count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub hyper: HyperParams,
    pub scaler: Option<Scaler>,
    pub seed: u64,
    pub n_features: usize,
    pub kind: ModelKind,
}

/// Fitting and prediction failures across all families.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Linear(#[from] LinearError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Network(#[from] MlpError),
    #[error("model expects {expected} features, got {found}")]
    FeatureCountMismatch { expected: usize, found: usize },
}

/// Fits a model of the family selected by `hyper` on raw features.
///
/// The seed drives stochastic fitting (bootstrap samples, feature subsets,
/// network initialization); deterministic families ignore it but record it.
pub fn fit_model(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    hyper: &HyperParams,
    seed: u64,
) -> Result<TrainedModel, ModelError> {
    let n_features = x.ncols();
    let (kind, scaler) = match hyper {
        HyperParams::Ernest => {
            let weights = nnls(x, y)?;
            (
                ModelKind::Linear(LinearModel {
                    weights,
                    intercept: 0.0,
                }),
                None,
            )
        }
        HyperParams::Lasso(params) => {
            let scaler = fit_scaler(x);
            let xs = scaler.transform(x);
            let model = lasso(xs.view(), y, params)?;
            (ModelKind::Linear(model), Some(scaler))
        }
        HyperParams::DecisionTree(params) => {
            (ModelKind::Tree(fit_tree(x, y, params, seed)?), None)
        }
        HyperParams::RandomForest(params) => {
            (ModelKind::Forest(fit_forest(x, y, params, seed)?), None)
        }
        HyperParams::Mlp(params) => {
            let scaler = fit_scaler(x);
            let xs = scaler.transform(x);
            let fit = fit_mlp(xs.view(), y, params, seed)?;
            (ModelKind::Network(fit), Some(scaler))
        }
    };
    Ok(TrainedModel {
        hyper: hyper.clone(),
        scaler,
        seed,
        n_features,
        kind,
    })
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        self.hyper.family()
    }

    /// Predicts on raw features, applying the stored input scaler when the
    /// family uses one.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>, ModelError> {
        if x.ncols() != self.n_features {
            return Err(ModelError::FeatureCountMismatch {
                expected: self.n_features,
                found: x.ncols(),
            });
        }
        fn dispatch(kind: &ModelKind, input: ArrayView2<f64>) -> Array1<f64> {
            match kind {
                ModelKind::Linear(m) => m.predict(input),
                ModelKind::Tree(m) => m.predict(input),
                ModelKind::Forest(m) => m.predict(input),
                ModelKind::Network(m) => m.predict(input),
            }
        }
        Ok(match &self.scaler {
            Some(s) => dispatch(&self.kind, s.transform(x).view()),
            None => dispatch(&self.kind, x),
        })
    }
}

/// On-disk model document.
#[derive(Serialize, Deserialize)]
struct ModelDocument {
    schema_version: u32,
    family: ModelFamily,
    seed: u64,
    n_features: usize,
    hyper: HyperParams,
    scaler: Option<Scaler>,
    params: ModelKind,
}

/// Model (de)serialization failures.
#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("unsupported model schema version {found} (expected {expected})")]
    SchemaVersion { expected: u32, found: u32 },
    #[error("malformed model document: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("document family `{family}` does not match its parameters")]
    FamilyMismatch { family: ModelFamily },
}

/// Serializes a model to pretty JSON (newline-terminated).
pub fn model_to_json(model: &TrainedModel) -> String {
    let doc = ModelDocument {
        schema_version: MODEL_SCHEMA_VERSION,
        family: model.family(),
        seed: model.seed,
        n_features: model.n_features,
        hyper: model.hyper.clone(),
        scaler: model.scaler.clone(),
        params: model.kind.clone(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("model serializes");
    text.push('\n');
    text
}

/// Parses a model document, checking the schema version and that the
/// declared family, hyperparameters, and fitted parameters agree.
pub fn model_from_json(text: &str) -> Result<TrainedModel, ModelIoError> {
    let doc: ModelDocument = serde_json::from_str(text)?;
    if doc.schema_version != MODEL_SCHEMA_VERSION {
        return Err(ModelIoError::SchemaVersion {
            expected: MODEL_SCHEMA_VERSION,
            found: doc.schema_version,
        });
    }
    let kind_family_ok = matches!(
        (&doc.params, doc.hyper.family()),
        (ModelKind::Linear(_), ModelFamily::Ernest)
            | (ModelKind::Linear(_), ModelFamily::Lasso)
            | (ModelKind::Tree(_), ModelFamily::DecisionTree)
            | (ModelKind::Forest(_), ModelFamily::RandomForest)
            | (ModelKind::Network(_), ModelFamily::Mlp)
    );
    if doc.family != doc.hyper.family() || !kind_family_ok {
        return Err(ModelIoError::FamilyMismatch { family: doc.family });
    }
    Ok(TrainedModel {
        hyper: doc.hyper,
        scaler: doc.scaler,
        seed: doc.seed,
        n_features: doc.n_features,
        kind: doc.params,
    })
}
