//! Prediction-quality evaluation: MAPE and the tune-refit-test protocol.
//!
//! The protocol for one model on one train/test split, per seed:
//!
//! 1. build feature matrices for both sides;
//! 2. impute the test side's DAG columns from the *full* training matrix
//!    (a no-op for encodings without DAG columns);
//! 3. grid-search hyperparameters on the training matrix only;
//! 4. refit the winning point on the full training matrix with the same
//!    seed;
//! 5. score the mean absolute percentage error on the test side.
//!
//! Per-seed MAPEs are averaged over the requested seeds, so stochastic
//! families (forests, networks) are judged on repeated runs.

use crate::data::Dataset;
use crate::features::{build_matrix, impute_dag_features, FeatureError, FeatureSetKind};
use crate::regressors::{fit_model, HyperParams, ModelError, ModelFamily};
use crate::tuning::{default_scheme, grid_search, CvScheme, ModelGrid, TuneError};
use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// MAPE failures.
#[derive(Debug, Error, PartialEq)]
pub enum MapeError {
    #[error("cannot score zero predictions")]
    Empty,
    #[error("actual has {actual} values but predicted has {predicted}")]
    LengthMismatch { actual: usize, predicted: usize },
    #[error("actual value at index {index} is not positive, so a percentage error is undefined")]
    NonPositiveActual { index: usize },
    #[error("predicted value at index {index} is not finite")]
    NonFinitePrediction { index: usize },
}

/// Mean absolute percentage error, in percent:
/// `(100/N) · Σ |actual − predicted| / actual`.
///
/// The per-element terms are sorted before summation, which makes the
/// result bit-identical under any permutation of the (actual, predicted)
/// pairs. Actual values must be strictly positive; predictions only need
/// to be finite.
pub fn mape(actual: ArrayView1<f64>, predicted: ArrayView1<f64>) -> Result<f64, MapeError> {
    if actual.len() != predicted.len() {
        return Err(MapeError::LengthMismatch {
            actual: actual.len(),
            predicted: predicted.len(),
        });
    }
    if actual.is_empty() {
        return Err(MapeError::Empty);
    }
    let mut terms = Vec::with_capacity(actual.len());
    for (index, (&a, &p)) in actual.iter().zip(predicted.iter()).enumerate() {
        if !(a.is_finite() && a > 0.0) {
            return Err(MapeError::NonPositiveActual { index });
        }
        if !p.is_finite() {
            return Err(MapeError::NonFinitePrediction { index });
        }
        terms.push((a - p).abs() / a);
    }
    terms.sort_by(f64::total_cmp);
    Ok(terms.iter().sum::<f64>() * 100.0 / actual.len() as f64)
}

/// What to evaluate: an encoding, a hyperparameter grid, and optionally an
/// explicit validation scheme (defaulting per encoding).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub feature_set: FeatureSetKind,
    pub grid: ModelGrid,
    #[serde(default)]
    pub scheme: Option<CvScheme>,
}

impl ModelSpec {
    pub fn scheme(&self) -> CvScheme {
        self.scheme.unwrap_or_else(|| default_scheme(self.feature_set))
    }
}

/// Scores of one model spec on one train/test split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEvaluation {
    pub model: ModelFamily,
    pub feature_set: FeatureSetKind,
    pub seeds: Vec<u64>,
    pub mape_per_seed: Vec<f64>,
    /// Arithmetic mean of the per-seed MAPEs.
    pub mean_mape: f64,
    /// The grid point each seed's search selected.
    pub chosen_hyper: Vec<HyperParams>,
}

/// Evaluation failures.
#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Tune(#[from] TuneError),
    #[error("final fit failed: {0}")]
    FinalFit(#[from] ModelError),
    #[error(transparent)]
    Score(#[from] MapeError),
    #[error("at least one seed is required")]
    NoSeeds,
}

/// Runs the full protocol for one model spec over the given seeds.
pub fn evaluate_model(
    train: &Dataset,
    test: &Dataset,
    spec: &ModelSpec,
    seeds: &[u64],
) -> Result<ModelEvaluation, EvalError> {
    if seeds.is_empty() {
        return Err(EvalError::NoSeeds);
    }
    let train_m = build_matrix(train, spec.feature_set)?;
    let test_raw = build_matrix(test, spec.feature_set)?;
    let test_m = impute_dag_features(&train_m, &test_raw)?;
    let scheme = spec.scheme();
    let mut mape_per_seed = Vec::with_capacity(seeds.len());
    let mut chosen_hyper = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let outcome = grid_search(&train_m, &spec.grid, scheme, seed)?;
        let model = fit_model(train_m.x.view(), train_m.y.view(), &outcome.best, seed)?;
        let pred = model.predict(test_m.x.view())?;
        mape_per_seed.push(mape(test_m.y.view(), pred.view())?);
        chosen_hyper.push(outcome.best);
    }
    let mean_mape = mape_per_seed.iter().sum::<f64>() / mape_per_seed.len() as f64;
    Ok(ModelEvaluation {
        model: spec.grid.family(),
        feature_set: spec.feature_set,
        seeds: seeds.to_vec(),
        mape_per_seed,
        mean_mape,
        chosen_hyper,
    })
}
