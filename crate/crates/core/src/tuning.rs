//! Hyperparameter grids, cross-validation schemes, and exhaustive grid
//! search.
//!
//! Grid expansion is lexicographic: the first field of a grid is the
//! outermost loop, the last is the innermost, so point order is stable and
//! documented. Selection minimizes the validation mean squared error pooled
//! across folds; ties keep the earliest grid point.
//!
//! Gray-box feature matrices get their per-stage columns re-imputed inside
//! every fold from that fold's training rows only, so no validation-side
//! measurement leaks into model selection.

use crate::features::{impute_dag_features, FeatureError, FeatureMatrix, FeatureSetKind};
use crate::regressors::{
    fit_model, Activation, ForestParams, HyperParams, LassoParams, MaxFeatures, MinLeaf,
    MlpError, MlpParams, ModelError, ModelFamily, Optimizer, SplitCriterion, TreeParams,
};
use crate::seeding;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// How validation folds are formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "kebab-case")]
pub enum CvScheme {
    /// `k`-fold cross-validation over a seeded shuffle.
    KFold { k: usize },
    /// One seeded split holding out `fraction` of the rows for validation.
    HoldOut { fraction: f64 },
}

/// The scheme conventionally paired with each feature encoding: hold-out
/// 0.25 for gray box (whose imputation makes folds expensive and whose
/// matrices are wide), 5-fold otherwise.
pub fn default_scheme(kind: FeatureSetKind) -> CvScheme {
    match kind {
        FeatureSetKind::GrayBox => CvScheme::HoldOut { fraction: 0.25 },
        FeatureSetKind::Ernest | FeatureSetKind::BlackBox => CvScheme::KFold { k: 5 },
    }
}

/// Tuning failures.
#[derive(Debug, Error)]
pub enum TuneError {
    #[error("scheme needs at least {needed} rows, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("k-fold needs k >= 2 and hold-out needs a fraction in (0, 1)")]
    BadScheme,
    #[error("grid expands to no points")]
    EmptyGrid,
    #[error("every grid point diverged during validation")]
    AllPointsDiverged,
    #[error(transparent)]
    Fit(#[from] ModelError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Shuffles `0..n` with the given seed and cuts it into `k` contiguous
/// folds; the first `n mod k` folds get one extra row.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, TuneError> {
    if k < 2 {
        return Err(TuneError::BadScheme);
    }
    if n < k {
        return Err(TuneError::InsufficientData { needed: k, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seed, &[]));
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(order[at..at + len].to_vec());
        at += len;
    }
    Ok(folds)
}

/// Seeded single split: validation takes `max(1, round(fraction·n))` rows
/// (capped so at least one training row remains).
pub fn holdout_indices(
    n: usize,
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>), TuneError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(TuneError::BadScheme);
    }
    if n < 2 {
        return Err(TuneError::InsufficientData { needed: 2, got: n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeding::rng(seed, &[]));
    let n_val = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let mut val = order[..n_val].to_vec();
    let mut train = order[n_val..].to_vec();
    val.sort_unstable();
    train.sort_unstable();
    Ok((train, val))
}

/// L1-regularized linear regression grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LassoGrid {
    pub alphas: Vec<f64>,
    pub fit_intercept: Vec<bool>,
}

/// Decision-tree grid; `max_depth: null` means unlimited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeGrid {
    pub max_depth: Vec<Option<u32>>,
    pub max_features: Vec<MaxFeatures>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<MinLeaf>,
    pub criterion: Vec<SplitCriterion>,
}

/// Random-forest grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestGrid {
    pub max_depth: Vec<Option<u32>>,
    pub max_features: Vec<MaxFeatures>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<MinLeaf>,
    pub criterion: Vec<SplitCriterion>,
    pub n_trees: Vec<u32>,
}

/// Network grid: architectures are every `layer_widths`-tuple of each
/// length in `hidden_layer_counts`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpGrid {
    pub hidden_layer_counts: Vec<usize>,
    pub layer_widths: Vec<usize>,
    pub activations: Vec<Activation>,
    pub l2_penalties: Vec<f64>,
    pub learning_rates: Vec<f64>,
    pub beta1s: Vec<f64>,
    pub minibatches: Vec<u32>,
    pub optimizers: Vec<Optimizer>,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
}

fn default_epochs() -> u32 {
    10_000
}

/// A hyperparameter grid for one model family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelGrid {
    /// The analytic model has exactly one (empty) grid point.
    Ernest,
    Lasso(LassoGrid),
    DecisionTree(TreeGrid),
    RandomForest(ForestGrid),
    Mlp(MlpGrid),
}

impl ModelGrid {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelGrid::Ernest => ModelFamily::Ernest,
            ModelGrid::Lasso(_) => ModelFamily::Lasso,
            ModelGrid::DecisionTree(_) => ModelFamily::DecisionTree,
            ModelGrid::RandomForest(_) => ModelFamily::RandomForest,
            ModelGrid::Mlp(_) => ModelFamily::Mlp,
        }
    }

    /// All grid points, lexicographically (first field outermost).
    pub fn expand(&self) -> Vec<HyperParams> {
        match self {
            ModelGrid::Ernest => vec![HyperParams::Ernest],
            ModelGrid::Lasso(g) => {
                let mut out = Vec::new();
                for &alpha in &g.alphas {
                    for &fit_intercept in &g.fit_intercept {
                        out.push(HyperParams::Lasso(LassoParams::new(alpha, fit_intercept)));
                    }
                }
                out
            }
            ModelGrid::DecisionTree(g) => {
                let mut out = Vec::new();
                for &max_depth in &g.max_depth {
                    for &max_features in &g.max_features {
                        for &min_samples_split in &g.min_samples_split {
                            for &min_samples_leaf in &g.min_samples_leaf {
                                for &criterion in &g.criterion {
                                    out.push(HyperParams::DecisionTree(TreeParams {
                                        max_depth,
                                        max_features,
                                        min_samples_split,
                                        min_samples_leaf,
                                        criterion,
                                    }));
                                }
                            }
                        }
                    }
                }
                out
            }
            ModelGrid::RandomForest(g) => {
                let mut out = Vec::new();
                for &max_depth in &g.max_depth {
                    for &max_features in &g.max_features {
                        for &min_samples_split in &g.min_samples_split {
                            for &min_samples_leaf in &g.min_samples_leaf {
                                for &criterion in &g.criterion {
                                    for &n_trees in &g.n_trees {
                                        out.push(HyperParams::RandomForest(ForestParams {
                                            n_trees,
                                            tree: TreeParams {
                                                max_depth,
                                                max_features,
                                                min_samples_split,
                                                min_samples_leaf,
                                                criterion,
                                            },
                                            bootstrap: true,
                                        }));
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
            ModelGrid::Mlp(g) => {
                let mut out = Vec::new();
                for &n_layers in &g.hidden_layer_counts {
                    for hidden in width_tuples(&g.layer_widths, n_layers) {
                        for &activation in &g.activations {
                            for &l2 in &g.l2_penalties {
                                for &learning_rate in &g.learning_rates {
                                    for &beta1 in &g.beta1s {
                                        for &minibatches in &g.minibatches {
                                            for &optimizer in &g.optimizers {
                                                out.push(HyperParams::Mlp(MlpParams {
                                                    hidden: hidden.clone(),
                                                    activation,
                                                    l2,
                                                    learning_rate,
                                                    beta1,
                                                    minibatches,
                                                    optimizer,
                                                    epochs: g.epochs,
                                                }));
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// Every `len`-tuple over `widths`, lexicographic, first position outermost.
fn width_tuples(widths: &[usize], len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for _ in 0..len {
        let mut next = Vec::with_capacity(out.len() * widths.len());
        for prefix in &out {
            for &w in widths {
                let mut tuple = prefix.clone();
                tuple.push(w);
                next.push(tuple);
            }
        }
        out = next;
    }
    out
}

/// The stock search grid for each family.
pub fn default_grid(family: ModelFamily) -> ModelGrid {
    match family {
        ModelFamily::Ernest => ModelGrid::Ernest,
        ModelFamily::Lasso => ModelGrid::Lasso(LassoGrid {
            alphas: vec![0.001, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0],
            fit_intercept: vec![true, false],
        }),
        ModelFamily::DecisionTree => ModelGrid::DecisionTree(TreeGrid {
            max_depth: vec![Some(3), Some(5), Some(10), None],
            max_features: vec![MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log],
            min_samples_split: vec![2],
            min_samples_leaf: vec![
                MinLeaf::Fraction(0.01),
                MinLeaf::Fraction(0.05),
                MinLeaf::Fraction(0.10),
                MinLeaf::Fraction(0.20),
                MinLeaf::Fraction(0.30),
            ],
            criterion: vec![
                SplitCriterion::Mse,
                SplitCriterion::FriedmanMse,
                SplitCriterion::Mae,
            ],
        }),
        ModelFamily::RandomForest => ModelGrid::RandomForest(ForestGrid {
            max_depth: vec![Some(3), Some(10), Some(20), None],
            max_features: vec![MaxFeatures::Auto, MaxFeatures::Sqrt, MaxFeatures::Log],
            min_samples_split: vec![2],
            min_samples_leaf: vec![MinLeaf::Count(1), MinLeaf::Count(2), MinLeaf::Count(4)],
            criterion: vec![SplitCriterion::Mse, SplitCriterion::Mae],
            n_trees: vec![5, 10, 50, 100],
        }),
        ModelFamily::Mlp => ModelGrid::Mlp(MlpGrid {
            hidden_layer_counts: vec![1, 2, 3],
            layer_widths: vec![3, 4, 5],
            activations: vec![Activation::Sigmoid, Activation::Relu, Activation::Tanh],
            l2_penalties: vec![0.0001, 0.001, 0.01, 0.05, 0.1],
            learning_rates: vec![0.001, 0.01, 0.1],
            beta1s: vec![0.7, 0.8, 0.9],
            minibatches: vec![1],
            optimizers: vec![Optimizer::Adam, Optimizer::Sgd],
            epochs: default_epochs(),
        }),
    }
}

/// Validation outcome of one grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPointResult {
    /// Position in grid-expansion order.
    pub index: usize,
    pub hyper: HyperParams,
    /// Pooled validation mean squared error; infinite when training
    /// diverged on any fold.
    pub mse: f64,
}

/// Result of a grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchOutcome {
    pub best: HyperParams,
    pub best_index: usize,
    pub best_mse: f64,
    /// One entry per grid point, in expansion order.
    pub leaderboard: Vec<GridPointResult>,
}

/// Exhaustive grid search on a feature matrix.
///
/// Folds are built once from `seed` and shared by every grid point; the fit
/// of point `g` on fold `f` is seeded with a stream derived from
/// `(seed, g, f)`. Gray-box DAG columns of each fold's validation rows are
/// imputed from that fold's training rows. A network fold that diverges
/// marks the whole point with infinite error instead of failing the search.
pub fn grid_search(
    matrix: &FeatureMatrix,
    grid: &ModelGrid,
    scheme: CvScheme,
    seed: u64,
) -> Result<GridSearchOutcome, TuneError> {
    let points = grid.expand();
    if points.is_empty() {
        return Err(TuneError::EmptyGrid);
    }
    let n = matrix.n_rows();
    let folds: Vec<(Vec<usize>, Vec<usize>)> = match scheme {
        CvScheme::KFold { k } => kfold_indices(n, k, seed)?
            .into_iter()
            .map(|val| {
                let in_val: std::collections::HashSet<usize> = val.iter().copied().collect();
                let train: Vec<usize> = (0..n).filter(|i| !in_val.contains(i)).collect();
                (train, val)
            })
            .collect(),
        CvScheme::HoldOut { fraction } => vec![holdout_indices(n, fraction, seed)?],
    };
    let mut leaderboard = Vec::with_capacity(points.len());
    let mut best: Option<(usize, f64)> = None;
    for (g, hyper) in points.iter().enumerate() {
        let mut sse = 0.0;
        let mut count = 0usize;
        let mut diverged = false;
        for (f, (train_rows, val_rows)) in folds.iter().enumerate() {
            let train_m = matrix.select_rows(train_rows);
            let val_m = impute_dag_features(&train_m, &matrix.select_rows(val_rows))?;
            let fit_seed = seeding::derive(seed, &[g as u64, f as u64]);
            match fit_model(train_m.x.view(), train_m.y.view(), hyper, fit_seed) {
                Ok(model) => {
                    let pred = model.predict(val_m.x.view())?;
                    sse += pred
                        .iter()
                        .zip(val_m.y.iter())
                        .map(|(p, t)| (p - t) * (p - t))
                        .sum::<f64>();
                    count += val_rows.len();
                }
                Err(ModelError::Network(MlpError::Diverged { .. })) => {
                    diverged = true;
                    break;
                }
                Err(e) => return Err(TuneError::Fit(e)),
            }
        }
        let mse = if diverged {
            f64::INFINITY
        } else {
            sse / count as f64
        };
        leaderboard.push(GridPointResult {
            index: g,
            hyper: hyper.clone(),
            mse,
        });
        let improves = match best {
            None => mse.is_finite(),
            Some((_, best_mse)) => mse < best_mse,
        };
        if improves {
            best = Some((g, mse));
        }
    }
    let Some((best_index, best_mse)) = best else {
        return Err(TuneError::AllPointsDiverged);
    };
    Ok(GridSearchOutcome {
        best: points[best_index].clone(),
        best_index,
        best_mse,
        leaderboard,
    })
}

/// Renders a leaderboard as CSV, best point first (ties by grid order).
pub fn leaderboard_to_csv(outcome: &GridSearchOutcome) -> String {
    let mut rows: Vec<&GridPointResult> = outcome.leaderboard.iter().collect();
    rows.sort_by(|a, b| a.mse.total_cmp(&b.mse).then(a.index.cmp(&b.index)));
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record(["rank", "grid_index", "family", "validation_mse", "hyper"])
        .expect("csv header");
    for (rank, row) in rows.iter().enumerate() {
        writer
            .write_record([
                (rank + 1).to_string(),
                row.index.to_string(),
                row.hyper.family().as_str().to_string(),
                format!("{}", row.mse),
                serde_json::to_string(&row.hyper).expect("hyper serializes"),
            ])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}
