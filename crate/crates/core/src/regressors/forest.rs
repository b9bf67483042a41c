//! Random forests: bagged regression trees with per-node feature
//! subsampling, predictions averaged across trees.

use crate::regressors::tree::{fit_tree, DecisionTree, TreeError, TreeParams};
use crate::seeding;
use ndarray::{Array1, ArrayView1, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Forest hyperparameters; `tree` configures every member tree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: u32,
    #[serde(flatten)]
    pub tree: TreeParams,
    /// Draw a bootstrap resample (n draws with replacement) per tree.
    /// Disabling it trains every tree on the full sample, leaving feature
    /// subsampling as the only source of diversity.
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
}

fn default_bootstrap() -> bool {
    true
}

/// A fitted forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
}

impl RandomForest {
    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(row)).sum();
        sum / self.trees.len() as f64
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Fits a forest. Tree `t` draws its bootstrap sample and its feature
/// subsets from streams derived from `(seed, t)`, so the forest is
/// reproducible and trees are independent of each other's draws.
pub fn fit_forest(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &ForestParams,
    seed: u64,
) -> Result<RandomForest, TreeError> {
    if params.n_trees == 0 {
        return Err(TreeError::NoTrees);
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(TreeError::EmptyTraining);
    }
    if x.nrows() != y.len() {
        return Err(TreeError::DimensionMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    let n = x.nrows();
    let mut trees = Vec::with_capacity(params.n_trees as usize);
    for t in 0..params.n_trees {
        let tree_seed = seeding::derive(seed, &[u64::from(t)]);
        let tree = if params.bootstrap {
            let mut rng = seeding::rng(tree_seed, &[0]);
            let sample: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let xs = x.select(ndarray::Axis(0), &sample);
            let ys = y.select(ndarray::Axis(0), &sample);
            fit_tree(
                xs.view(),
                ys.view(),
                &params.tree,
                seeding::derive(tree_seed, &[1]),
            )?
        } else {
            fit_tree(x, y, &params.tree, seeding::derive(tree_seed, &[1]))?
        };
        trees.push(tree);
    }
    Ok(RandomForest {
        trees,
        n_features: x.ncols(),
    })
}
