//! Fully connected feed-forward networks for regression, trained by
//! full-batch gradient descent (plain or Adam).
//!
//! The output layer is linear and one unit wide. The response is
//! standardized internally during fitting (population standard deviation;
//! a zero deviation falls back to 1), and predictions are mapped back to
//! the original scale. The training loss is the mean squared error plus an
//! L2 penalty on weights (biases are not penalized).

use crate::seeding;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hidden-layer activation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Sigmoid,
    Relu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation value `a = apply(z)`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Weight-update rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// Network hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    /// Hidden-layer widths, input to output.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    /// L2 penalty coefficient on weights.
    pub l2: f64,
    pub learning_rate: f64,
    /// Adam's first-moment decay; ignored by plain SGD.
    pub beta1: f64,
    /// Number of minibatches per epoch; only full-batch training
    /// (`minibatches = 1`) is supported.
    #[serde(default = "default_minibatches")]
    pub minibatches: u32,
    pub optimizer: Optimizer,
    #[serde(default = "default_epochs")]
    pub epochs: u32,
}

fn default_minibatches() -> u32 {
    1
}

fn default_epochs() -> u32 {
    10_000
}

const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// Network parameters; `weights[l]` has shape `(fan_in, fan_out)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    pub activation: Activation,
}

/// A fitted network together with the response scaling used in training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpFit {
    pub model: MlpModel,
    pub y_mean: f64,
    pub y_scale: f64,
}

impl MlpFit {
    /// Predicts on the original response scale.
    pub fn predict(&self, x: ArrayView2<f64>) -> Array1<f64> {
        self.model
            .predict_raw(x)
            .mapv(|v| v * self.y_scale + self.y_mean)
    }
}

/// Network training failures.
#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("design matrix has {x_rows} rows but the response has {y_len}")]
    DimensionMismatch { x_rows: usize, y_len: usize },
    #[error("training data is empty")]
    EmptyTraining,
    #[error("design matrix or response contains a non-finite value")]
    NonFiniteInput,
    #[error("invalid parameter: {0}")]
    BadParameter(&'static str),
    #[error("training diverged to a non-finite loss at epoch {epoch}")]
    Diverged { epoch: u32 },
}

impl MlpModel {
    /// Glorot-uniform initialization: each weight is drawn from
    /// `U(−√(6/(fan_in+fan_out)), +√(6/(fan_in+fan_out)))`, layer by layer
    /// in row-major order; biases start at zero.
    pub fn init(n_inputs: usize, hidden: &[usize], activation: Activation, seed: u64) -> MlpModel {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut rng = seeding::rng(seed, &[]);
        let mut weights = Vec::with_capacity(sizes.len() - 1);
        let mut biases = Vec::with_capacity(sizes.len() - 1);
        for layer in 0..sizes.len() - 1 {
            let (fan_in, fan_out) = (sizes[layer], sizes[layer + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut flat = Vec::with_capacity(fan_in * fan_out);
            for _ in 0..fan_in * fan_out {
                flat.push(rng.gen_range(-limit..limit));
            }
            weights.push(Array2::from_shape_vec((fan_in, fan_out), flat).expect("row-major"));
            biases.push(Array1::zeros(fan_out));
        }
        MlpModel {
            weights,
            biases,
            activation,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.weights[0].nrows()
    }

    /// Activations of every layer, input first, network output last.
    fn forward(&self, x: ArrayView2<f64>) -> Vec<Array2<f64>> {
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len() + 1);
        activations.push(x.to_owned());
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = activations[l].dot(w);
            z += b;
            if l < last {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            activations.push(z);
        }
        activations
    }

    /// Network output in the (standardized) training space.
    pub fn predict_raw(&self, x: ArrayView2<f64>) -> Array1<f64> {
        let out = self.forward(x).pop().expect("forward pass output");
        out.column(0).to_owned()
    }

    /// Mean squared error plus `l2·Σ weights²` (biases unpenalized).
    pub fn loss(&self, x: ArrayView2<f64>, y: ArrayView1<f64>, l2: f64) -> f64 {
        let pred = self.predict_raw(x);
        let n = y.len() as f64;
        let mse = pred
            .iter()
            .zip(y.iter())
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let penalty: f64 = self.weights.iter().map(|w| w.iter().map(|v| v * v).sum::<f64>()).sum();
        mse + l2 * penalty
    }

    /// Exact gradients of [`MlpModel::loss`] with respect to every weight
    /// matrix and bias vector, by reverse-mode accumulation.
    pub fn gradients(
        &self,
        x: ArrayView2<f64>,
        y: ArrayView1<f64>,
        l2: f64,
    ) -> (Vec<Array2<f64>>, Vec<Array1<f64>>) {
        let n_layers = self.weights.len();
        let activations = self.forward(x);
        let n = y.len() as f64;
        // d(loss)/d(output) for the squared-error term.
        let output = &activations[n_layers];
        let mut delta = output.clone();
        for (mut row, &target) in delta.rows_mut().into_iter().zip(y.iter()) {
            row[0] = 2.0 * (row[0] - target) / n;
        }
        let mut grad_w = vec![Array2::zeros((0, 0)); n_layers];
        let mut grad_b = vec![Array1::zeros(0); n_layers];
        for l in (0..n_layers).rev() {
            // Accumulate into the regularization term so the gradient stays in
            // standard layout; the matmul output is column-major because the
            // activation operand is a transposed view.
            let mut grad = 2.0 * l2 * &self.weights[l];
            grad += &activations[l].t().dot(&delta);
            grad_w[l] = grad;
            grad_b[l] = delta.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = delta.dot(&self.weights[l].t());
                upstream.zip_mut_with(&activations[l], |d, &a| {
                    *d *= self.activation.derivative_from_output(a);
                });
                delta = upstream;
            }
        }
        (grad_w, grad_b)
    }
}

fn validate(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &MlpParams) -> Result<(), MlpError> {
    if x.nrows() != y.len() {
        return Err(MlpError::DimensionMismatch {
            x_rows: x.nrows(),
            y_len: y.len(),
        });
    }
    if x.nrows() == 0 || x.ncols() == 0 {
        return Err(MlpError::EmptyTraining);
    }
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(MlpError::NonFiniteInput);
    }
    if params.hidden.is_empty() || params.hidden.contains(&0) {
        return Err(MlpError::BadParameter("hidden layer widths must be >= 1"));
    }
    if params.minibatches != 1 {
        return Err(MlpError::BadParameter(
            "only full-batch training (minibatches = 1) is supported",
        ));
    }
    if !(params.learning_rate.is_finite() && params.learning_rate > 0.0) {
        return Err(MlpError::BadParameter("learning_rate must be positive"));
    }
    if !(params.l2.is_finite() && params.l2 >= 0.0) {
        return Err(MlpError::BadParameter("l2 must be non-negative"));
    }
    if !(0.0..1.0).contains(&params.beta1) {
        return Err(MlpError::BadParameter("beta1 must lie in [0, 1)"));
    }
    if params.epochs == 0 {
        return Err(MlpError::BadParameter("epochs must be at least 1"));
    }
    Ok(())
}

struct AdamState {
    m_w: Vec<Array2<f64>>,
    v_w: Vec<Array2<f64>>,
    m_b: Vec<Array1<f64>>,
    v_b: Vec<Array1<f64>>,
    t: i32,
}

/// Trains a network on `(x, y)`. Initialization is seeded; training is
/// deterministic given the seed. A non-finite loss aborts with
/// [`MlpError::Diverged`].
pub fn fit_mlp(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &MlpParams,
    seed: u64,
) -> Result<MlpFit, MlpError> {
    validate(x, y, params)?;
    let n = y.len() as f64;
    let y_mean = y.sum() / n;
    let y_var = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum::<f64>() / n;
    let y_scale = if y_var > 0.0 { y_var.sqrt() } else { 1.0 };
    let y_std = y.mapv(|v| (v - y_mean) / y_scale);

    let mut model = MlpModel::init(x.ncols(), &params.hidden, params.activation, seed);
    let mut adam = AdamState {
        m_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
        v_w: model.weights.iter().map(|w| Array2::zeros(w.dim())).collect(),
        m_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        v_b: model.biases.iter().map(|b| Array1::zeros(b.len())).collect(),
        t: 0,
    };
    for epoch in 1..=params.epochs {
        let (grad_w, grad_b) = model.gradients(x, y_std.view(), params.l2);
        match params.optimizer {
            Optimizer::Sgd => {
                for l in 0..model.weights.len() {
                    model.weights[l].scaled_add(-params.learning_rate, &grad_w[l]);
                    model.biases[l].scaled_add(-params.learning_rate, &grad_b[l]);
                }
            }
            Optimizer::Adam => {
                adam.t += 1;
                let bc1 = 1.0 - params.beta1.powi(adam.t);
                let bc2 = 1.0 - ADAM_BETA2.powi(adam.t);
                for l in 0..model.weights.len() {
                    adam.m_w[l].zip_mut_with(&grad_w[l], |m, &g| {
                        *m = params.beta1 * *m + (1.0 - params.beta1) * g;
                    });
                    adam.v_w[l].zip_mut_with(&grad_w[l], |v, &g| {
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    });
                    {
                        let m = &adam.m_w[l];
                        let v = &adam.v_w[l];
                        model.weights[l].indexed_iter_mut().for_each(|(ij, w)| {
                            let m_hat = m[ij] / bc1;
                            let v_hat = v[ij] / bc2;
                            *w -= params.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                        });
                    }
                    adam.m_b[l].zip_mut_with(&grad_b[l], |m, &g| {
                        *m = params.beta1 * *m + (1.0 - params.beta1) * g;
                    });
                    adam.v_b[l].zip_mut_with(&grad_b[l], |v, &g| {
                        *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    });
                    {
                        let m = &adam.m_b[l];
                        let v = &adam.v_b[l];
                        model.biases[l].indexed_iter_mut().for_each(|(i, b)| {
                            let m_hat = m[i] / bc1;
                            let v_hat = v[i] / bc2;
                            *b -= params.learning_rate * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                        });
                    }
                }
            }
        }
        let loss = model.loss(x, y_std.view(), params.l2);
        if !loss.is_finite() {
            return Err(MlpError::Diverged { epoch });
        }
    }
    Ok(MlpFit {
        model,
        y_mean,
        y_scale,
    })
}
