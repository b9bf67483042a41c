//! Completion-time prediction for Spark-style applications.
//!
//! The crate is organised as a pipeline:
//!
//! * [`data`] — run records, workload profiles, datasets, validation;
//! * [`ingest`] — Spark event-log parsing, task→stage aggregation, CSV io;
//! * [`features`] — the three feature encodings (analytic scaling basis,
//!   black box, gray box), imputation and standardization;
//! * [`regressors`] — five model families fit from scratch (non-negative
//!   least squares, lasso, decision tree, random forest, multilayer
//!   perceptron) plus serialization of trained models;
//! * [`scenarios`] — core-interpolation and data-extrapolation splits;
//! * [`tuning`] — k-fold / hold-out grid search over hyper-parameter grids;
//! * [`evaluation`] — MAPE, repeated-run experiments, model comparison;
//! * [`synthgen`] — seeded synthetic datasets drawn from generative laws.
//!
//! Everything downstream of a seed is deterministic: fits are pure functions
//! of `(matrix, response, hyper-parameters, seed)`, and rerunning any
//! experiment with the same inputs reproduces results bit for bit.

pub mod data;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod regressors;
pub mod scenarios;
pub mod seeding;
pub mod synthgen;
pub mod tuning;

pub use data::{Dataset, RunRecord, StageMetrics, WorkloadProfile};
pub use features::{FeatureMatrix, FeatureSetKind};
pub use regressors::{HyperParams, ModelFamily, TrainedModel};

