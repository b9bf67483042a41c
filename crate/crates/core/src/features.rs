//! Feature encodings for completion-time models.
//!
//! Three encodings of a run are supported:
//!
//! * **Analytic scaling basis** (`Ernest`): the four-term basis
//!   `[s/c, ln c, √(s/c), s²/c]` of the classic non-negative least-squares
//!   scaling model; no intercept, consumed raw.
//! * **Black box** (`BlackBox`): `[s/c, ln c, s, c]` plus the TensorFlow core
//!   count for workloads that have one. Configuration-only — no run-time
//!   measurements leak in.
//! * **Gray box** (`GrayBox`): the black-box block plus, for every DAG stage,
//!   `[num_tasks, task_time max/avg, shuffle_time max/avg, bytes max/avg]`,
//!   and finally `1/tf_cores` for hybrid workloads. The per-stage columns are
//!   flagged in [`FeatureMatrix::dag_mask`]; at prediction time they are not
//!   observable for the test configuration and must be imputed from training
//!   means via [`impute_dag_features`].

use crate::data::{validate_run, Dataset, RunRecord, ValidationError, WorkloadProfile};
use ndarray::{Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Schema version stamped into feature-matrix sidecar documents.
pub const MATRIX_SCHEMA_VERSION: u32 = 1;

/// Which encoding to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSetKind {
    Ernest,
    BlackBox,
    GrayBox,
}

impl FeatureSetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureSetKind::Ernest => "ernest",
            FeatureSetKind::BlackBox => "blackbox",
            FeatureSetKind::GrayBox => "graybox",
        }
    }
}

impl std::fmt::Display for FeatureSetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Design matrix plus response for one dataset and encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    /// `true` exactly for per-stage (DAG) columns.
    pub dag_mask: Vec<bool>,
    pub x: Array2<f64>,
    /// Completion times in seconds.
    pub y: Array1<f64>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Indices of DAG-masked columns.
    pub fn dag_columns(&self) -> Vec<usize> {
        self.dag_mask
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// A new matrix containing only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let x = self.x.select(Axis(0), rows);
        let y = self.y.select(Axis(0), rows);
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            dag_mask: self.dag_mask.clone(),
            x,
            y,
        }
    }
}

/// Feature construction failures.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("run {index} is invalid: {source}")]
    InvalidRun {
        index: usize,
        #[source]
        source: ValidationError,
    },
    #[error("gray-box features need per-stage metrics, but run `{workload_id}`/{replicate_id} has none")]
    MissingStageMetrics {
        workload_id: String,
        replicate_id: u32,
    },
    #[error("dataset has no runs")]
    EmptyDataset,
    #[error("matrices are incompatible: {reason}")]
    Incompatible { reason: String },
    #[error("malformed feature-matrix document: {0}")]
    Malformed(String),
}

/// The four-term analytic scaling basis for a single run:
/// `[s/c, ln c, √(s/c), s²/c]`.
pub fn ernest_features(run: &RunRecord) -> [f64; 4] {
    let s = run.data_size;
    let c = f64::from(run.spark_cores);
    [s / c, c.ln(), (s / c).sqrt(), s * s / c]
}

/// Configuration-only features: `[s/c, ln c, s, c]` plus `tf_cores` when the
/// workload has a TensorFlow side.
pub fn blackbox_features(run: &RunRecord, profile: &WorkloadProfile) -> Vec<f64> {
    let s = run.data_size;
    let c = f64::from(run.spark_cores);
    let mut out = vec![s / c, c.ln(), s, c];
    if profile.has_tf_cores {
        out.push(f64::from(run.tf_cores.unwrap_or(0)));
    }
    out
}

/// Black-box features extended with every stage's aggregated task metrics
/// and, for hybrid workloads, the reciprocal TensorFlow core count.
pub fn graybox_features(run: &RunRecord, profile: &WorkloadProfile) -> Vec<f64> {
    let mut out = blackbox_features(run, profile);
    for stage in &run.stages {
        out.extend_from_slice(&[
            f64::from(stage.num_tasks),
            stage.task_time_max_ms,
            stage.task_time_avg_ms,
            stage.shuffle_time_max_ms,
            stage.shuffle_time_avg_ms,
            stage.bytes_max,
            stage.bytes_avg,
        ]);
    }
    if profile.has_tf_cores {
        out.push(1.0 / f64::from(run.tf_cores.unwrap_or(0)));
    }
    out
}

/// Column names and DAG mask for an encoding of the given profile.
pub fn feature_layout(kind: FeatureSetKind, profile: &WorkloadProfile) -> (Vec<String>, Vec<bool>) {
    let mut names: Vec<String>;
    match kind {
        FeatureSetKind::Ernest => {
            names = vec![
                "data_over_cores".into(),
                "log_cores".into(),
                "sqrt_data_over_cores".into(),
                "data_sq_over_cores".into(),
            ];
        }
        FeatureSetKind::BlackBox | FeatureSetKind::GrayBox => {
            names = vec![
                "data_over_cores".into(),
                "log_cores".into(),
                "data_size".into(),
                "cores".into(),
            ];
            if profile.has_tf_cores {
                names.push("tf_cores".into());
            }
        }
    }
    let mut mask = vec![false; names.len()];
    if kind == FeatureSetKind::GrayBox {
        for stage in 0..profile.stage_count {
            for metric in [
                "num_tasks",
                "task_time_max_ms",
                "task_time_avg_ms",
                "shuffle_time_max_ms",
                "shuffle_time_avg_ms",
                "bytes_max",
                "bytes_avg",
            ] {
                names.push(format!("stage{stage:02}_{metric}"));
                mask.push(true);
            }
        }
        if profile.has_tf_cores {
            names.push("inv_tf_cores".into());
            mask.push(false);
        }
    }
    (names, mask)
}

/// Builds the design matrix for a dataset under the chosen encoding.
///
/// Every run must validate against the dataset profile; gray-box encoding
/// additionally requires per-stage metrics on every run.
pub fn build_matrix(ds: &Dataset, kind: FeatureSetKind) -> Result<FeatureMatrix, FeatureError> {
    if ds.runs.is_empty() {
        return Err(FeatureError::EmptyDataset);
    }
    let (feature_names, dag_mask) = feature_layout(kind, &ds.profile);
    let mut rows: Vec<f64> = Vec::with_capacity(ds.runs.len() * feature_names.len());
    let mut y = Vec::with_capacity(ds.runs.len());
    for (index, run) in ds.runs.iter().enumerate() {
        validate_run(run, &ds.profile)
            .map_err(|source| FeatureError::InvalidRun { index, source })?;
        let feats = match kind {
            FeatureSetKind::Ernest => ernest_features(run).to_vec(),
            FeatureSetKind::BlackBox => blackbox_features(run, &ds.profile),
            FeatureSetKind::GrayBox => {
                if run.stages.is_empty() {
                    return Err(FeatureError::MissingStageMetrics {
                        workload_id: run.workload_id.clone(),
                        replicate_id: run.replicate_id,
                    });
                }
                graybox_features(run, &ds.profile)
            }
        };
        debug_assert_eq!(feats.len(), feature_names.len());
        rows.extend_from_slice(&feats);
        y.push(run.completion_time_s);
    }
    let x = Array2::from_shape_vec((ds.runs.len(), feature_names.len()), rows)
        .expect("row-major feature block");
    Ok(FeatureMatrix {
        feature_names,
        dag_mask,
        x,
        y: Array1::from_vec(y),
    })
}

/// Overwrites every DAG column of `test` with the arithmetic mean of the
/// corresponding `train` column (unweighted, over all training rows).
///
/// At prediction time the per-stage metrics of an unseen configuration are
/// unknown; the gray-box protocol replaces them with training averages.
/// Idempotent given the same training matrix.
pub fn impute_dag_features(
    train: &FeatureMatrix,
    test: &FeatureMatrix,
) -> Result<FeatureMatrix, FeatureError> {
    if train.feature_names != test.feature_names || train.dag_mask != test.dag_mask {
        return Err(FeatureError::Incompatible {
            reason: "train and test matrices have different column layouts".into(),
        });
    }
    if train.n_rows() == 0 {
        return Err(FeatureError::EmptyDataset);
    }
    let mut out = test.clone();
    let n = train.n_rows() as f64;
    for col in train.dag_columns() {
        let mean = train.x.column(col).sum() / n;
        out.x.column_mut(col).fill(mean);
    }
    Ok(out)
}

/// Per-column affine transform fitted on training data: subtract the mean,
/// divide by the population standard deviation (columns with zero variance
/// are only shifted).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    /// Population standard deviation per column; 0.0 marks a constant column.
    pub scale: Vec<f64>,
}

/// Fits a scaler on the columns of `x`.
pub fn fit_scaler(x: ArrayView2<f64>) -> Scaler {
    let n = x.nrows().max(1) as f64;
    let mut mean = Vec::with_capacity(x.ncols());
    let mut scale = Vec::with_capacity(x.ncols());
    for col in x.columns() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        mean.push(m);
        scale.push(var.sqrt());
    }
    Scaler { mean, scale }
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    /// Applies the transform, leaving zero-variance columns centred only.
    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let div = if self.scale[j] > 0.0 {
                self.scale[j]
            } else {
                1.0
            };
            col.mapv_inplace(|v| (v - self.mean[j]) / div);
        }
        out
    }
}

/// Fits a scaler on `train` and returns both matrices transformed.
pub fn standardize(
    train: ArrayView2<f64>,
    test: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Scaler) {
    let scaler = fit_scaler(train);
    (scaler.transform(train), scaler.transform(test), scaler)
}

/// Column used for the response when a matrix is written to CSV.
pub const RESPONSE_COLUMN: &str = "__response__";

/// Renders a matrix as CSV: feature columns by name, then the response.
pub fn matrix_to_csv(m: &FeatureMatrix) -> String {
    let mut out = String::new();
    out.push_str(&m.feature_names.join(","));
    if !m.feature_names.is_empty() {
        out.push(',');
    }
    out.push_str(RESPONSE_COLUMN);
    out.push('\n');
    for (row, y) in m.x.rows().into_iter().zip(m.y.iter()) {
        for v in row.iter() {
            out.push_str(&format!("{v}"));
            out.push(',');
        }
        out.push_str(&format!("{y}"));
        out.push('\n');
    }
    out
}

/// Sidecar document naming the DAG-masked columns of a matrix CSV.
#[derive(Debug, Serialize, Deserialize)]
struct MaskSidecar {
    schema_version: u32,
    dag_features: Vec<String>,
}

/// Renders the sidecar JSON listing the DAG-masked column names.
pub fn mask_sidecar_json(m: &FeatureMatrix) -> String {
    let doc = MaskSidecar {
        schema_version: MATRIX_SCHEMA_VERSION,
        dag_features: m
            .feature_names
            .iter()
            .zip(&m.dag_mask)
            .filter(|&(_, &masked)| masked)
            .map(|(n, _)| n.clone())
            .collect(),
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("sidecar serializes");
    out.push('\n');
    out
}

/// Parses a matrix CSV (plus optional mask sidecar) back into a
/// [`FeatureMatrix`].
pub fn matrix_from_csv(csv_text: &str, sidecar: Option<&str>) -> Result<FeatureMatrix, FeatureError> {
    let mut lines = csv_text.lines();
    let header = lines
        .next()
        .ok_or_else(|| FeatureError::Malformed("empty matrix CSV".into()))?;
    let mut cols: Vec<&str> = header.split(',').collect();
    match cols.pop() {
        Some(RESPONSE_COLUMN) => {}
        _ => {
            return Err(FeatureError::Malformed(format!(
                "matrix CSV must end with a `{RESPONSE_COLUMN}` column"
            )))
        }
    }
    let feature_names: Vec<String> = cols.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut values = Vec::with_capacity(feature_names.len() + 1);
        for field in line.split(',') {
            let v: f64 = field.parse().map_err(|_| {
                FeatureError::Malformed(format!("line {}: bad number `{field}`", lineno + 2))
            })?;
            values.push(v);
        }
        if values.len() != feature_names.len() + 1 {
            return Err(FeatureError::Malformed(format!(
                "line {}: expected {} fields, got {}",
                lineno + 2,
                feature_names.len() + 1,
                values.len()
            )));
        }
        y.push(values.pop().expect("row has a response"));
        rows.extend_from_slice(&values);
    }
    let dag_mask = match sidecar {
        None => vec![false; feature_names.len()],
        Some(text) => {
            let doc: MaskSidecar =
                serde_json::from_str(text).map_err(|e| FeatureError::Malformed(e.to_string()))?;
            if doc.schema_version != MATRIX_SCHEMA_VERSION {
                return Err(FeatureError::Malformed(format!(
                    "unsupported matrix schema version {}",
                    doc.schema_version
                )));
            }
            feature_names
                .iter()
                .map(|n| doc.dag_features.contains(n))
                .collect()
        }
    };
    let n_rows = y.len();
    let x = Array2::from_shape_vec((n_rows, feature_names.len()), rows)
        .map_err(|e| FeatureError::Malformed(e.to_string()))?;
    Ok(FeatureMatrix {
        feature_names,
        dag_mask,
        x,
        y: Array1::from_vec(y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::StageMetrics;
    use ndarray::array;

    fn profile(id: &str, stages: usize, tf: bool) -> WorkloadProfile {
        WorkloadProfile {
            workload_id: id.into(),
            stage_count: stages,
            has_tf_cores: tf,
            size_unit: "GB".into(),
        }
    }

    fn stage(seed: f64) -> StageMetrics {
        StageMetrics {
            num_tasks: 10,
            task_time_max_ms: 100.0 + seed,
            task_time_avg_ms: 50.0 + seed,
            shuffle_time_max_ms: 20.0,
            shuffle_time_avg_ms: 10.0,
            bytes_max: 1e7,
            bytes_avg: 5e6,
        }
    }

    fn run(
        profile: &WorkloadProfile,
        size: f64,
        cores: u32,
        tf: Option<u32>,
        rep: u32,
    ) -> RunRecord {
        RunRecord {
            workload_id: profile.workload_id.clone(),
            data_size: size,
            spark_cores: cores,
            tf_cores: tf,
            completion_time_s: 100.0,
            replicate_id: rep,
            stages: (0..profile.stage_count).map(|i| stage(i as f64)).collect(),
        }
    }

    #[test]
    // The expected row is a precomputed literal; the second entry is ln(10)
    // because the run uses ten cores, not because the constant is wanted.
    #[allow(clippy::approx_constant)]
    fn analytic_basis_values_are_exact() {
        let p = profile("q26", 0, false);
        let r = run(&p, 750.0, 10, None, 0);
        assert_eq!(
            ernest_features(&r),
            [75.0, 2.302585092994046, 8.660254037844387, 56250.0]
        );
        let r = run(&p, 250.0, 44, None, 1);
        let got = ernest_features(&r);
        let want = [
            5.681818181818182,
            3.784189633918261,
            2.3836564731139807,
            1420.4545454545455,
        ];
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs(), "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn blackbox_layout_without_tf() {
        let p = profile("q26", 0, false);
        let r = run(&p, 750.0, 10, None, 0);
        assert_eq!(
            blackbox_features(&r, &p),
            vec![75.0, 10f64.ln(), 750.0, 10.0]
        );
        let (names, mask) = feature_layout(FeatureSetKind::BlackBox, &p);
        assert_eq!(names, ["data_over_cores", "log_cores", "data_size", "cores"]);
        assert!(mask.iter().all(|&m| !m));
    }

    #[test]
    fn graybox_kmeans_has_109_features() {
        let p = profile("kmeans", 15, false);
        let r = run(&p, 15.0, 12, None, 0);
        let feats = graybox_features(&r, &p);
        assert_eq!(feats.len(), 4 + 15 * 7);
        let (names, mask) = feature_layout(FeatureSetKind::GrayBox, &p);
        assert_eq!(names.len(), 109);
        assert_eq!(mask.iter().filter(|&&m| m).count(), 105);
        assert!(!mask[0] && !mask[1] && !mask[2] && !mask[3]);
        assert_eq!(names[4], "stage00_num_tasks");
        assert_eq!(names[108], "stage14_bytes_avg");
    }

    #[test]
    fn graybox_hybrid_appends_reciprocal_tf_cores() {
        let p = profile("sparkdl", 8, true);
        let r = run(&p, 1500.0, 24, Some(48), 0);
        let feats = graybox_features(&r, &p);
        assert_eq!(feats.len(), 5 + 8 * 7 + 1);
        assert_eq!(feats[4], 48.0);
        assert_eq!(*feats.last().unwrap(), 0.020833333333333332);
        let (names, mask) = feature_layout(FeatureSetKind::GrayBox, &p);
        assert_eq!(names.len(), 62);
        assert_eq!(names.last().unwrap(), "inv_tf_cores");
        assert!(!mask[62 - 1], "reciprocal tf cores is not a DAG column");
        assert_eq!(mask.iter().filter(|&&m| m).count(), 56);
    }

    #[test]
    fn build_matrix_shapes_and_response() {
        let p = profile("kmeans", 2, false);
        let ds = Dataset::new(
            p.clone(),
            vec![run(&p, 10.0, 4, None, 0), run(&p, 10.0, 8, None, 1)],
        );
        let m = build_matrix(&ds, FeatureSetKind::GrayBox).unwrap();
        assert_eq!(m.x.dim(), (2, 4 + 2 * 7));
        assert_eq!(m.y, array![100.0, 100.0]);
        let e = build_matrix(&ds, FeatureSetKind::Ernest).unwrap();
        assert_eq!(e.x.dim(), (2, 4));
        assert!(e.dag_mask.iter().all(|&m| !m));
    }

    #[test]
    fn graybox_requires_stage_metrics() {
        let p = profile("kmeans", 2, false);
        let mut r = run(&p, 10.0, 4, None, 0);
        r.stages.clear();
        let ds = Dataset::new(p, vec![r]);
        assert!(matches!(
            build_matrix(&ds, FeatureSetKind::GrayBox).unwrap_err(),
            FeatureError::MissingStageMetrics { .. }
        ));
    }

    #[test]
    fn impute_sets_dag_columns_to_training_means() {
        let p = profile("kmeans", 1, false);
        let ds_train = Dataset::new(
            p.clone(),
            vec![run(&p, 10.0, 4, None, 0), run(&p, 10.0, 8, None, 1)],
        );
        let ds_test = Dataset::new(p.clone(), vec![run(&p, 10.0, 6, None, 2)]);
        let train = build_matrix(&ds_train, FeatureSetKind::GrayBox).unwrap();
        let test = build_matrix(&ds_test, FeatureSetKind::GrayBox).unwrap();
        let imputed = impute_dag_features(&train, &test).unwrap();
        for col in train.dag_columns() {
            let mean = train.x.column(col).sum() / 2.0;
            assert!(imputed.x.column(col).iter().all(|&v| v == mean));
        }
        // configuration columns untouched
        assert_eq!(imputed.x[[0, 3]], 6.0);
        // idempotent
        let again = impute_dag_features(&train, &imputed).unwrap();
        assert_eq!(again, imputed);
    }

    #[test]
    fn standardize_example_and_zero_variance() {
        let train = array![[1.0, 5.0], [3.0, 5.0]];
        let test = array![[2.0, 5.0]];
        let (tr, te, scaler) = standardize(train.view(), test.view());
        assert_eq!(tr, array![[-1.0, 0.0], [1.0, 0.0]]);
        assert_eq!(te, array![[0.0, 0.0]]);
        assert_eq!(scaler.scale, vec![1.0, 0.0]);
    }

    #[test]
    fn matrix_csv_round_trips() {
        let p = profile("sparkdl", 2, true);
        let ds = Dataset::new(
            p.clone(),
            vec![
                run(&p, 1000.0, 8, Some(48), 0),
                run(&p, 1500.0, 16, Some(48), 1),
            ],
        );
        let m = build_matrix(&ds, FeatureSetKind::GrayBox).unwrap();
        let csv = matrix_to_csv(&m);
        let sidecar = mask_sidecar_json(&m);
        let back = matrix_from_csv(&csv, Some(&sidecar)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_csv_requires_response_column() {
        assert!(matches!(
            matrix_from_csv("a,b\n1,2\n", None),
            Err(FeatureError::Malformed(_))
        ));
    }
}
