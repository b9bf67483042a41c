//! Synthetic benchmark generator.
//!
//! Produces [`Dataset`]s whose completion times follow a known generative
//! law, optionally perturbed by multiplicative lognormal noise, together
//! with per-stage task metrics that are plausibly correlated with the
//! configuration. Because the ground truth is known, generated data can
//! exercise model-recovery and scaling-behaviour checks that real traces
//! cannot.
//!
//! Determinism: the same [`SynthSpec`] always yields the same dataset,
//! byte for byte. Every run draws from its own RNG stream derived from
//! `(seed, size index, core index, replicate index)`, so inserting or
//! removing grid points never shifts the noise of unrelated runs.

use crate::data::{Dataset, RunRecord, StageMetrics, WorkloadProfile};
use crate::seeding;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Stream tags keeping stage-constant draws separate from per-run draws.
const STAGE_STREAM: u64 = 1;
const RUN_STREAM: u64 = 2;

/// Ground-truth completion-time law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GenerativeLaw {
    /// The analytic scaling form
    /// `θ₁·s/c + θ₂·ln c + θ₃·√(s/c) + θ₄·s²/c`, optionally extended by a
    /// serial term `serial_coef·s^serial_exp` that no `1/c` basis captures
    /// (defaults keep the term switched off).
    Ernest {
        theta: [f64; 4],
        #[serde(default)]
        serial_coef: f64,
        #[serde(default = "default_serial_exp")]
        serial_exp: f64,
    },
    /// The same four-term core in the *effective* core count
    /// `ĉ = min(c, saturation_cores)`, plus a linear per-core overhead on the
    /// raw core count and a flat penalty on designated core counts. Scaling
    /// stops paying off beyond the saturation point while coordination cost
    /// keeps growing — the regime where the analytic form breaks down.
    Irregular {
        theta: [f64; 4],
        #[serde(default)]
        overhead_per_core: f64,
        #[serde(default)]
        step_penalty: f64,
        #[serde(default)]
        step_cores: BTreeSet<u32>,
        saturation_cores: u32,
    },
}

fn default_serial_exp() -> f64 {
    1.0
}

/// Noise-free completion time of `law` at one configuration, in seconds.
pub fn law_time(law: &GenerativeLaw, data_size: f64, cores: u32) -> f64 {
    fn core_terms(theta: &[f64; 4], s: f64, c: f64) -> f64 {
        theta[0] * (s / c) + theta[1] * c.ln() + theta[2] * (s / c).sqrt() + theta[3] * s * s / c
    }
    match law {
        GenerativeLaw::Ernest {
            theta,
            serial_coef,
            serial_exp,
        } => core_terms(theta, data_size, f64::from(cores)) + serial_coef * data_size.powf(*serial_exp),
        GenerativeLaw::Irregular {
            theta,
            overhead_per_core,
            step_penalty,
            step_cores,
            saturation_cores,
        } => {
            let effective = cores.min(*saturation_cores);
            let mut t = core_terms(theta, data_size, f64::from(effective));
            t += overhead_per_core * f64::from(cores);
            if step_cores.contains(&cores) {
                t += step_penalty;
            }
            t
        }
    }
}

/// Full description of a synthetic benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub workload_id: String,
    /// Number of DAG stages to synthesize per run.
    pub stage_count: usize,
    /// Constant TensorFlow core count for hybrid workloads; `None` for pure
    /// Spark workloads.
    #[serde(default)]
    pub tf_cores: Option<u32>,
    #[serde(default = "default_size_unit")]
    pub size_unit: String,
    /// Core counts to sweep, strictly increasing.
    pub core_grid: Vec<u32>,
    /// Data sizes to sweep, strictly increasing.
    pub data_sizes: Vec<f64>,
    /// Repeated runs per (size, cores) cell.
    pub replicates: u32,
    /// Coefficient of variation of the multiplicative lognormal noise;
    /// 0 disables noise entirely.
    pub noise_cv: f64,
    pub law: GenerativeLaw,
    pub seed: u64,
}

fn default_size_unit() -> String {
    "GB".into()
}

/// Generator failures.
#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    #[error("core grid must be non-empty and strictly increasing, with no zero entries")]
    BadCoreGrid,
    #[error("data sizes must be non-empty, finite, positive, and strictly increasing")]
    BadDataSizes,
    #[error("replicates must be at least 1")]
    NoReplicates,
    #[error("noise_cv must lie in [0, 1), got {0}")]
    BadNoiseCv(f64),
    #[error("law coefficient {name} must be finite and non-negative, got {value}")]
    BadCoefficient { name: &'static str, value: f64 },
    #[error("law yields non-positive time {value} at size {data_size}, {cores} cores")]
    NonPositiveTime {
        data_size: f64,
        cores: u32,
        value: f64,
    },
    #[error("tf_cores must be at least 1 when set")]
    ZeroTfCores,
}

fn check_coefficient(name: &'static str, value: f64) -> Result<(), SynthError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(SynthError::BadCoefficient { name, value })
    }
}

fn validate_spec(spec: &SynthSpec) -> Result<(), SynthError> {
    if spec.core_grid.is_empty()
        || spec.core_grid.contains(&0)
        || spec.core_grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(SynthError::BadCoreGrid);
    }
    if spec.data_sizes.is_empty()
        || spec
            .data_sizes
            .iter()
            .any(|&s| !s.is_finite() || s <= 0.0)
        || spec.data_sizes.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(SynthError::BadDataSizes);
    }
    if spec.replicates == 0 {
        return Err(SynthError::NoReplicates);
    }
    if !(0.0..1.0).contains(&spec.noise_cv) {
        return Err(SynthError::BadNoiseCv(spec.noise_cv));
    }
    if spec.tf_cores == Some(0) {
        return Err(SynthError::ZeroTfCores);
    }
    match &spec.law {
        GenerativeLaw::Ernest {
            theta,
            serial_coef,
            serial_exp,
        } => {
            for (i, &t) in theta.iter().enumerate() {
                check_coefficient(["theta1", "theta2", "theta3", "theta4"][i], t)?;
            }
            check_coefficient("serial_coef", *serial_coef)?;
            check_coefficient("serial_exp", *serial_exp)?;
        }
        GenerativeLaw::Irregular {
            theta,
            overhead_per_core,
            step_penalty,
            saturation_cores,
            ..
        } => {
            for (i, &t) in theta.iter().enumerate() {
                check_coefficient(["theta1", "theta2", "theta3", "theta4"][i], t)?;
            }
            check_coefficient("overhead_per_core", *overhead_per_core)?;
            check_coefficient("step_penalty", *step_penalty)?;
            if *saturation_cores == 0 {
                return Err(SynthError::BadCoreGrid);
            }
        }
    }
    // The law must be a valid completion time everywhere on the grid.
    for &s in &spec.data_sizes {
        for &c in &spec.core_grid {
            let t = law_time(&spec.law, s, c);
            if !t.is_finite() || t <= 0.0 {
                return Err(SynthError::NonPositiveTime {
                    data_size: s,
                    cores: c,
                    value: t,
                });
            }
        }
    }
    Ok(())
}

/// Per-stage structural constants, fixed for the whole benchmark so that the
/// same stage behaves consistently across configurations.
struct StageShape {
    weight: f64,
    tasks_base: f64,
    shuffle_frac: f64,
    bytes_per_unit: f64,
}

fn stage_shapes(spec: &SynthSpec) -> Vec<StageShape> {
    let mut shapes: Vec<StageShape> = (0..spec.stage_count)
        .map(|i| {
            let mut rng = seeding::rng(spec.seed, &[STAGE_STREAM, i as u64]);
            StageShape {
                weight: rng.gen_range(0.5..1.5),
                tasks_base: rng.gen_range(8.0..64.0),
                shuffle_frac: rng.gen_range(0.05..0.30),
                bytes_per_unit: rng.gen_range(1e6..1e8),
            }
        })
        .collect();
    let total: f64 = shapes.iter().map(|s| s.weight).sum();
    if total > 0.0 {
        for s in &mut shapes {
            s.weight /= total;
        }
    }
    shapes
}

/// Generates the dataset described by `spec`.
///
/// Runs are emitted size-major, then cores, then replicate, with a globally
/// sequential `replicate_id`. With `noise_cv = 0` the replicates of a cell
/// are identical except for that id.
pub fn generate(spec: &SynthSpec) -> Result<Dataset, SynthError> {
    validate_spec(spec)?;
    let shapes = stage_shapes(spec);
    let sigma = if spec.noise_cv > 0.0 {
        (1.0 + spec.noise_cv * spec.noise_cv).ln().sqrt()
    } else {
        0.0
    };
    let first_size = spec.data_sizes[0];
    let mut runs = Vec::with_capacity(
        spec.data_sizes.len() * spec.core_grid.len() * spec.replicates as usize,
    );
    let mut replicate_id: u32 = 0;
    for (si, &size) in spec.data_sizes.iter().enumerate() {
        for (ci, &cores) in spec.core_grid.iter().enumerate() {
            let base = law_time(&spec.law, size, cores);
            for rep in 0..spec.replicates {
                let mut rng =
                    seeding::rng(spec.seed, &[RUN_STREAM, si as u64, ci as u64, u64::from(rep)]);
                let mult = if sigma > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    (sigma * z).exp()
                } else {
                    1.0
                };
                let t = base * mult;
                let stages = shapes
                    .iter()
                    .map(|shape| {
                        let num_tasks =
                            (shape.tasks_base * size / first_size).round().max(1.0) as u32;
                        let wall_ms = t * 1000.0 * shape.weight;
                        let task_avg = wall_ms * f64::from(cores) / f64::from(num_tasks);
                        let task_max = task_avg * (1.0 + spec.noise_cv * rng.gen_range(0.0..1.0));
                        let shuffle_avg = shape.shuffle_frac * task_avg;
                        let shuffle_max =
                            shuffle_avg * (1.0 + spec.noise_cv * rng.gen_range(0.0..1.0));
                        let bytes_avg = shape.bytes_per_unit * size / f64::from(num_tasks);
                        let bytes_max =
                            bytes_avg * (1.0 + spec.noise_cv * rng.gen_range(0.0..1.0));
                        StageMetrics {
                            num_tasks,
                            task_time_max_ms: task_max,
                            task_time_avg_ms: task_avg,
                            shuffle_time_max_ms: shuffle_max,
                            shuffle_time_avg_ms: shuffle_avg,
                            bytes_max,
                            bytes_avg,
                        }
                    })
                    .collect();
                runs.push(RunRecord {
                    workload_id: spec.workload_id.clone(),
                    data_size: size,
                    spark_cores: cores,
                    tf_cores: spec.tf_cores,
                    completion_time_s: t,
                    replicate_id,
                    stages,
                });
                replicate_id += 1;
            }
        }
    }
    let profile = WorkloadProfile {
        workload_id: spec.workload_id.clone(),
        stage_count: spec.stage_count,
        has_tf_cores: spec.tf_cores.is_some(),
        size_unit: spec.size_unit.clone(),
    };
    let ds = Dataset::new(profile, runs);
    debug_assert!(ds.validate().is_ok());
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ernest_law() -> GenerativeLaw {
        GenerativeLaw::Ernest {
            theta: [2.0, 5.0, 1.0, 0.001],
            serial_coef: 0.0,
            serial_exp: 1.0,
        }
    }

    fn base_spec() -> SynthSpec {
        SynthSpec {
            workload_id: "synth".into(),
            stage_count: 3,
            tf_cores: None,
            size_unit: "GB".into(),
            core_grid: vec![4, 8, 16],
            data_sizes: vec![100.0, 200.0],
            replicates: 2,
            noise_cv: 0.05,
            law: ernest_law(),
            seed: 7,
        }
    }

    #[test]
    fn analytic_law_value_is_exact() {
        let t = law_time(&ernest_law(), 750.0, 10);
        // 2·75 + 5·ln 10 + √75 + 0.001·56250
        assert!((t - 226.4231795028146).abs() < 1e-10, "got {t}");
    }

    #[test]
    fn serial_term_adds_pure_size_cost() {
        let with = GenerativeLaw::Ernest {
            theta: [2.0, 5.0, 1.0, 0.0],
            serial_coef: 0.05,
            serial_exp: 1.2,
        };
        let without = GenerativeLaw::Ernest {
            theta: [2.0, 5.0, 1.0, 0.0],
            serial_coef: 0.0,
            serial_exp: 1.0,
        };
        let diff = law_time(&with, 750.0, 10) - law_time(&without, 750.0, 10);
        assert!((diff - 0.05 * 750f64.powf(1.2)).abs() < 1e-9);
        // the serial term is independent of the core count
        let diff2 = law_time(&with, 750.0, 40) - law_time(&without, 750.0, 40);
        assert!((diff - diff2).abs() < 1e-9);
    }

    #[test]
    fn irregular_law_saturates_and_steps() {
        let law = GenerativeLaw::Irregular {
            theta: [1.0, 0.5, 0.2, 0.0],
            overhead_per_core: 2.0,
            step_penalty: 30.0,
            step_cores: [6].into_iter().collect(),
            saturation_cores: 8,
        };
        let at = |c| law_time(&law, 50.0, c);
        // beyond saturation only the per-core overhead grows
        assert!((at(16) - at(8) - 2.0 * 8.0).abs() < 1e-12);
        assert!((at(32) - at(16) - 2.0 * 16.0).abs() < 1e-12);
        // the step penalty applies exactly on the listed counts
        let no_step = GenerativeLaw::Irregular {
            theta: [1.0, 0.5, 0.2, 0.0],
            overhead_per_core: 2.0,
            step_penalty: 0.0,
            step_cores: BTreeSet::new(),
            saturation_cores: 8,
        };
        assert!((at(6) - law_time(&no_step, 50.0, 6) - 30.0).abs() < 1e-12);
        assert!((at(7) - law_time(&no_step, 50.0, 7)).abs() < 1e-12);
    }

    #[test]
    fn row_count_matches_grid() {
        let spec = SynthSpec {
            core_grid: (6..=44)
                .filter(|c| c % 2 == 0 && *c != 20)
                .collect::<Vec<u32>>(),
            data_sizes: vec![750.0],
            replicates: 6,
            ..base_spec()
        };
        assert_eq!(spec.core_grid.len(), 19);
        let ds = generate(&spec).unwrap();
        assert_eq!(ds.runs.len(), 114);
        assert_eq!(ds.core_grid(), spec.core_grid);
        // replicate ids are globally unique and sequential
        let ids: Vec<u32> = ds.runs.iter().map(|r| r.replicate_id).collect();
        assert_eq!(ids, (0..114).collect::<Vec<u32>>());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = base_spec();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = SynthSpec { seed: 8, ..spec };
        assert_ne!(generate(&other).unwrap(), generate(&base_spec()).unwrap());
    }

    #[test]
    fn zero_noise_makes_replicates_identical() {
        let spec = SynthSpec {
            noise_cv: 0.0,
            replicates: 3,
            ..base_spec()
        };
        let ds = generate(&spec).unwrap();
        for cell in ds.runs.chunks(3) {
            let t0 = cell[0].completion_time_s;
            let want = law_time(&spec.law, cell[0].data_size, cell[0].spark_cores);
            assert_eq!(t0, want);
            for r in cell {
                assert_eq!(r.completion_time_s, t0);
                assert_eq!(r.stages, cell[0].stages);
            }
        }
    }

    #[test]
    fn noise_is_median_preserving_in_the_log() {
        // with cv > 0 the multiplicative factor has median 1, so the law value
        // should sit near the median of many replicates
        let spec = SynthSpec {
            replicates: 201,
            core_grid: vec![8],
            data_sizes: vec![100.0],
            noise_cv: 0.1,
            ..base_spec()
        };
        let ds = generate(&spec).unwrap();
        let mut times: Vec<f64> = ds.runs.iter().map(|r| r.completion_time_s).collect();
        times.sort_by(f64::total_cmp);
        let median = times[100];
        let want = law_time(&spec.law, 100.0, 8);
        assert!((median / want - 1.0).abs() < 0.05, "median {median} vs {want}");
    }

    #[test]
    fn generated_dataset_validates() {
        let spec = SynthSpec {
            tf_cores: Some(48),
            ..base_spec()
        };
        let ds = generate(&spec).unwrap();
        ds.validate().unwrap();
        assert!(ds.profile.has_tf_cores);
        assert!(ds.runs.iter().all(|r| r.tf_cores == Some(48)));
        assert!(ds.runs.iter().all(|r| r.stages.len() == 3));
    }

    #[test]
    fn spec_validation_rejects_bad_inputs() {
        assert_eq!(
            generate(&SynthSpec {
                core_grid: vec![4, 4],
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::BadCoreGrid
        );
        assert_eq!(
            generate(&SynthSpec {
                data_sizes: vec![],
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::BadDataSizes
        );
        assert_eq!(
            generate(&SynthSpec {
                noise_cv: 1.0,
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::BadNoiseCv(1.0)
        );
        assert_eq!(
            generate(&SynthSpec {
                replicates: 0,
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::NoReplicates
        );
        let negative = GenerativeLaw::Ernest {
            theta: [-1.0, 0.0, 0.0, 0.0],
            serial_coef: 0.0,
            serial_exp: 1.0,
        };
        assert!(matches!(
            generate(&SynthSpec {
                law: negative,
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::BadCoefficient { name: "theta1", .. }
        ));
        // an all-zero law produces time 0 → rejected
        let zero = GenerativeLaw::Ernest {
            theta: [0.0; 4],
            serial_coef: 0.0,
            serial_exp: 1.0,
        };
        assert!(matches!(
            generate(&SynthSpec {
                law: zero,
                ..base_spec()
            })
            .unwrap_err(),
            SynthError::NonPositiveTime { .. }
        ));
    }

    #[test]
    fn law_round_trips_through_json() {
        let law = GenerativeLaw::Irregular {
            theta: [1.1, 0.0, 0.0, 0.0],
            overhead_per_core: 8.0,
            step_penalty: 30.0,
            step_cores: [1].into_iter().collect(),
            saturation_cores: 8,
        };
        let text = serde_json::to_string(&law).unwrap();
        let back: GenerativeLaw = serde_json::from_str(&text).unwrap();
        assert_eq!(back, law);
        // optional fields default off
        let minimal: GenerativeLaw =
            serde_json::from_str(r#"{"kind":"ernest","theta":[2.0,5.0,1.0,0.001]}"#).unwrap();
        assert_eq!(
            minimal,
            GenerativeLaw::Ernest {
                theta: [2.0, 5.0, 1.0, 0.001],
                serial_coef: 0.0,
                serial_exp: 1.0,
            }
        );
    }
}
