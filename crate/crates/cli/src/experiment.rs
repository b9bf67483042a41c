use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sparkperf_core::evaluation::{evaluate_model, ModelEvaluation, ModelSpec};
use sparkperf_core::features::FeatureSetKind;
use sparkperf_core::regressors::ModelFamily;
use sparkperf_core::scenarios::{apply_split, build_scenarios, scenario_to_json, ScenarioConfig};
use sparkperf_core::tuning::{default_grid, ModelGrid};
use sparkperf_core::Dataset;

use crate::config::{LoadedConfig, ModelSelector};
use crate::dataset::load_dataset;
use crate::error::Failure;
use crate::fsio::{atomic_write, check_overwrites, write_failure};
use crate::table::{column_label, column_order, CellEntry, ComparisonTable, TableRow};

const SCHEMA_VERSION: u32 = 1;

pub struct ExperimentArgs<'a> {
    pub loaded: &'a LoadedConfig,
    pub out_dir: &'a Path,
    pub seeds: &'a [u64],
    pub only_case: &'a [String],
    pub only_model: &'a [String],
    pub jobs: usize,
    pub force: bool,
}

/// One (case, encoding, family) unit of work.
#[derive(Debug, Clone)]
struct Cell {
    case_index: usize,
    feature_set: FeatureSetKind,
    family: ModelFamily,
}

struct CaseSplit {
    case_id: String,
    train: Dataset,
    test: Dataset,
}

#[derive(Serialize)]
struct CellDocument<'a> {
    schema_version: u32,
    workload_id: &'a str,
    case_id: &'a str,
    column: &'a str,
    train_rows: usize,
    test_rows: usize,
    evaluation: &'a ModelEvaluation,
}

#[derive(Serialize)]
struct CellStatus {
    case_id: String,
    column: String,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_mape: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    message: Option<String>,
}

#[derive(Serialize)]
struct CaseSummary {
    case_id: String,
    train_rows: usize,
    test_rows: usize,
}

#[derive(Serialize)]
struct ExperimentSummary {
    schema_version: u32,
    workload_id: String,
    scenario_family: sparkperf_core::scenarios::ScenarioFamily,
    seeds: Vec<u64>,
    cases: Vec<CaseSummary>,
    cells: Vec<CellStatus>,
}

pub struct ExperimentOutcome {
    pub table: ComparisonTable,
    pub failed_cells: usize,
    pub total_cells: usize,
}

pub fn run_experiment(args: &ExperimentArgs) -> Result<ExperimentOutcome, Failure> {
    let cfg = &args.loaded.config;
    let started = Instant::now();

    // Column layout and cell plan are known before any data is touched.
    let columns = column_order(&cfg.feature_sets, &cfg.families, cfg.include_ernest);
    let selectors = parse_selectors(args.only_model, &columns)?;
    let case_ids: Vec<String> = (1..=cfg.scenario.n_cases).map(|k| format!("C{k}")).collect();
    let case_keep = case_filter(args.only_case, &case_ids)?;
    let kept_cases: Vec<usize> = (0..case_ids.len()).filter(|i| case_keep[*i]).collect();

    let mut cells: Vec<Cell> = Vec::new();
    for &case_index in &kept_cases {
        for &(feature_set, family) in &columns {
            let wanted = selectors
                .as_ref()
                .map_or(true, |s| s.contains(&ModelSelector { feature_set, family }));
            if wanted {
                cells.push(Cell { case_index, feature_set, family });
            }
        }
    }
    if cells.is_empty() {
        return Err(Failure::usage(
            "the --only-case/--only-model filters leave nothing to run",
        ));
    }

    let planned = planned_files(args.out_dir, &case_ids, &cells);
    check_overwrites(&planned, args.force)?;

    // Data phase: dataset, scenario, splits.
    let (ds, _report) = load_dataset(args.loaded, false)?;
    let scenario = build_scenario(&ds, args.loaded)?;
    let mut splits: Vec<Option<CaseSplit>> = case_ids.iter().map(|_| None).collect();
    for &i in &kept_cases {
        let (train, test) = apply_split(&ds, &scenario, &case_ids[i])
            .map_err(|e| Failure::data(format!("case {}: {e}", case_ids[i])))?;
        splits[i] = Some(CaseSplit { case_id: case_ids[i].clone(), train, test });
    }

    let grids = resolve_grids(cfg);
    let results = run_cells(&cells, &splits, &grids, args.seeds, args.jobs)?;

    // Write everything, then report.
    let table = assemble_table(&ds, &scenario, &columns, &case_ids, &kept_cases, &cells, &results);
    write_outputs(args.out_dir, &scenario, &ds, &table, &case_ids, &kept_cases, &splits, &cells, &results, args.seeds)?;

    let failed = results.iter().filter(|r| r.is_err()).count();
    eprintln!(
        "experiment: {} cells over {} cases in {:.1}s ({} failed)",
        cells.len(),
        kept_cases.len(),
        started.elapsed().as_secs_f64(),
        failed
    );
    Ok(ExperimentOutcome { table, failed_cells: failed, total_cells: cells.len() })
}

fn parse_selectors(
    only_model: &[String],
    columns: &[(FeatureSetKind, ModelFamily)],
) -> Result<Option<Vec<ModelSelector>>, Failure> {
    if only_model.is_empty() {
        return Ok(None);
    }
    let mut selectors = Vec::with_capacity(only_model.len());
    for text in only_model {
        let sel = ModelSelector::parse(text)?;
        if !columns.contains(&(sel.feature_set, sel.family)) {
            return Err(Failure::usage(format!(
                "--only-model {text} does not match any cell this config runs"
            )));
        }
        selectors.push(sel);
    }
    Ok(Some(selectors))
}

fn case_filter(only_case: &[String], case_ids: &[String]) -> Result<Vec<bool>, Failure> {
    if only_case.is_empty() {
        return Ok(vec![true; case_ids.len()]);
    }
    let known: BTreeSet<&str> = case_ids.iter().map(String::as_str).collect();
    for id in only_case {
        if !known.contains(id.as_str()) {
            return Err(Failure::usage(format!(
                "--only-case {id}: this config has cases {}..{}",
                case_ids.first().expect("n_cases >= 1"),
                case_ids.last().expect("n_cases >= 1")
            )));
        }
    }
    Ok(case_ids.iter().map(|id| only_case.contains(id)).collect())
}

fn planned_files(out_dir: &Path, case_ids: &[String], cells: &[Cell]) -> Vec<PathBuf> {
    let mut planned = vec![
        out_dir.join("scenario.json"),
        out_dir.join("table.json"),
        out_dir.join("table.csv"),
        out_dir.join("summary.json"),
    ];
    for cell in cells {
        planned.push(cell_path(out_dir, &case_ids[cell.case_index], cell));
    }
    planned
}

fn cell_path(out_dir: &Path, case_id: &str, cell: &Cell) -> PathBuf {
    out_dir.join("cells").join(format!(
        "{case_id}-{}-{}.json",
        cell.feature_set.as_str(),
        cell.family.short_label()
    ))
}

fn build_scenario(ds: &Dataset, loaded: &LoadedConfig) -> Result<ScenarioConfig, Failure> {
    let s = &loaded.config.scenario;
    build_scenarios(
        &ds.profile.workload_id,
        s.family,
        &ds.core_grid(),
        &s.excluded_cores,
        &s.train_sizes,
        &s.test_sizes,
        s.n_cases,
    )
    .map_err(|e| Failure::data(format!("cannot build scenario from the dataset grid: {e}")))
}

fn resolve_grids(cfg: &crate::config::ExperimentConfig) -> Vec<(ModelFamily, ModelGrid)> {
    let mut grids = Vec::new();
    for &family in &cfg.families {
        let grid = cfg
            .grids
            .iter()
            .find(|g| g.family() == family)
            .cloned()
            .unwrap_or_else(|| default_grid(family));
        grids.push((family, grid));
    }
    if cfg.include_ernest {
        grids.push((ModelFamily::Ernest, ModelGrid::Ernest));
    }
    grids
}

fn run_cells(
    cells: &[Cell],
    splits: &[Option<CaseSplit>],
    grids: &[(ModelFamily, ModelGrid)],
    seeds: &[u64],
    jobs: usize,
) -> Result<Vec<Result<ModelEvaluation, String>>, Failure> {
    let jobs = jobs.max(1).min(cells.len());
    let run_one = |cell: &Cell| -> Result<ModelEvaluation, String> {
        let split = splits[cell.case_index].as_ref().expect("split built for planned case");
        let grid = grids
            .iter()
            .find(|(f, _)| *f == cell.family)
            .map(|(_, g)| g.clone())
            .expect("grid resolved for every planned family");
        let spec = ModelSpec { feature_set: cell.feature_set, grid, scheme: None };
        let started = Instant::now();
        let result = evaluate_model(&split.train, &split.test, &spec, seeds);
        let label = column_label(cell.feature_set, cell.family);
        match &result {
            Ok(eval) => eprintln!(
                "cell {} {label}: {:.2}% mean MAPE ({:.1}s)",
                split.case_id,
                eval.mean_mape,
                started.elapsed().as_secs_f64()
            ),
            Err(e) => eprintln!(
                "cell {} {label}: failed: {e} ({:.1}s)",
                split.case_id,
                started.elapsed().as_secs_f64()
            ),
        }
        result.map_err(|e| e.to_string())
    };

    if jobs == 1 {
        return Ok(cells.iter().map(run_one).collect());
    }

    let mut results: Vec<Option<Result<ModelEvaluation, String>>> =
        cells.iter().map(|_| None).collect();
    let mut indexed: Vec<(usize, Result<ModelEvaluation, String>)> = Vec::with_capacity(cells.len());
    std::thread::scope(|scope| -> Result<(), Failure> {
        let mut handles = Vec::with_capacity(jobs);
        for worker in 0..jobs {
            let run_one = &run_one;
            handles.push(scope.spawn(move || {
                cells
                    .iter()
                    .enumerate()
                    .skip(worker)
                    .step_by(jobs)
                    .map(|(i, cell)| (i, run_one(cell)))
                    .collect::<Vec<_>>()
            }));
        }
        for handle in handles {
            let chunk = handle
                .join()
                .map_err(|_| Failure::internal("a worker thread panicked"))?;
            indexed.extend(chunk);
        }
        Ok(())
    })?;
    for (i, result) in indexed {
        results[i] = Some(result);
    }
    Ok(results.into_iter().map(|r| r.expect("all cells ran")).collect())
}

#[allow(clippy::too_many_arguments)]
fn write_outputs(
    out_dir: &Path,
    scenario: &ScenarioConfig,
    ds: &Dataset,
    table: &ComparisonTable,
    case_ids: &[String],
    kept_cases: &[usize],
    splits: &[Option<CaseSplit>],
    cells: &[Cell],
    results: &[Result<ModelEvaluation, String>],
    seeds: &[u64],
) -> Result<(), Failure> {
    let write = |path: &Path, text: &str| -> Result<(), Failure> {
        atomic_write(path, text.as_bytes()).map_err(|e| write_failure(path, e))
    };

    write(&out_dir.join("scenario.json"), &scenario_to_json(scenario))?;

    let mut statuses = Vec::with_capacity(cells.len());
    for (cell, result) in cells.iter().zip(results) {
        let case_id = &case_ids[cell.case_index];
        let column = column_label(cell.feature_set, cell.family);
        match result {
            Ok(evaluation) => {
                let split = splits[cell.case_index].as_ref().expect("split built");
                let doc = CellDocument {
                    schema_version: SCHEMA_VERSION,
                    workload_id: &ds.profile.workload_id,
                    case_id,
                    column: &column,
                    train_rows: split.train.runs.len(),
                    test_rows: split.test.runs.len(),
                    evaluation,
                };
                let mut text = serde_json::to_string_pretty(&doc).expect("cell serializes");
                text.push('\n');
                write(&cell_path(out_dir, case_id, cell), &text)?;
                statuses.push(CellStatus {
                    case_id: case_id.clone(),
                    column,
                    status: "ok",
                    mean_mape: Some(evaluation.mean_mape),
                    message: None,
                });
            }
            Err(message) => statuses.push(CellStatus {
                case_id: case_id.clone(),
                column,
                status: "error",
                mean_mape: None,
                message: Some(message.clone()),
            }),
        }
    }

    write(&out_dir.join("table.json"), &table.to_json())?;
    write(&out_dir.join("table.csv"), &table.render_csv())?;

    let summary = ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        workload_id: ds.profile.workload_id.clone(),
        scenario_family: scenario.family,
        seeds: seeds.to_vec(),
        cases: kept_cases
            .iter()
            .map(|&i| {
                let split = splits[i].as_ref().expect("split built");
                CaseSummary {
                    case_id: split.case_id.clone(),
                    train_rows: split.train.runs.len(),
                    test_rows: split.test.runs.len(),
                }
            })
            .collect(),
        cells: statuses,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    write(&out_dir.join("summary.json"), &text)
}

fn assemble_table(
    ds: &Dataset,
    scenario: &ScenarioConfig,
    columns: &[(FeatureSetKind, ModelFamily)],
    case_ids: &[String],
    kept_cases: &[usize],
    cells: &[Cell],
    results: &[Result<ModelEvaluation, String>],
) -> ComparisonTable {
    let mut rows: Vec<TableRow> = kept_cases
        .iter()
        .map(|&case_index| {
            let values = columns
                .iter()
                .map(|&(feature_set, family)| {
                    let position = cells.iter().position(|c| {
                        c.case_index == case_index
                            && c.feature_set == feature_set
                            && c.family == family
                    })?;
                    Some(match &results[position] {
                        Ok(eval) => CellEntry::Mape(eval.mean_mape),
                        Err(_) => CellEntry::Marker(CellEntry::ERROR.into()),
                    })
                })
                .collect();
            TableRow { case_id: case_ids[case_index].clone(), values }
        })
        .collect();

    // Columns nothing ran in (filtered out everywhere) are dropped entirely,
    // so `--only-model blackbox:LR --only-case C1` yields a 1x1 table.
    let keep: Vec<bool> = (0..columns.len())
        .map(|c| rows.iter().any(|row| row.values[c].is_some()))
        .collect();
    for row in &mut rows {
        let mut c = 0;
        row.values.retain(|_| {
            c += 1;
            keep[c - 1]
        });
    }
    let columns = columns
        .iter()
        .zip(&keep)
        .filter(|(_, keep)| **keep)
        .map(|(&(fs, fam), _)| column_label(fs, fam))
        .collect();

    ComparisonTable { workload_id: ds.profile.workload_id.clone(), family: scenario.family, columns, rows }
}
