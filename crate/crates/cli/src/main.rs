mod config;
mod dataset;
mod error;
mod experiment;
mod fsio;
mod table;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};
use sparkperf_core::features::{build_matrix, mask_sidecar_json, matrix_to_csv, FeatureSetKind};
use sparkperf_core::ingest::{runs_to_csv, stages_to_csv};

use crate::config::{load_config, validate, DatasetSource, LoadedConfig};
use crate::dataset::load_dataset;
use crate::error::Failure;
use crate::experiment::{run_experiment, ExperimentArgs};
use crate::fsio::{atomic_write, check_overwrites, write_failure};
use crate::table::ComparisonTable;

/// Learns and evaluates execution-time models for Spark-style workloads.
#[derive(Parser)]
#[command(name = "sparkperf", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config file (JSON). Relative paths inside the config
    /// resolve against the config file's directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Comma-separated seeds; overrides the config's seeds.
    #[arg(long, global = true, value_delimiter = ',')]
    seed_list: Option<Vec<u64>>,

    /// How results are rendered on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    format: Format,

    /// Worker threads for independent experiment cells.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,

    /// Overwrite existing output files.
    #[arg(long, global = true)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Parse raw runs (event logs or CSVs) into the canonical dataset files.
    Ingest {
        /// Skip unparseable logs with a warning instead of aborting.
        #[arg(long)]
        skip_bad: bool,
    },
    /// Generate a synthetic dataset from the config's scaling law.
    Synth,
    /// Write the feature matrices the config's models would train on.
    Featurize,
    /// Run every (case x encoding x family) cell and write the reports.
    Experiment {
        /// Restrict to one or more cases (repeatable), e.g. --only-case C1.
        #[arg(long)]
        only_case: Vec<String>,
        /// Restrict to one or more cells (repeatable), e.g.
        /// --only-model blackbox:LR or --only-model ernest.
        #[arg(long)]
        only_model: Vec<String>,
    },
    /// Re-render the comparison table of a finished experiment.
    Report,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.exit_code()
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    if cli.jobs == 0 {
        return Err(Failure::usage("--jobs must be at least 1"));
    }
    match &cli.command {
        Command::Ingest { skip_bad } => cmd_ingest(&cli, *skip_bad),
        Command::Synth => cmd_synth(&cli),
        Command::Featurize => cmd_featurize(&cli),
        Command::Experiment { only_case, only_model } => {
            cmd_experiment(&cli, only_case, only_model)
        }
        Command::Report => cmd_report(&cli),
    }
}

/// Loads and validates the config behind --config.
fn require_config(cli: &Cli) -> Result<LoadedConfig, Failure> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Failure::usage("this command needs --config <file>"))?;
    let loaded = load_config(path)?;
    validate(&loaded)?;
    Ok(loaded)
}

/// Seeds from --seed-list if given, the config otherwise.
fn effective_seeds(cli: &Cli, loaded: &LoadedConfig) -> Result<Vec<u64>, Failure> {
    match &cli.seed_list {
        Some(seeds) => {
            if seeds.is_empty() {
                return Err(Failure::usage("--seed-list must list at least one seed"));
            }
            let mut unique = seeds.clone();
            unique.sort_unstable();
            unique.dedup();
            if unique.len() != seeds.len() {
                return Err(Failure::usage("--seed-list contains duplicates"));
            }
            Ok(seeds.clone())
        }
        None => Ok(loaded.config.seeds.clone()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    atomic_write(path, text.as_bytes()).map_err(|e| write_failure(path, e))
}

fn cmd_ingest(cli: &Cli, skip_bad: bool) -> Result<(), Failure> {
    let loaded = require_config(cli)?;
    if matches!(loaded.config.dataset, DatasetSource::Synthetic { .. }) {
        return Err(Failure::usage(
            "ingest reads event logs or CSVs; use `synth` for synthetic datasets",
        ));
    }
    let out_dir = loaded.out_dir(cli.out.as_deref());
    let planned = [
        out_dir.join("runs.csv"),
        out_dir.join("stages.csv"),
        out_dir.join("ingest-summary.json"),
    ];
    check_overwrites(&planned, cli.force)?;

    let (ds, report) = load_dataset(&loaded, skip_bad)?;
    write_text(&planned[0], &runs_to_csv(&ds))?;
    write_text(&planned[1], &stages_to_csv(&ds))?;
    let mut summary = serde_json::to_string_pretty(&report).expect("report serializes");
    summary.push('\n');
    write_text(&planned[2], &summary)?;

    let skipped = match report.skipped.len() {
        0 => String::new(),
        n => format!("; skipped {n} bad log{}", if n == 1 { "" } else { "s" }),
    };
    println!(
        "ingested {} runs of `{}` over {}{skipped} -> {}",
        report.runs,
        report.workload_id,
        report.shape(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_synth(cli: &Cli) -> Result<(), Failure> {
    let loaded = require_config(cli)?;
    if !matches!(loaded.config.dataset, DatasetSource::Synthetic { .. }) {
        return Err(Failure::usage("synth needs a config with a synthetic dataset source"));
    }
    let out_dir = loaded.out_dir(cli.out.as_deref());
    let planned = [out_dir.join("runs.csv"), out_dir.join("stages.csv")];
    check_overwrites(&planned, cli.force)?;

    let (ds, report) = load_dataset(&loaded, false)?;
    write_text(&planned[0], &runs_to_csv(&ds))?;
    write_text(&planned[1], &stages_to_csv(&ds))?;
    println!(
        "generated {} runs of `{}` over {} -> {}",
        report.runs,
        report.workload_id,
        report.shape(),
        out_dir.display()
    );
    Ok(())
}

fn cmd_featurize(cli: &Cli) -> Result<(), Failure> {
    let loaded = require_config(cli)?;
    let out_dir = loaded.out_dir(cli.out.as_deref());

    let mut kinds: Vec<FeatureSetKind> = Vec::new();
    if loaded.config.include_ernest {
        kinds.push(FeatureSetKind::Ernest);
    }
    kinds.extend(loaded.config.feature_sets.iter().copied());

    let mut planned = Vec::new();
    for kind in &kinds {
        planned.push(out_dir.join(format!("features-{}.csv", kind.as_str())));
        planned.push(out_dir.join(format!("features-{}-mask.json", kind.as_str())));
    }
    check_overwrites(&planned, cli.force)?;

    let (ds, _) = load_dataset(&loaded, false)?;
    for (i, kind) in kinds.iter().enumerate() {
        let matrix = build_matrix(&ds, *kind)
            .map_err(|e| Failure::data(format!("{} features: {e}", kind.as_str())))?;
        write_text(&planned[2 * i], &matrix_to_csv(&matrix))?;
        write_text(&planned[2 * i + 1], &mask_sidecar_json(&matrix))?;
        println!(
            "wrote {} ({} rows x {} features)",
            planned[2 * i].display(),
            matrix.x.nrows(),
            matrix.x.ncols()
        );
    }
    Ok(())
}

fn cmd_experiment(cli: &Cli, only_case: &[String], only_model: &[String]) -> Result<(), Failure> {
    let loaded = require_config(cli)?;
    let seeds = effective_seeds(cli, &loaded)?;
    let out_dir = loaded.out_dir(cli.out.as_deref());
    let outcome = run_experiment(&ExperimentArgs {
        loaded: &loaded,
        out_dir: &out_dir,
        seeds: &seeds,
        only_case,
        only_model,
        jobs: cli.jobs,
        force: cli.force,
    })?;
    print_table(&outcome.table, cli.format);
    if outcome.failed_cells > 0 {
        return Err(Failure::data(format!(
            "{} of {} cells failed; see {}",
            outcome.failed_cells,
            outcome.total_cells,
            out_dir.join("summary.json").display()
        )));
    }
    Ok(())
}

fn cmd_report(cli: &Cli) -> Result<(), Failure> {
    let out_dir = match (&cli.out, &cli.config) {
        (Some(out), _) => out.clone(),
        (None, Some(_)) => {
            let loaded = require_config(cli)?;
            loaded.out_dir(None)
        }
        (None, None) => {
            return Err(Failure::usage("report needs --out <dir> (or --config to locate it)"))
        }
    };
    let path = out_dir.join("table.json");
    let text = fs::read_to_string(&path).map_err(|e| {
        Failure::usage(format!("no experiment results at {}: {e}", path.display()))
    })?;
    let table = ComparisonTable::from_json(&text)
        .map_err(|e| Failure::data(format!("malformed {}: {e}", path.display())))?;
    print_table(&table, cli.format);
    Ok(())
}

fn print_table(table: &ComparisonTable, format: Format) {
    match format {
        Format::Table => print!("{}", table.render_text()),
        Format::Csv => print!("{}", table.render_csv()),
        Format::Json => print!("{}", table.to_json()),
    }
}
