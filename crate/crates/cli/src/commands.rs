use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rai_core::oracle::{
    brute_force_subset, stepwise_path, submodularity_ratio, theorem_bound, BoundInputs,
    DEFAULT_ENUM_BUDGET,
};
use rai_core::sim::{run_experiment, Method, Scenario, SimSpec};
use rai_core::{run_rai, Dataset, RaiConfig};

use crate::input::{read_table, Table};
use crate::report::{BoundReport, DiagnoseReport, InputSummary, RunReport, StepRow, SubsetReport};
use crate::CliError;

/// Slack allowed when checking the bound, for rounding in R².
const BOUND_TOL: f64 = 1e-10;

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Delimited text file with a header row (comma or tab separated)
    pub file: PathBuf,
    /// Name of the response column
    #[arg(long)]
    pub response: String,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Initial alpha-wealth
    #[arg(long)]
    pub wealth: Option<f64>,
    /// Wealth earned per rejection
    #[arg(long)]
    pub payout: Option<f64>,
    /// Cap on passes (default ceil(log2 n) + 2)
    #[arg(long)]
    pub max_passes: Option<u32>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SearchArgs {
    fn config(&self) -> RaiConfig {
        let d = RaiConfig::default();
        RaiConfig {
            initial_wealth: self.wealth.unwrap_or(d.initial_wealth),
            payout: self.payout.unwrap_or(d.payout),
            max_passes: self.max_passes,
            seed: self.seed,
            ..d
        }
    }
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Search interactions of selected terms
    #[arg(long)]
    pub interactions: bool,
    /// Highest total degree of generated interactions
    #[arg(long)]
    pub max_order: Option<u32>,
    /// Write the text report here instead of stdout
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Write the JSON report here
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Write the full selection trace (JSON) here
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Record wall time in the report
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_parser = parse_scenario)]
    pub scenario: Scenario,
    #[arg(long, default_value_t = 500)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub p: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = parse_method, default_value = "rai")]
    pub method: Method,
    #[arg(long, default_value_t = 0.83)]
    pub target_r2: f64,
    /// Results file (JSON lines); the summary table goes next to it as
    /// `<out>.summary.tsv`
    #[arg(long)]
    pub out: PathBuf,
    /// Record per-replication wall time (results are then not reproducible
    /// byte for byte)
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Reference model size for the best subset and the bound
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Write the JSON report here
    #[arg(long)]
    pub json: Option<PathBuf>,
}

fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse::<Scenario>().map_err(|e| {
        format!("{e} (expected paper_interactions, single_interaction or global_null)")
    })
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| {
        format!("{e} (expected rai, rai_interactions, stepwise_aic, mean_model or true_model)")
    })
}

/// Enumeration budget, overridable through `RAI_ENUM_BUDGET`.
pub fn enum_budget() -> Result<u64, CliError> {
    match std::env::var("RAI_ENUM_BUDGET") {
        Ok(v) => v.trim().parse::<u64>().map_err(|_| {
            CliError::usage(format!(
                "RAI_ENUM_BUDGET must be a positive integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_ENUM_BUDGET),
    }
}

fn load(args: &DataArgs) -> Result<(Dataset, InputSummary), CliError> {
    let table = read_table(&args.file)?;
    dataset_from_table(table, &args.file, &args.response)
}

pub fn dataset_from_table(
    table: Table,
    file: &Path,
    response: &str,
) -> Result<(Dataset, InputSummary), CliError> {
    let Some(y) = table.column(response).map(<[f64]>::to_vec) else {
        let why = if table.skipped.iter().any(|s| s == response) {
            "is not numeric"
        } else {
            "not found"
        };
        return Err(CliError::usage(format!(
            "response column '{response}' {why}"
        )));
    };
    let (names, columns): (Vec<String>, Vec<Vec<f64>>) = table
        .names
        .into_iter()
        .zip(table.columns)
        .filter(|(n, _)| n != response)
        .unzip();
    if columns.is_empty() {
        return Err(CliError::usage(
            "no numeric feature columns besides the response",
        ));
    }
    let dataset = Dataset::from_columns(&columns, &y, names)?;
    let summary = InputSummary {
        file: file.display().to_string(),
        rows: dataset.n(),
        response: response.to_string(),
        features: dataset.names().to_vec(),
        dropped_constant: dataset.dropped().iter().map(|d| d.name.clone()).collect(),
        skipped_non_numeric: table.skipped,
    };
    Ok((dataset, summary))
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Returns the text that goes to stdout.
pub fn select(args: &SelectArgs) -> Result<String, CliError> {
    let (dataset, input) = load(&args.data)?;
    let mut config = args.search.config().with_interactions(args.interactions);
    config.max_interaction_order = args.max_order;
    let start = Instant::now();
    let outcome = run_rai(&dataset, &config)?;
    let elapsed = start.elapsed();
    let mut report = RunReport::build(input, &config, &dataset, &outcome)?;
    if args.timing {
        report.elapsed_ms = Some(elapsed.as_secs_f64() * 1e3);
    }
    if let Some(path) = &args.trace {
        write(path, &to_json(&outcome.trace))?;
    }
    if let Some(path) = &args.json {
        write(path, &to_json(&report))?;
    }
    let text = report.to_text();
    match &args.output {
        Some(path) => {
            write(path, &text)?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<String, CliError> {
    let mut spec = SimSpec::new(args.scenario, args.n, args.p);
    spec.replications = args.reps;
    spec.seed = args.seed;
    spec.target_r2 = args.target_r2;
    let results = run_experiment(&spec, args.method, args.timing)?;
    write(&args.out, &results.to_jsonl())?;
    let table = results.summary.to_table();
    let mut summary_path = args.out.clone().into_os_string();
    summary_path.push(".summary.tsv");
    write(Path::new(&summary_path), &table)?;
    for r in results.records.iter().filter(|r| r.error.is_some()) {
        log::warn!(
            "replication {} failed: {}",
            r.rep,
            r.error.as_deref().unwrap_or("")
        );
    }
    Ok(table)
}

pub fn diagnose(args: &DiagnoseArgs) -> Result<String, CliError> {
    if args.k == 0 {
        return Err(CliError::usage("--k must be at least 1"));
    }
    let budget = enum_budget()?;
    let (dataset, input) = load(&args.data)?;
    if args.k > dataset.p() {
        return Err(CliError::usage(format!(
            "--k {} exceeds the {} usable feature columns",
            args.k,
            dataset.p()
        )));
    }
    let names = dataset.names();
    let name_all = |idx: &[usize]| idx.iter().map(|&j| names[j].clone()).collect::<Vec<_>>();

    // fail on the budget before any long computation
    let best = brute_force_subset(&dataset, args.k, budget)?;

    let max_steps = dataset.p().min(dataset.n().saturating_sub(2));
    let path = stepwise_path(&dataset, max_steps);
    let stepwise = path
        .order
        .iter()
        .enumerate()
        .map(|(i, &j)| StepRow {
            feature: names[j].clone(),
            r_squared: path.r_squared[i + 1],
            aic: path.aic[i + 1],
        })
        .collect();

    let outcome = run_rai(&dataset, &args.search.config())?;
    let selected = outcome.state.selected().to_vec();
    let r2 = outcome.r_squared();
    let bound = match outcome.trace.first_rejection_pass {
        Some(s_f) if !selected.is_empty() => {
            let ratio = submodularity_ratio(&dataset, &selected, args.k, budget)?;
            let value = theorem_bound(&BoundInputs {
                r2_opt: best.r_squared,
                l: selected.len(),
                k: args.k,
                gamma: ratio.gamma,
                s_f,
            })?;
            Some(BoundReport {
                gamma: ratio.gamma.is_finite().then_some(ratio.gamma),
                gamma_argmin: name_all(&ratio.argmin),
                dominant: if value.additive >= value.multiplicative {
                    "additive".into()
                } else {
                    "multiplicative".into()
                },
                value,
            })
        }
        _ => None,
    };
    let slack = r2 - bound.as_ref().map_or(0.0, |b| b.value.bound);
    let report = DiagnoseReport {
        input,
        k: args.k,
        null_aic: path.aic[0],
        stepwise,
        aic_size: path.aic_size(),
        best_subset: SubsetReport {
            features: name_all(&best.subset),
            r_squared: best.r_squared,
        },
        selected: SubsetReport {
            features: name_all(&selected),
            r_squared: r2,
        },
        first_rejection_pass: outcome.trace.first_rejection_pass,
        bound,
        slack,
        holds: slack >= -BOUND_TOL,
    };
    if let Some(path) = &args.json {
        write(path, &to_json(&report))?;
    }
    Ok(report.to_text())
}
