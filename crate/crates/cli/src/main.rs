//! `ltrc`: fit, apply and benchmark survival trees for left-truncated right-censored data.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ltrc::data::{parse_covariate_csv, read_long_csv, read_ltrc_csv, write_ltrc_csv, CovariateSchema};
use ltrc::error::{DataError, SimError, TreeError};
use ltrc::ltrcart::{fit_ltrcart, CartControls};
use ltrc::ltrcit::{fit_ltrcit, CtreeControls};
use ltrc::simulation::{run_grid, write_results, Methods, ScenarioFile};
use ltrc::{LtrcartModel, LtrcitModel};
use serde::{Deserialize, Serialize};

const DESK_GRID: &str = include_str!("../desk.toml");

#[derive(Parser, Debug)]
#[command(name = "ltrc", version, about = "Survival trees for left-truncated, right-censored data")]
struct Cli {
    /// Worker threads for benchmarks (0 = one per core).
    #[arg(long, global = true, env = "LTRC_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a tree to wide-format LTRC data.
    Fit(FitArgs),
    /// Convert long-format visit rows into wide-format pseudo-subject rows.
    Reformat(ReformatArgs),
    /// Predict survival curves for covariate rows from a fitted tree.
    Predict(PredictArgs),
    /// Run a simulation grid and write a result table.
    Benchmark(BenchmarkArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Algo {
    Ltrcit,
    Ltrcart,
}

#[derive(Args, Debug, Default)]
struct ControlArgs {
    /// Significance level of the conditional-inference stopping rule.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_split: Option<usize>,
    #[arg(long)]
    min_bucket: Option<usize>,
    /// Cross-validation folds for pruning the relative-risk tree.
    #[arg(long)]
    cv_folds: Option<usize>,
    /// Standard errors added to the minimum cross-validated risk when selecting a subtree.
    #[arg(long)]
    se_rule: Option<f64>,
}

impl ControlArgs {
    fn ctree(&self) -> CtreeControls {
        let d = CtreeControls::default();
        CtreeControls {
            alpha: self.alpha.unwrap_or(d.alpha),
            min_split: self.min_split.unwrap_or(d.min_split),
            min_bucket: self.min_bucket.unwrap_or(d.min_bucket),
            ..d
        }
    }

    fn cart(&self) -> CartControls {
        let d = CartControls::default();
        CartControls {
            min_split: self.min_split.unwrap_or(d.min_split),
            min_bucket: self.min_bucket.unwrap_or(d.min_bucket),
            cv_folds: self.cv_folds.unwrap_or(d.cv_folds),
            se_rule: self.se_rule.unwrap_or(d.se_rule),
            ..d
        }
    }
}

#[derive(Args, Debug)]
struct FitArgs {
    #[arg(long, value_enum, default_value_t = Algo::Ltrcit)]
    algo: Algo,
    /// Wide CSV with columns id,left,right,event and one column per covariate.
    #[arg(long)]
    data: PathBuf,
    /// TOML covariate schema.
    #[arg(long)]
    schema: PathBuf,
    /// Fitted model (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Graphviz rendering; defaults to the model path with a `.dot` extension.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Seed of the cross-validation fold assignment.
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    controls: ControlArgs,
}

#[derive(Args, Debug)]
struct ReformatArgs {
    /// Long CSV with columns id,time,event and one column per covariate.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    schema: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PredictArgs {
    /// Model written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// CSV with an id column and one column per covariate.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Scenario grid (TOML); the bundled desk-scale grid is used when omitted.
    #[arg(long)]
    scenarios: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the grid's trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides the grid's master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    controls: ControlArgs,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
enum ModelFile {
    Ltrcit(LtrcitModel),
    Ltrcart(LtrcartModel),
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{count} row(s) could not be routed:\n{rows}")]
    Unroutable { count: usize, rows: String },
    #[error("{0}")]
    Input(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Data(_) | CliError::Input(_) => 2,
            CliError::Unroutable { .. } => 3,
            CliError::Tree(e) => tree_code(e),
            CliError::Sim(e) => match e {
                SimError::Scenario(_) | SimError::Data(_) => 2,
                SimError::Tree(t) => tree_code(t),
                _ => 4,
            },
        }
    }
}

fn tree_code(e: &TreeError) -> u8 {
    match e {
        TreeError::Controls(_) | TreeError::Data(_) => 2,
        TreeError::Routing { .. } => 3,
        TreeError::Estimate(_) | TreeError::CrossValidation(_) => 4,
    }
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn read_schema(path: &Path) -> Result<CovariateSchema, CliError> {
    Ok(CovariateSchema::from_toml_str(&read_text(path)?)?)
}

fn cmd_fit(args: &FitArgs) -> Result<(), CliError> {
    let schema = read_schema(&args.schema)?;
    let data = read_ltrc_csv::<f64>(&args.data, &schema)?;
    let (file, dot, summary) = match args.algo {
        Algo::Ltrcit => {
            let m = fit_ltrcit(&data, &args.controls.ctree())?;
            let (dot, summary) = (m.to_dot(), m.summary());
            (ModelFile::Ltrcit(m), dot, summary)
        }
        Algo::Ltrcart => {
            let m = fit_ltrcart(&data, &args.controls.cart(), args.seed)?;
            let (dot, summary) = (m.to_dot(), m.summary());
            (ModelFile::Ltrcart(m), dot, summary)
        }
    };
    let json = serde_json::to_string_pretty(&file).map_err(DataError::from)?;
    write_file(&args.out, json.as_bytes())?;
    let dot_path = args.dot.clone().unwrap_or_else(|| args.out.with_extension("dot"));
    write_file(&dot_path, dot.as_bytes())?;
    print!("{summary}");
    Ok(())
}

fn cmd_reformat(args: &ReformatArgs) -> Result<(), CliError> {
    let schema = read_schema(&args.schema)?;
    let groups = read_long_csv::<f64>(&args.data, &schema)?;
    let data = ltrc::data::reformat_long_to_ltrc(&schema, &groups)?;
    let mut out = Vec::new();
    write_ltrc_csv(&data, &mut out)?;
    write_file(&args.out, &out)
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn cmd_predict(args: &PredictArgs) -> Result<(), CliError> {
    let model: ModelFile = serde_json::from_str(&read_text(&args.model)?).map_err(DataError::from)?;
    let schema = match &model {
        ModelFile::Ltrcit(m) => m.tree.schema().clone(),
        ModelFile::Ltrcart(m) => m.tree.schema().clone(),
    };
    let rows = parse_covariate_csv::<f64, _>(
        fs::File::open(&args.data).map_err(|source| DataError::Io {
            path: args.data.display().to_string(),
            source,
        })?,
        &schema,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "theta", "initial_value", "knots", "values"]).map_err(DataError::from)?;
    let mut failures = Vec::new();
    for (k, (id, row)) in rows.iter().enumerate() {
        let x = row.values();
        let outcome = match &model {
            ModelFile::Ltrcit(m) => m.predict(x).map(|c| (String::new(), c.clone())),
            ModelFile::Ltrcart(m) => m.predict(x).map(|(theta, c)| (theta.to_string(), c)),
        };
        match outcome {
            Ok((theta, curve)) => {
                let initial = curve.step_function().initial().to_string();
                w.write_record([id.as_str(), &theta, &initial, &join(curve.knots()), &join(curve.values())])
                    .map_err(DataError::from)?;
            }
            Err(TreeError::Routing { covariate, level }) => {
                failures.push(format!("  row {} (id '{id}'): {covariate} = '{level}'", k + 1));
            }
            Err(e) => return Err(e.into()),
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Unroutable {
            count: failures.len(),
            rows: failures.join("\n"),
        });
    }
    let bytes = w.into_inner().map_err(|e| CliError::Input(e.to_string()))?;
    write_file(&args.out, &bytes)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<(), CliError> {
    let text = match &args.scenarios {
        Some(p) => read_text(p)?,
        None => DESK_GRID.to_string(),
    };
    let mut grid = ScenarioFile::from_toml_str(&text)?;
    if let Some(t) = args.trials {
        grid.trials = t;
        for s in grid.scenarios.iter_mut() {
            s.trials = None;
        }
    }
    if let Some(s) = args.seed {
        grid.seed = s;
    }
    let methods = Methods {
        ltrcit: args.controls.ctree(),
        ltrcart: args.controls.cart(),
    };
    let rows = run_grid(&grid, &methods)?;
    let mut out = Vec::new();
    write_results(&rows, &mut out)?;
    write_file(&args.out, &out)
}

fn run(cli: &Cli) -> Result<(), CliError> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| CliError::Input(e.to_string()))?;
    }
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Reformat(a) => cmd_reformat(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Benchmark(a) => cmd_benchmark(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => {
            let _ = io::stdout().flush();
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
