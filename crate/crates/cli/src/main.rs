//! `shiftreg`: prepare citation datasets, train plain and regularized GNNs
//! on biased label sets, sweep penalty or bias strength, and tabulate reports.
//!
//! Exit codes: 0 on success, 1 when a run fails (e.g. every trial diverged),
//! 2 on usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use shiftreg::dataset::{
    load_cache, load_citation_text, save_cache, DatasetManifest, FeatureKind, SIDECAR_FILE,
};
use shiftreg::experiment::report::{
    aggregate_csv, read_aggregate, sweep_csv, trials_csv, write_json, ComparisonTable,
};
use shiftreg::experiment::{run_trials, sweep, AggregateReport, SweepAxis, TrainConfig};
use shiftreg::{Error, Graph};

const DATA_DIR_VAR: &str = "SHIFTREG_DATA_DIR";
const SNAPSHOT_FILE: &str = "config.snapshot";

#[derive(Parser)]
#[command(
    name = "shiftreg",
    version,
    about = "Distribution-shift regularized GNN experiments"
)]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a .content/.cites pair into the binary cache.
    Prepare(PrepareArgs),
    /// Run repeated trials of one configuration.
    Train(TrainArgs),
    /// Run one configuration per value of lambda, beta or epsilon.
    Sweep(SweepArgs),
    /// Combine report.json files into a comparison table.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    Binary,
    Real,
}

#[derive(Args)]
struct PrepareArgs {
    #[arg(long)]
    content: PathBuf,
    #[arg(long)]
    cites: PathBuf,
    #[arg(long)]
    name: String,
    /// Directory for graph.bin and graph.json.
    #[arg(long)]
    out: PathBuf,
    /// `binary` rejects anything but 0/1 feature values.
    #[arg(long, value_enum, default_value = "binary")]
    features: Features,
    /// Keep raw feature rows instead of dividing each by its sum.
    #[arg(long)]
    no_row_normalize: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Prepared dataset directory, or its name under $SHIFTREG_DATA_DIR.
    #[arg(long)]
    dataset: Option<String>,
    /// key=value file applied beneath the explicit flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// `all` (every unlabeled node) or `test`.
    #[arg(long)]
    reg_target: Option<String>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long)]
    axis: String,
    /// Comma-separated values, e.g. `0,0.1,0.5,1`.
    #[arg(long)]
    values: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

#[derive(Args)]
struct ReportArgs {
    /// Run directories (or report.json files).
    #[arg(long = "in", num_args = 1.., required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value = "md")]
    format: Format,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match cli.command {
        Command::Prepare(a) => prepare(&a),
        Command::Train(a) => train(&a),
        Command::Sweep(a) => run_sweep(&a),
        Command::Report(a) => report(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn prepare(a: &PrepareArgs) -> Result<(), Error> {
    let mut manifest = DatasetManifest::new(&a.name, &a.content, &a.cites);
    manifest.feature_kind = match a.features {
        Features::Binary => FeatureKind::Binary,
        Features::Real => FeatureKind::Real,
    };
    manifest.row_normalize = !a.no_row_normalize;
    let (graph, load) = load_citation_text(&manifest)?;
    if load.skipped_edges > 0 {
        eprintln!(
            "warning: skipped {} cites lines naming unknown ids",
            load.skipped_edges
        );
    }
    let sidecar = save_cache(&graph, &a.out)?;
    println!(
        "n={} m={} d={} num_classes={}",
        sidecar.n, sidecar.m, sidecar.d, sidecar.num_classes
    );
    Ok(())
}

/// Defaults, then the config file, then explicit flags.
fn resolve_config(a: &RunArgs) -> Result<TrainConfig, Error> {
    let mut cfg = TrainConfig::default();
    if let Some(path) = &a.config {
        let text = fs::read_to_string(path).map_err(|e| Error::File {
            path: path.clone(),
            source: e,
        })?;
        cfg.apply_key_values(&text)
            .map_err(|e| Error::Input(format!("{}: {e}", path.display())))?;
    }
    let flags: [(&str, Option<String>); 10] = [
        ("dataset", a.dataset.clone()),
        ("model", a.model.clone()),
        ("lambda", a.lambda.map(|v| v.to_string())),
        ("beta", a.beta.map(|v| v.to_string())),
        ("alpha", a.alpha.map(|v| v.to_string())),
        ("epsilon", a.epsilon.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("trials", a.trials.map(|v| v.to_string())),
        ("reg_target", a.reg_target.clone()),
        ("jobs", a.jobs.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    if cfg.dataset.is_empty() {
        return Err(Error::Input(
            "no dataset given (use --dataset or a config file)".into(),
        ));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dataset_dir(reference: &str) -> Result<PathBuf, Error> {
    let direct = PathBuf::from(reference);
    if direct.join(SIDECAR_FILE).is_file() {
        return Ok(direct);
    }
    let mut tried = vec![direct.display().to_string()];
    if let Some(root) = std::env::var_os(DATA_DIR_VAR) {
        let under_root = Path::new(&root).join(reference);
        if under_root.join(SIDECAR_FILE).is_file() {
            return Ok(under_root);
        }
        tried.push(under_root.display().to_string());
    }
    Err(Error::Input(format!(
        "no prepared dataset `{reference}` (looked for {SIDECAR_FILE} in {}); run `shiftreg prepare` first",
        tried.join(" and ")
    )))
}

fn load_graph(cfg: &TrainConfig) -> Result<Graph, Error> {
    let dir = dataset_dir(&cfg.dataset)?;
    log::info!("loading {}", dir.display());
    load_cache(&dir)
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|e| Error::File {
        path: path.to_path_buf(),
        source: e,
    })
}

fn prepare_out(out: &Path, cfg: &TrainConfig) -> Result<(), Error> {
    fs::create_dir_all(out).map_err(|e| Error::File {
        path: out.to_path_buf(),
        source: e,
    })?;
    write_text(&out.join(SNAPSHOT_FILE), &cfg.to_key_values())
}

fn percent(mean: f64, std: f64) -> String {
    format!("{:.2} ± {:.2}", 100.0 * mean, 100.0 * std)
}

fn warn_failures(report: &AggregateReport) {
    for f in &report.failures {
        eprintln!("warning: trial with seed {} failed: {}", f.seed, f.error);
    }
}

fn train(a: &TrainArgs) -> Result<(), Error> {
    let cfg = resolve_config(&a.run)?;
    let graph = load_graph(&cfg)?;
    prepare_out(&a.run.out, &cfg)?;
    let report = run_trials(&cfg, &graph, cfg.trials)?;
    warn_failures(&report);
    write_json(&a.run.out.join("report.json"), &report)?;
    write_text(&a.run.out.join("report.csv"), &aggregate_csv(&report))?;
    write_text(&a.run.out.join("trials.csv"), &trials_csv(&report))?;
    println!(
        "F1: {} ({} trials, {:.1} s)",
        percent(report.f1_mean, report.f1_std),
        report.num_trials(),
        report.wall_time_secs()
    );
    Ok(())
}

fn parse_values(text: &str) -> Result<Vec<f64>, Error> {
    let values = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| Error::Input(format!("sweep value `{s}` is not a number")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(Error::Input("--values needs at least one number".into()));
    }
    Ok(values)
}

fn run_sweep(a: &SweepArgs) -> Result<(), Error> {
    let axis: SweepAxis = a.axis.parse()?;
    let values = parse_values(&a.values)?;
    let cfg = resolve_config(&a.run)?;
    // Every point must be a valid configuration before anything runs.
    for &v in &values {
        let mut point = cfg.clone();
        point.set(axis.name(), &v.to_string())?;
        point.validate()?;
    }
    let graph = load_graph(&cfg)?;
    prepare_out(&a.run.out, &cfg)?;
    let table = sweep(&cfg, &graph, axis, &values, cfg.trials)?;
    for p in &table.points {
        warn_failures(&p.report);
        println!(
            "{}={}: F1: {}",
            axis.name(),
            p.value,
            percent(p.report.f1_mean, p.report.f1_std)
        );
    }
    write_json(&a.run.out.join("sweep.json"), &table)?;
    write_text(&a.run.out.join("sweep.csv"), &sweep_csv(&table))?;
    Ok(())
}

fn report(a: &ReportArgs) -> Result<(), Error> {
    let reports = a
        .inputs
        .iter()
        .map(|p| {
            let file = if p.is_dir() {
                p.join("report.json")
            } else {
                p.clone()
            };
            read_aggregate(&file)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let table = ComparisonTable::build(&reports)?;
    print!(
        "{}",
        match a.format {
            Format::Md => table.to_markdown(),
            Format::Csv => table.to_csv(),
        }
    );
    Ok(())
}
