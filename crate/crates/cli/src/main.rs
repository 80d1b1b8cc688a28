//! `wigner`: limit predictions, Monte Carlo simulations, Volterra residuals,
//! decay runs and summary reports from a JSON config.
//!
//! Exit codes: 0 success, 2 validation error, 3 numeric failure, 1 otherwise.
//! Errors go to stderr as one JSON line.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use wigner_core::config::Config;
use wigner_core::io::{raw_rows, render_report, summary_rows, write_csv, write_csv_file, write_json, to_json_pretty};
use wigner_core::{
    lemma_decay_experiment, parse_config, predict, run_entry_experiment, volterra_suite, DecayReport, Error,
    ExperimentResult, RunManifest,
};

#[derive(Parser)]
#[command(name = "wigner", version, about = "Fluctuations of diagonal entries of functions of Wigner matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limit variance and characteristic function for the configured φ.
    Predict(ConfigArgs),
    /// Monte Carlo estimates compared with the limit laws.
    Simulate(RunArgs),
    /// Residual table for the Volterra equations.
    Volterra(VolterraArgs),
    /// Decay of propagator statistics with n.
    Lemma(RunArgs),
    /// Summary table from prior JSON outputs.
    Report(ReportArgs),
}

#[derive(Args)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory; results go to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ConfigArgs,
    /// Overrides the config's root_seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, env = "WIGNER_THREADS")]
    threads: Option<usize>,
    /// Also write per-replica values.
    #[arg(long)]
    raw: bool,
}

#[derive(Args)]
struct VolterraArgs {
    /// Optional config supplying volterra_steps.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// ExperimentResult or DecayReport JSON files.
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Core(e) if e.is_numeric() => 3,
            CliError::Core(_) => 1,
        }
    }

    fn to_json(&self) -> serde_json::Value {
        let kind = match self.exit_code() {
            2 => "validation",
            3 => "numeric",
            _ => "failure",
        };
        let mut v = json!({ "error": kind, "message": self.to_string() });
        if let CliError::Core(Error::Schema { path, .. }) = self {
            v["path"] = json!(path);
        }
        v
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn load(path: &Path, seed: Option<u64>) -> CliResult<Config> {
    let mut cfg = parse_config(path)?;
    if let Some(s) = seed {
        cfg.root_seed = s;
    }
    Ok(cfg)
}

fn out_dir(arg: &Option<PathBuf>, cfg: Option<&Config>) -> CliResult<Option<PathBuf>> {
    let dir = arg.clone().or_else(|| cfg.and_then(|c| c.outputs.dir.clone()));
    if let Some(d) = &dir {
        std::fs::create_dir_all(d).map_err(Error::from)?;
    }
    Ok(dir)
}

fn pool(threads: Option<usize>) -> CliResult<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    b.build().map_err(|e| CliError::Usage(format!("thread pool: {e}")))
}

fn names(dir: &Path, files: &[&str]) -> Vec<String> {
    files.iter().map(|f| dir.join(f).display().to_string()).collect()
}

fn write_manifest(dir: &Path, config_hash: String, root_seed: u64, threads: usize, start: Instant, outputs: Vec<String>) -> CliResult<()> {
    let manifest = RunManifest {
        config_hash,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        root_seed,
        threads,
        wall_time_s: start.elapsed().as_secs_f64(),
        outputs,
    };
    Ok(write_json(&dir.join("manifest.json"), &manifest)?)
}

fn cmd_predict(args: &ConfigArgs) -> CliResult<()> {
    let cfg = load(&args.config, None)?;
    let prediction = predict(&cfg.phi, &cfg.spec, &cfg.x_grid)?;
    match out_dir(&args.out, Some(&cfg))? {
        Some(d) => write_json(&d.join("prediction.json"), &prediction)?,
        None => print!("{}", to_json_pretty(&prediction)?),
    }
    Ok(())
}

fn cmd_simulate(args: &RunArgs) -> CliResult<()> {
    let start = Instant::now();
    let cfg = load(&args.common.config, args.seed)?;
    let exp = cfg.experiment()?;
    let pool = pool(args.threads)?;
    let result: ExperimentResult = pool.install(|| run_entry_experiment(&exp))?;
    let Some(dir) = out_dir(&args.common.out, Some(&cfg))? else {
        print!("{}", to_json_pretty(&result)?);
        return Ok(());
    };
    let mut files = vec!["result.json", "summary.csv"];
    write_json(&dir.join("result.json"), &result)?;
    write_csv_file(&dir.join("summary.csv"), &summary_rows(&result))?;
    if args.raw {
        write_csv_file(&dir.join("raw.csv"), &raw_rows(&result))?;
        files.push("raw.csv");
    }
    write_manifest(&dir, result.config_hash.clone(), result.root_seed, pool.current_num_threads(), start, names(&dir, &files))
}

fn cmd_lemma(args: &RunArgs) -> CliResult<()> {
    let start = Instant::now();
    let cfg = load(&args.common.config, args.seed)?;
    let lemma = cfg.lemma()?;
    let pool = pool(args.threads)?;
    let report: DecayReport = pool.install(|| lemma_decay_experiment(&lemma))?;
    let Some(dir) = out_dir(&args.common.out, Some(&cfg))? else {
        write_csv(std::io::stdout().lock(), &report.rows)?;
        return Ok(());
    };
    write_json(&dir.join("decay.json"), &report)?;
    write_csv_file(&dir.join("decay.csv"), &report.rows)?;
    write_csv_file(&dir.join("decay_slopes.csv"), &report.slopes)?;
    let files = names(&dir, &["decay.json", "decay.csv", "decay_slopes.csv"]);
    write_manifest(&dir, report.config_hash.clone(), lemma.root_seed, pool.current_num_threads(), start, files)
}

fn cmd_volterra(args: &VolterraArgs) -> CliResult<()> {
    let cfg = args.config.as_deref().map(|p| load(p, None)).transpose()?;
    let steps = cfg.as_ref().map_or_else(|| vec![0.04, 0.02, 0.01], |c| c.volterra_steps.clone());
    let rows = volterra_suite(&steps)?;
    match out_dir(&args.out, cfg.as_ref())? {
        Some(d) => write_csv_file(&d.join("volterra.csv"), &rows)?,
        None => write_csv(std::io::stdout().lock(), &rows)?,
    }
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> CliResult<()> {
    let mut results = Vec::new();
    let mut decays = Vec::new();
    for path in &args.input {
        let text = std::fs::read_to_string(path).map_err(Error::from)?;
        if let Ok(r) = serde_json::from_str::<ExperimentResult>(&text) {
            results.push(r);
        } else {
            let d: DecayReport = serde_json::from_str(&text).map_err(|e| {
                CliError::Core(Error::Schema {
                    path: path.display().to_string(),
                    message: format!("neither an experiment result nor a decay report: {e}"),
                })
            })?;
            decays.push(d);
        }
    }
    print!("{}", render_report(&results, &decays));
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match &cli.command {
        Command::Predict(a) => cmd_predict(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Volterra(a) => cmd_volterra(a),
        Command::Lemma(a) => cmd_lemma(a),
        Command::Report(a) => cmd_report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            // --help and --version.
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let usage = CliError::Usage(e.to_string().trim().replace('\n', " "));
            eprintln!("{}", usage.to_json());
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
