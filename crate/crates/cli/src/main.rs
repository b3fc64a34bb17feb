use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fdclust::simbench::Method;
use fdclust::{seed, Surrogate};
use fdclust_cli::commands::{BenchSpec, EvaluateSpec, FitSpec, FixtureSpec};
use fdclust_cli::config::{load, simulation_grid, BenchConfig, RunConfig};
use fdclust_cli::ingest::Centering;
use fdclust_cli::{execute, replay, CliError, RunSpec};

#[derive(Parser)]
#[command(name = "fdclust", version, about = "Cluster replicated functional data with measurement-error correction")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster replicate averages (or first replicates) without correction.
    Fit(FitArgs),
    /// Run the iterated measurement-error correction.
    Correct(FitArgs),
    /// Agreement between two membership files.
    Evaluate(EvaluateArgs),
    /// Replicated simulation comparisons.
    Bench(BenchArgs),
    /// Re-run a manifest and check its outputs.
    Replay(ReplayArgs),
    /// Write the synthetic activity fixture.
    Fixture(FixtureArgs),
}

#[derive(Args)]
struct FitArgs {
    /// Long-format CSV: subject,replicate,time,value.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Surrogate>,
    /// Bin width in input time units.
    #[arg(long)]
    bins: Option<f64>,
    /// Keep input times in [T0, T1] (after binning).
    #[arg(long, num_args = 2, value_names = ["T0", "T1"])]
    truncate: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    centering: Option<Centering>,
    /// Leave missing values missing instead of spline-imputing them.
    #[arg(long)]
    no_impute: bool,
    #[arg(long)]
    max_outer: Option<usize>,
    /// Also write the pseudo-curves behind the returned fit (`correct`).
    #[arg(long)]
    emit_data: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Membership CSV: subject,cluster.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long)]
    estimate: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    out: PathBuf,
    /// TOML with `[[scenario]]` tables; the full simulation grid if absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads for replications.
    #[arg(long, default_value_t = 1)]
    parallel: usize,
    /// Write every generated dataset and its true membership.
    #[arg(long)]
    emit_data: bool,
    /// Master seed; scenario seeds are derived from it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Surrogate>,
    #[arg(long)]
    n_mc: Option<usize>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    methods: Option<Vec<Method>>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = fdclust_cli::fixture::BUNDLED_SEED, value_parser = clap::value_parser!(u64).range(..=i64::MAX as u64))]
    seed: u64,
}

fn parse_mode(s: &str) -> Result<Surrogate, String> {
    s.parse().map_err(|e: fdclust::Error| e.to_string())
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse().map_err(|e: fdclust::Error| e.to_string())
}

fn absolute(path: &Path) -> Result<PathBuf, CliError> {
    std::fs::canonicalize(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn fit_spec(a: FitArgs) -> Result<(FitSpec, PathBuf), CliError> {
    let mut config: RunConfig = match &a.config {
        Some(p) => load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(m) = a.mode {
        config.mode = m;
    }
    if let Some(w) = a.bins {
        config.ingest.bins = Some(w);
    }
    if let Some(t) = a.truncate {
        config.ingest.truncate = Some((t[0], t[1]));
    }
    if let Some(c) = a.centering {
        config.ingest.centering = c;
    }
    if a.no_impute {
        config.ingest.impute = false;
    }
    if let Some(n) = a.max_outer {
        config.max_outer_iterations = n;
    }
    let spec = FitSpec {
        input: absolute(&a.input)?,
        emit_data: a.emit_data,
        config,
    };
    Ok((spec, a.out))
}

fn bench_spec(a: BenchArgs) -> Result<(BenchSpec, PathBuf), CliError> {
    let mut config: BenchConfig = match &a.config {
        Some(p) => load(p)?,
        None => BenchConfig::default(),
    };
    if config.scenarios.is_empty() {
        config.scenarios = simulation_grid(a.mode.unwrap_or_default(), a.n_mc.unwrap_or(50), a.seed.unwrap_or(0));
    }
    for (k, s) in config.scenarios.iter_mut().enumerate() {
        if let Some(master) = a.seed {
            s.seed = seed::derive(master, k as u64);
        }
        if let Some(m) = a.mode {
            s.correction_mode = m;
        }
        if let Some(n) = a.n_mc {
            s.n_mc = n;
        }
    }
    if let Some(m) = a.methods {
        config.methods = m;
    }
    let spec = BenchSpec {
        parallel: a.parallel,
        emit_data: a.emit_data,
        config,
    };
    Ok((spec, a.out))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (spec, out) = match cli.command {
        Command::Fit(a) => {
            let (s, o) = fit_spec(a)?;
            (RunSpec::Fit(s), o)
        }
        Command::Correct(a) => {
            let (s, o) = fit_spec(a)?;
            (RunSpec::Correct(s), o)
        }
        Command::Evaluate(a) => (
            RunSpec::Evaluate(EvaluateSpec {
                truth: absolute(&a.truth)?,
                estimate: absolute(&a.estimate)?,
            }),
            a.out,
        ),
        Command::Bench(a) => {
            let (s, o) = bench_spec(a)?;
            (RunSpec::Bench(s), o)
        }
        Command::Fixture(a) => (RunSpec::Fixture(FixtureSpec { seed: a.seed }), a.out),
        Command::Replay(a) => {
            let m = replay(&a.manifest, &a.out)?;
            println!("replayed {}: {} outputs identical in {}", m.command, m.outputs.len(), a.out.display());
            return Ok(());
        }
    };
    let manifest = execute(&spec, &out)?;
    println!("{}: wrote {} files to {}", manifest.command, manifest.outputs.len() + 1, out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
