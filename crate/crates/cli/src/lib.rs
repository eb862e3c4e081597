//! `softverify` command line: one subcommand per pipeline stage, each run
//! leaving a manifest that records what went in and what came out.

mod cmd;
pub mod manifest;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

pub use manifest::{FileDigest, RunManifest};
pub use output::{Format, Outcome};

#[derive(Debug, Parser)]
#[command(name = "softverify", version, about = "Soft-verified synthetic agent data: generate, verify, curate, analyse, serve")]
#[command(arg_required_else_help = true)]
pub struct Cli {
    /// Output format for the report printed to stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Where to write the run manifest. Defaults to `<out>/manifest.json`,
    /// or `<subcommand>.manifest.json` when the command has no `--out`.
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the two-rollout generation loop over the configured codebases.
    Generate(GenerateArgs),
    /// Score second rollouts against their first rollouts.
    Verify(VerifyArgs),
    /// Filter, order, truncate, deduplicate and mix trajectories.
    Curate(CurateArgs),
    /// Fit the cost-performance power law and invert it.
    Fit(FitArgs),
    /// Per-trajectory cost breakdowns and campaign totals.
    Cost(CostArgs),
    /// Seed summaries, signal-to-noise ratios and seed budgets.
    Stats(StatsArgs),
    /// Run the messages-API translation proxy.
    Serve(ServeArgs),
    /// Emit CSV series for plotting.
    PlotData(PlotArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Campaign config (JSON). Relative paths inside resolve against its directory.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// A `generate` output directory holding both rollout shards.
    #[arg(long, conflicts_with_all = ["first", "second"])]
    pub input: Option<PathBuf>,
    #[arg(long, requires = "second")]
    pub first: Option<PathBuf>,
    #[arg(long, requires = "first")]
    pub second: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the second rollouts with r >= threshold to `verified.jsonl`.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Bucket boundaries for the report.
    #[arg(long, value_delimiter = ',', default_values_t = softverify::verification::DEFAULT_THRESHOLDS)]
    pub thresholds: Vec<f64>,
    /// Compare lines regardless of which file they are in.
    #[arg(long)]
    pub path_agnostic: bool,
}

#[derive(Debug, Args)]
pub struct CurateArgs {
    /// Trajectory JSONL files, concatenated in order.
    #[arg(long, required = true)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Curation config (JSON); flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Verification records used with `--threshold`.
    #[arg(long)]
    pub verification: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub max_patch_lines: Option<usize>,
    #[arg(long)]
    pub max_tool_tokens: Option<f64>,
    #[arg(long)]
    pub context_limit: Option<usize>,
    #[arg(long)]
    pub min_ratio: Option<f64>,
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long, value_enum)]
    pub selection: Option<cmd::curate::Selection>,
    #[arg(long)]
    pub partition_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// JSON list of {x, y, std?, n_seeds?}. Defaults to the bundled vLLM points.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = WeightingArg::Uniform)]
    pub weighting: WeightingArg,
    /// Performance targets to invert into costs.
    #[arg(long, value_delimiter = ',', default_values_t = [50.0, 50.5])]
    pub target: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WeightingArg {
    Uniform,
    InverseVariance,
}

#[derive(Debug, Args)]
pub struct CostArgs {
    /// JSON with custom columns; defaults to the four reference columns.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Campaign sizes to price.
    #[arg(long, value_delimiter = ',', default_values_t = [400u64, 16_000])]
    pub samples: Vec<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Seed groups and comparisons (JSON). Defaults to the bundled Table-2 pair.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = PoolingArg::TwoGroup)]
    pub pooling: PoolingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PoolingArg {
    Literal,
    TwoGroup,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Proxy config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub listen: Option<String>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(value_enum)]
    pub series: cmd::plot::Series,
    /// Points JSON (scaling), verification JSONL, or trajectory JSONL.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = softverify::curation::DEFAULT_CONTEXT_LIMIT)]
    pub context_limit: usize,
}

/// Machine-readable failure. `kind` is stable; `message` is for humans.
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new("invalid_input", message)
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }
}

macro_rules! cli_error_from {
    ($($t:ty => $kind:literal),* $(,)?) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::new($kind, e.to_string())
            }
        }
    )*};
}

cli_error_from! {
    softverify::orchestrate::OrchestrateError => "generation",
    softverify::jsonl::JsonlError => "jsonl",
    softverify::verification::VerifyError => "verification",
    softverify::curation::CurationError => "curation",
    softverify::scaling::FitError => "fit",
    softverify::costmodel::CostError => "cost",
    softverify::stats::StatsError => "stats",
    softverify_proxy::ProxyError => "proxy",
    serde_json::Error => "json",
    csv::Error => "csv",
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Generate(_) => "generate",
            Command::Verify(_) => "verify",
            Command::Curate(_) => "curate",
            Command::Fit(_) => "fit",
            Command::Cost(_) => "cost",
            Command::Stats(_) => "stats",
            Command::Serve(_) => "serve",
            Command::PlotData(_) => "plot-data",
        }
    }

    fn out_dir(&self) -> Option<&PathBuf> {
        match self {
            Command::Generate(a) => Some(&a.out),
            Command::Verify(a) => Some(&a.out),
            Command::Curate(a) => Some(&a.out),
            Command::Fit(a) => a.out.as_ref(),
            Command::Cost(a) => a.out.as_ref(),
            Command::Stats(a) => a.out.as_ref(),
            Command::PlotData(a) => a.out.as_ref(),
            Command::Serve(_) => None,
        }
    }
}

fn dispatch(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Generate(a) => cmd::generate::run(a),
        Command::Verify(a) => cmd::verify::run(a),
        Command::Curate(a) => cmd::curate::run(a),
        Command::Fit(a) => cmd::fit::run(a),
        Command::Cost(a) => cmd::cost::run(a),
        Command::Stats(a) => cmd::stats::run(a),
        Command::Serve(a) => cmd::serve::run(a),
        Command::PlotData(a) => cmd::plot::run(a),
    }
}

fn init_logging() {
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).try_init();
}

/// Parses `argv`, runs the subcommand and returns the process exit code:
/// 0 on success, 1 on a runtime failure, 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    init_logging();
    let started = manifest::unix_now();
    let clock = Instant::now();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            let path = cli.manifest.clone().unwrap_or_else(|| match cli.command.out_dir() {
                Some(dir) => dir.join("manifest.json"),
                None => PathBuf::from(format!("{}.manifest.json", cli.command.name())),
            });
            let m = RunManifest::build(cli.command.name(), &outcome, started, clock.elapsed());
            if let Err(e) = m.and_then(|m| m.write(&path)) {
                report_error(&e);
                return 1;
            }
            match outcome.render(cli.format) {
                Ok(text) => {
                    print!("{text}");
                    0
                }
                Err(e) => {
                    report_error(&e);
                    1
                }
            }
        }
        Err(e) => {
            report_error(&e);
            1
        }
    }
}

fn report_error(e: &CliError) {
    eprintln!("{}", json!({"error": {"kind": e.kind, "message": e.message}}));
}
