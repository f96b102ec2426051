use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mtfl_cli::config::HeatmapScale;
use mtfl_cli::{CliError, CliResult, PipelineConfig};
use mtfl_core::{Model, Sector};

#[derive(Parser)]
#[command(
    name = "mtfl",
    version,
    about = "Multi-task feature learning over case fatality rate series",
    after_help = "Exit codes: 0 ok, 2 configuration error, 3 data or write error, 4 non-convergence in strict mode.\n\
                  MTFL_THREADS sets the worker thread count; RUST_LOG sets the log level (default info)."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load, clean and assemble the region × indicator matrix.
    Ingest(Common),
    /// Run hybrid feature selection and write the selection report.
    Select(Common),
    /// Fit each model once on every row.
    Fit(Common),
    /// Repeated train/test experiments; writes runs.json.
    Experiment(Common),
    /// Vote over a saved runs.json.
    Vote(WithInput),
    /// Comparison, importance and heatmap reports from a saved runs.json.
    Report(WithInput),
    /// Simulate the configured SEIR trajectory.
    Simulate(Common),
    /// The full pipeline end to end.
    Run(Common),
}

#[derive(Args)]
struct WithInput {
    /// runs.json written by `experiment` or `run`.
    #[arg(long)]
    input: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Long-format factor table [default: data/sample/factors.csv].
    #[arg(long)]
    factors: Option<PathBuf>,
    /// Daily cumulative cases and deaths [default: data/sample/epidemic.csv].
    #[arg(long)]
    epidemic: Option<PathBuf>,
    /// Output directory [default: out].
    #[arg(long)]
    out: Option<PathBuf>,
    /// ridge, lasso, fsgl or all [default: all].
    #[arg(long)]
    model: Option<ModelArg>,
    /// Repeated train/test runs per model [default: 100].
    #[arg(long)]
    runs: Option<usize>,
    /// Base seed for splits, folds, forests and augmentation [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Days of CFR series, one task per day [default: 42].
    #[arg(long)]
    window: Option<usize>,
    /// Consecutive tasks sharing one target column [default: 7].
    #[arg(long)]
    group_size: Option<usize>,
    /// Number of SEIR-synthesized regions to append [default: 0].
    #[arg(long)]
    augment: Option<usize>,
    /// Comma-separated sectors for the ablation table, e.g. ihr,healthcare.
    #[arg(long, value_delimiter = ',')]
    ablate: Vec<Sector>,
    /// Write the objective trace of each model's representative fit.
    #[arg(long)]
    trace: bool,
    /// Exit with code 4 when any fit fails to converge.
    #[arg(long)]
    strict: bool,
    /// Write every run's weight matrix under weights/.
    #[arg(long)]
    dump_weights: bool,
    /// Keep every indicator instead of running hybrid selection.
    #[arg(long)]
    no_select: bool,
    /// Heatmap color scale [default: magnitude].
    #[arg(long, value_enum)]
    heatmap_scale: Option<HeatmapScale>,
}

#[derive(Clone, Copy)]
enum ModelArg {
    One(Model),
    All,
}

impl std::str::FromStr for ModelArg {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("all") {
            Ok(ModelArg::All)
        } else {
            s.parse()
                .map(ModelArg::One)
                .map_err(|e: mtfl_core::Error| e.to_string())
        }
    }
}

impl Common {
    fn resolve(&self) -> CliResult<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.factors {
            cfg.factors = v.clone();
        }
        if let Some(v) = &self.epidemic {
            cfg.epidemic = v.clone();
        }
        if let Some(v) = &self.out {
            cfg.out = v.clone();
        }
        match self.model {
            Some(ModelArg::One(m)) => cfg.models = vec![m],
            Some(ModelArg::All) => cfg.models = Model::ALL.to_vec(),
            None => {}
        }
        if let Some(v) = self.runs {
            cfg.n_runs = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.window {
            cfg.window = v;
        }
        if let Some(v) = self.group_size {
            cfg.group_size = v;
        }
        if let Some(v) = self.augment {
            cfg.augment.count = v;
        }
        if !self.ablate.is_empty() {
            cfg.ablate = self.ablate.clone();
        }
        if let Some(v) = self.heatmap_scale {
            cfg.heatmap_scale = v;
        }
        cfg.trace |= self.trace;
        cfg.strict |= self.strict;
        cfg.dump_weights |= self.dump_weights;
        cfg.select_features &= !self.no_select;
        Ok(cfg)
    }
}

fn dispatch(command: &Command) -> CliResult<()> {
    match command {
        Command::Ingest(c) => mtfl_cli::cmd_ingest(&c.resolve()?),
        Command::Select(c) => mtfl_cli::cmd_select(&c.resolve()?),
        Command::Fit(c) => mtfl_cli::cmd_fit(&c.resolve()?),
        Command::Experiment(c) => mtfl_cli::cmd_experiment(&c.resolve()?).map(drop),
        Command::Vote(w) => mtfl_cli::cmd_vote(&w.common.resolve()?, &w.input).map(drop),
        Command::Report(w) => mtfl_cli::cmd_report(&w.common.resolve()?, &w.input),
        Command::Simulate(c) => mtfl_cli::cmd_simulate(&c.resolve()?),
        Command::Run(c) => mtfl_cli::run_pipeline(&c.resolve()?),
    }
}

fn thread_pool() -> CliResult<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("MTFL_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| CliError::Config(format!("MTFL_THREADS must be an integer, got `{v}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = thread_pool().and_then(|pool| pool.install(|| dispatch(&cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
