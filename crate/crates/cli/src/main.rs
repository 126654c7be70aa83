//! `cascadefin`: seeded, manifest-backed cascade experiments.
//!
//! Exit codes: 0 success, 1 runtime error, 2 usage or schema error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{usage, Settings, UsageError};

#[derive(Parser)]
#[command(
    name = "cascadefin",
    version,
    about = "Cascading bank failures on bank-asset networks"
)]
struct Cli {
    /// Worker threads for parallel sweeps (outputs do not depend on it)
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete missing holdings and write the repaired dataset
    Ingest(Common),
    /// Generate a synthetic network (and reference-cascade labels)
    Generate(Common),
    /// Run one cascade and emit its result as JSON
    Run(Common),
    /// Mean survival fractions over a parameter grid
    Sweep(Common),
    /// ROC points against a failed-bank list
    Roc(Common),
    /// Phase-diagram scan over one or two parameters
    Phase(Common),
    /// Weight and equity-ratio densities, all vs. labeled banks
    Stats(Common),
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// Balance-sheet CSV
    #[arg(long)]
    input: Option<String>,
    /// Synthetic network spec, e.g. `banks=2000,seed=1,label_p=0.6`
    #[arg(long)]
    synthetic: Option<String>,
    /// Failed-bank id list
    #[arg(long)]
    labels: Option<String>,
    /// Index of the shocked asset
    #[arg(long)]
    asset: Option<String>,
    /// Shock factor: value, list `a,b`, or range `lo:hi:step`
    #[arg(long)]
    p: Option<String>,
    /// Fire-sale fraction: value, list, or range
    #[arg(long)]
    alpha: Option<String>,
    /// Barrier noise: value, list, or range
    #[arg(long)]
    eta: Option<String>,
    /// Master seed (required when eta > 0)
    #[arg(long)]
    seed: Option<String>,
    /// Replicates per grid cell
    #[arg(long)]
    replicates: Option<String>,
    /// Survival threshold separating the two phase regions
    #[arg(long)]
    threshold: Option<String>,
    /// ROC classification: `single` or `majority` (over --replicates)
    #[arg(long)]
    classification: Option<String>,
    /// Histogram bins on [0, 1] for `stats`
    #[arg(long)]
    bins: Option<String>,
    /// Output directory (`run` prints to stdout without it)
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self, command: &str) -> anyhow::Result<Settings> {
        let mut settings = match &self.config {
            Some(path) => Settings::load(path)?,
            None => Settings::default(),
        };
        if let Some(c) = settings.get("command") {
            if c != command {
                return Err(usage(format!("config is for `{c}`, not `{command}`")));
            }
        }
        let flags = [
            ("input", &self.input),
            ("synthetic", &self.synthetic),
            ("labels", &self.labels),
            ("asset", &self.asset),
            ("p", &self.p),
            ("alpha", &self.alpha),
            ("eta", &self.eta),
            ("seed", &self.seed),
            ("replicates", &self.replicates),
            ("threshold", &self.threshold),
            ("classification", &self.classification),
            ("bins", &self.bins),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                settings.set(key, v.clone());
            }
        }
        // A source given on the command line replaces the config file's source.
        if self.synthetic.is_some() && self.input.is_none() {
            settings.remove("input");
        }
        if self.input.is_some() && self.synthetic.is_none() {
            settings.remove("synthetic");
        }
        Ok(settings)
    }
}

type Handler = fn(Settings, Option<&std::path::Path>) -> anyhow::Result<()>;

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let (name, args, f): (&str, &Common, Handler) = match &cli.command {
        Command::Ingest(a) => ("ingest", a, commands::ingest),
        Command::Generate(a) => ("generate", a, commands::generate),
        Command::Run(a) => ("run", a, commands::run),
        Command::Sweep(a) => ("sweep", a, commands::sweep),
        Command::Roc(a) => ("roc", a, commands::roc),
        Command::Phase(a) => ("phase", a, commands::phase),
        Command::Stats(a) => ("stats", a, commands::stats),
    };
    let settings = args.settings(name)?;
    f(settings, args.out.as_deref())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() {
        return 2;
    }
    match err.downcast_ref::<cascadefin::Error>() {
        Some(
            cascadefin::Error::Schema { .. }
            | cascadefin::Error::InvalidParameter { .. }
            | cascadefin::Error::UnknownAsset { .. },
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
