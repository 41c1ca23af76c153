use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

use config::RunConfig;

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 1).
    Usage(String),
    /// Unreadable or invalid input and output files (exit 2).
    Data(String),
    /// Non-finite values or a failed numeric check (exit 3).
    Numeric(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn from_config(e: evokg::Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<evokg::Error> for CliError {
    fn from(e: evokg::Error) -> Self {
        use evokg::Error as E;
        match e {
            E::Argument(_) => CliError::Usage(e.to_string()),
            E::Numeric { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "evokg",
    version,
    about = "Temporal knowledge graph point-process model"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample an event log from random ground-truth parameters.
    Simulate(Common),
    /// Fit parameters with windowed backpropagation through time.
    Train(Common),
    /// Rank the object of every test event and report MAR / HITS@10.
    EvalLink(Common),
    /// Predict every test event's time and report the MAE.
    EvalTime(Common),
    /// Compare analytic gradients against finite differences.
    GradCheck(GradCheck),
}

#[derive(Args)]
struct Common {
    /// `key = value` config file; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Event file (TSV quadruples).
    #[arg(long)]
    events: Option<PathBuf>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Override any config key, e.g. `--set learning_rate=0.001`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct GradCheck {
    #[command(flatten)]
    common: Common,
    /// Pass when the max relative error is below this.
    #[arg(long)]
    threshold: Option<f64>,
    /// Check at all-zero parameters.
    #[arg(long)]
    zero_params: bool,
}

fn resolve(c: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for kv in &c.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(e) = &c.events {
        cfg.events = Some(e.clone());
    }
    if let Some(p) = &c.checkpoint {
        cfg.checkpoint = Some(p.clone());
    }
    if let Some(n) = c.max_iter {
        cfg.max_iter = n;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => commands::simulate(&resolve(&c)?),
        Command::Train(c) => commands::train(&resolve(&c)?),
        Command::EvalLink(c) => commands::eval_link(&resolve(&c)?),
        Command::EvalTime(c) => commands::eval_time(&resolve(&c)?),
        Command::GradCheck(g) => {
            let mut cfg = resolve(&g.common)?;
            if let Some(t) = g.threshold {
                cfg.threshold = t;
            }
            cfg.zero_params |= g.zero_params;
            commands::grad_check(&cfg)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("evokg: {e}");
            ExitCode::from(e.code())
        }
    }
}
