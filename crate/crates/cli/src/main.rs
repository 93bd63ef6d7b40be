use std::path::PathBuf;
use std::process::ExitCode;

use ambulo_cli::{cmd_run, cmd_synth, cmd_validate, Overrides};
use clap::{Args, Parser, Subcommand};

/// Multimodal pedestrian well-being pipeline.
#[derive(Parser)]
#[command(name = "ambulo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline and write the report tree.
    Run(RunArgs),
    /// Check the config and parse every input file without analysing.
    Validate(RunArgs),
    /// Generate synthetic bundles with ground truth and a config to run them.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Participants processed concurrently; defaults to the core count.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Only process this participant (repeatable).
    #[arg(long = "participant")]
    participants: Vec<String>,
    /// Step of the rolling features and the alignment grid, seconds.
    #[arg(long)]
    step_s: Option<f64>,
    /// Window of the rolling features, seconds.
    #[arg(long)]
    window_s: Option<f64>,
}

#[derive(Args)]
struct SynthArgs {
    /// Scenario spec (TOML or JSON); the built-in suite when omitted.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Generate one continuous record of this many days instead of the suite.
    #[arg(long, conflicts_with = "spec")]
    days: Option<u32>,
}

impl From<RunArgs> for Overrides {
    fn from(a: RunArgs) -> Self {
        Overrides {
            out: a.out,
            jobs: a.jobs,
            participants: a.participants,
            step_s: a.step_s,
            window_s: a.window_s,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("AMBULO_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run(a) => {
            let config = a.config.clone();
            cmd_run(&config, &a.into())
        }
        Command::Validate(a) => {
            let config = a.config.clone();
            cmd_validate(&config, &a.into())
        }
        Command::Synth(a) => cmd_synth(a.spec.as_deref(), &a.out, a.days),
    };
    ExitCode::from(code as u8)
}
