use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use socnav_cli::{commands, Overrides, RunConfig};

#[derive(Parser)]
#[command(
    name = "socnav",
    version,
    about = "Uncertainty-aware social navigation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the forecasting ensemble on the dataset.
    Train(Common),
    /// Run one closed-loop episode and write its trace.
    Plan(Common),
    /// Sweep seeds × modes × horizons and write a metrics table.
    Bench(Common),
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// head_on, corridor, crossing20, empty or dataset.
    #[arg(long)]
    scenario: Option<String>,
    /// hard, chance or cbf.
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    /// Chance-constraint risk bound.
    #[arg(long)]
    delta: Option<f64>,
    /// CBF decay rate.
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Zero every forecast covariance.
    #[arg(long)]
    deterministic: bool,
    /// Forecast with constant velocity instead of a trained model.
    #[arg(long)]
    constant_velocity: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut config = RunConfig::load(self.config.as_deref())?;
        let overrides = Overrides {
            scenario: self.scenario.clone(),
            mode: self.mode.clone(),
            horizon: self.horizon,
            delta: self.delta,
            gamma: self.gamma,
            seed: self.seed,
            deterministic: self.deterministic,
            constant_velocity: self.constant_velocity,
            out: self.out.clone(),
        };
        config.apply(|k| std::env::var(k).ok(), &overrides)?;
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Train(c) => c.resolve().and_then(|cfg| commands::train(&cfg)).map(|_| 0),
        Command::Plan(c) => c.resolve().and_then(|cfg| commands::plan(&cfg)).map(|_| 0),
        Command::Bench(c) => c.resolve().and_then(|cfg| commands::bench(&cfg)),
    };
    match outcome {
        Ok(0) => ExitCode::SUCCESS,
        Ok(failed) => {
            eprintln!("error: {failed} episode(s) produced no metrics");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
