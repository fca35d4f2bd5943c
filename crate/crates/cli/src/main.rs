use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use skewmda::model::Variant;
use skewmda_cli::config::RunConfig;
use skewmda_cli::error::{io_err, Result};
use skewmda_cli::output::{write_diagnostics, RunDir};
use skewmda_cli::pipeline::{execute, Stage};
use skewmda_cli::simulate::{load_scenario, simulate_csv};

/// Skew-t multiple imputation for monotone and intermittent dropout.
#[derive(Parser)]
#[command(name = "skewmda", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit the model and write draws, diagnostics and DIC.
    Fit(RunArgs),
    /// Fit, then write imputed datasets for every configured strategy.
    Impute(RunArgs),
    /// Fit, impute and pool the final-visit ANCOVA across imputations.
    Analyze(RunArgs),
    /// Fit and sweep the delta-adjustment grid.
    Tip(RunArgs),
    /// Every stage the configuration asks for.
    Run(RunArgs),
    /// Write a synthetic trial as long-format CSV.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute diagnostics from an existing draws.csv.
    Diagnose {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `run.output`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sampler seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    chains: Option<usize>,
    /// Number of imputations.
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    quiet: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = RunConfig::load(&self.config)?;
        if let Some(v) = &self.out {
            cfg.run.output = v.clone();
        }
        if let Some(v) = self.seed {
            cfg.sampler.seed = v;
        }
        if let Some(v) = self.burn_in {
            cfg.sampler.burn_in = v;
        }
        if let Some(v) = self.draws {
            cfg.sampler.n_draws = v;
        }
        if let Some(v) = self.thin {
            cfg.sampler.thin = v;
        }
        if let Some(v) = self.chains {
            cfg.run.chains = v;
        }
        if let Some(v) = self.m {
            cfg.imputation.m = v;
        }
        if let Some(v) = self.variant {
            cfg.model.variant = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run_stage(args: &RunArgs, stage: Stage) -> Result<()> {
    let cfg = args.resolve()?;
    let quiet = args.quiet;
    let log = move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    execute(&cfg, stage, &cfg.run.output, &log)?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => run_stage(a, Stage::Fit),
        Command::Impute(a) => run_stage(a, Stage::Impute),
        Command::Analyze(a) => run_stage(a, Stage::Analyze),
        Command::Tip(a) => run_stage(a, Stage::Tip),
        Command::Run(a) => run_stage(a, Stage::Run),
        Command::Simulate { scenario, seed, out } => load_scenario(scenario)
            .and_then(|s| simulate_csv(&s, *seed))
            .and_then(|bytes| std::fs::write(out, bytes).map_err(io_err(out))),
        Command::Diagnose { draws, out } => skewmda_cli::pipeline::diagnose_file(draws).and_then(|chains| {
            let mut dir = RunDir::create(out)?;
            write_diagnostics(&mut dir, &chains)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
