use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dtmeasure::config::{Backend, RunConfig};
use dtmeasure::pipeline::{Pipeline, Stage};
use dtmeasure::{service, Result};
use dtmeasure_core::indicators::IndicatorMode;

/// Digital-transformation indicators from annual-report text.
///
/// Exit codes: 0 success, 1 I/O or remote failure, 2 invalid input or
/// configuration, 3 an upstream stage must be re-run.
#[derive(Debug, Parser)]
#[command(name = "dtmeasure", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Run configuration (TOML).
    #[arg(long, global = true, default_value = "dtmeasure.toml")]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    NaiveBayes,
    Dictionary,
    Remote,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Cumulative,
    Contemporaneous,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Extract MD&A and risk-factor sections from the filings.
    Ingest,
    /// Split sections into sentences.
    Segment,
    /// Match sentences against the keyword lexicon.
    Match,
    /// Build the prediction and annotation pools.
    Sample,
    /// Serve the annotation pool over HTTP.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Train the classifier on labelled sentences.
    Train,
    /// Score the classifiers on the held-out test split.
    Evaluate,
    /// Classify every pooled sentence.
    Predict {
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
    },
    /// Aggregate predictions into firm-year indicators.
    Indicators {
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Estimate the configured regressions.
    Regress {
        /// Distance scale of the geographic instrument, in km.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Render the text and CSV reports.
    Report,
    /// Run every stage in order.
    All,
}

fn load(global: &Global, command: &Command) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&global.config)?;
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &global.out {
        cfg.out = out.clone();
    }
    match command {
        Command::Serve { bind: Some(b) } => cfg.serve.bind = b.clone(),
        Command::Predict { backend: Some(b) } => {
            cfg.classify.backend = match b {
                BackendArg::NaiveBayes => Backend::NaiveBayes,
                BackendArg::Dictionary => Backend::Dictionary,
                BackendArg::Remote => Backend::Remote,
            }
        }
        Command::Indicators { mode: Some(m) } => {
            cfg.indicators.mode = match m {
                ModeArg::Cumulative => IndicatorMode::Cumulative,
                ModeArg::Contemporaneous => IndicatorMode::Contemporaneous,
            }
        }
        Command::Regress { rho: Some(r) } => cfg.regress.rho = *r,
        _ => {}
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let pipeline = Pipeline::new(load(&cli.global, &cli.command)?)?;
    let stage = match &cli.command {
        Command::All => return pipeline.run_all(),
        Command::Serve { .. } => return service::serve(&pipeline.service_config()?),
        Command::Ingest => Stage::Ingest,
        Command::Segment => Stage::Segment,
        Command::Match => Stage::Match,
        Command::Sample => Stage::Sample,
        Command::Train => Stage::Train,
        Command::Evaluate => Stage::Evaluate,
        Command::Predict { .. } => Stage::Predict,
        Command::Indicators { .. } => Stage::Indicators,
        Command::Regress { .. } => Stage::Regress,
        Command::Report => Stage::Report,
    };
    let record = pipeline.run(stage)?;
    for name in record.outputs.keys() {
        println!("{}", pipeline.artifact(name).display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
