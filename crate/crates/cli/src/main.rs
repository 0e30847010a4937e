//! `maskshift` command-line driver.
//!
//! Exit codes: 0 ok, 2 config or usage error, 3 I/O or file-format error,
//! 4 internal failure (freeze violation, digest mismatch, failed experiment cell).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maskshift::model::{ForwardMask, FreezeDirection};
use maskshift::{Error, InitStrategy, MaskStrategy};

#[derive(Parser, Debug)]
#[command(name = "maskshift", version, about = "Learned weight masks for source-to-target transfer of a classifier head")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic source/target pair of feature files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        /// Existing output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = DataFormat::Ftds)]
        format: DataFormat,
    },
    /// Train a head on the source domain and save it with its snapshots.
    TrainSource {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "MASKSHIFT_SEED")]
        seed: Option<u64>,
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a freeze mask for a trained head.
    LearnMask {
        #[arg(long)]
        head: PathBuf,
        #[arg(long)]
        strategy: StrategyArg,
        /// Source features. Not needed for the naive strategy.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "MASKSHIFT_SEED")]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        freeze_direction: Option<DirectionArg>,
        #[arg(long, value_enum)]
        forward_mask: Option<ForwardArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fine-tune a head on target data with a mask. Takes no source data.
    Transfer {
        #[arg(long)]
        head: PathBuf,
        /// Omit for unmasked fine-tuning of every weight.
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long)]
        target: PathBuf,
        #[arg(long, value_enum, default_value_t = InitArg::SourceInit)]
        init: InitArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, env = "MASKSHIFT_SEED")]
        seed: Option<u64>,
        /// Keep the bias fixed during fine-tuning.
        #[arg(long)]
        freeze_bias: bool,
        #[arg(long)]
        num_classes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the full strategy x init x seed grid and write reports.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = ReportArg::Json)]
        format: ReportArg,
        /// Worker threads; 0 uses every processor.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Check that an artifact's embedded digest matches a config.
    Verify {
        artifact: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum)]
        freeze_direction: Option<DirectionArg>,
        #[arg(long, value_enum)]
        forward_mask: Option<ForwardArg>,
        #[arg(long)]
        freeze_bias: bool,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DataFormat {
    Ftds,
    Csv,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StrategyArg {
    Naive,
    Editor,
    Binary,
}

impl From<StrategyArg> for MaskStrategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Naive => MaskStrategy::Naive,
            StrategyArg::Editor => MaskStrategy::Editor,
            StrategyArg::Binary => MaskStrategy::Binary,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    SourceFinal,
    SourceInit,
    Random,
}

impl From<InitArg> for InitStrategy {
    fn from(s: InitArg) -> Self {
        match s {
            InitArg::SourceFinal => InitStrategy::SourceFinal,
            InitArg::SourceInit => InitStrategy::SourceInit,
            InitArg::Random => InitStrategy::Random,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum DirectionArg {
    Large,
    Small,
    Both,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ForwardArg {
    Soft,
    Hard,
}

impl From<ForwardArg> for ForwardMask {
    fn from(f: ForwardArg) -> Self {
        match f {
            ForwardArg::Soft => ForwardMask::Soft,
            ForwardArg::Hard => ForwardMask::Hard,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ReportArg {
    Json,
    Csv,
}

/// Flag overrides applied to a stage config before it is used or digested.
#[derive(Debug, Default, Clone, Copy)]
pub struct Overrides {
    pub freeze_direction: Option<FreezeDirection>,
    pub forward_mask: Option<ForwardMask>,
    pub freeze_bias: bool,
}

fn single_direction(d: Option<DirectionArg>) -> Option<FreezeDirection> {
    match d? {
        DirectionArg::Large => Some(FreezeDirection::Large),
        DirectionArg::Small => Some(FreezeDirection::Small),
        DirectionArg::Both => None,
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io(_) | Error::Format { .. } | Error::Serialization(_) => 3,
        Error::Invariant(_) | Error::Determinism(_) | Error::Numeric(_) => 4,
        _ => 2,
    }
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Synth { config, out, format } => commands::synth(&config, &out, matches!(format, DataFormat::Csv)),
        Command::TrainSource { data, config, seed, num_classes, out } => {
            commands::train_source(&data, config.as_deref(), seed, num_classes, &out)
        }
        Command::LearnMask { head, strategy, data, config, seed, freeze_direction, forward_mask, out } => {
            let both = freeze_direction == Some(DirectionArg::Both);
            let ov = Overrides {
                freeze_direction: single_direction(freeze_direction),
                forward_mask: forward_mask.map(Into::into),
                freeze_bias: false,
            };
            commands::learn_mask(&head, strategy.into(), data.as_deref(), config.as_deref(), seed, ov, both, &out)
        }
        Command::Transfer { head, mask, target, init, config, seed, freeze_bias, num_classes, out } => {
            let ov = Overrides { freeze_bias, ..Default::default() };
            commands::transfer(&head, mask.as_deref(), &target, init.into(), config.as_deref(), seed, ov, num_classes, &out)
        }
        Command::Experiment { config, out, format, jobs } => {
            let fmt = match format {
                ReportArg::Json => maskshift::eval::ReportFormat::Json,
                ReportArg::Csv => maskshift::eval::ReportFormat::Csv,
            };
            commands::experiment(&config, out.as_deref(), fmt, jobs)
        }
        Command::Verify { artifact, config, freeze_direction, forward_mask, freeze_bias } => {
            if freeze_direction == Some(DirectionArg::Both) {
                return Err(Error::Config("verify needs a single freeze direction".into()));
            }
            let ov = Overrides {
                freeze_direction: single_direction(freeze_direction),
                forward_mask: forward_mask.map(Into::into),
                freeze_bias,
            };
            commands::verify(&artifact, config.as_deref(), ov)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
