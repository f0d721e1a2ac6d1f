//! Command-line front end: preprocessing, augmentation, rule optimization,
//! classification experiments and synthetic corpora.

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub mod commands;
pub mod error;
pub mod experiment;
pub mod resolve;

pub use error::{CliError, CliResult, EXIT_DATA, EXIT_INVARIANT, EXIT_OK, EXIT_USAGE};

#[derive(Debug, Parser)]
#[command(
    name = "kinaug",
    version,
    about = "Kinematics-based IMU exercise augmentation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate sensor orientations (or fuse raw inertial data) into segment orientations.
    Preprocess(commands::preprocess::PreprocessArgs),
    /// Generate label-controlled augmented repetitions.
    Augment(commands::augment::AugmentArgs),
    /// Random search over rule thresholds.
    Optimize(commands::optimize::OptimizeArgs),
    /// Run a train/test scenario.
    Experiment(experiment::ExperimentArgs),
    /// Fine-tune the dense layers of a checkpoint.
    Finetune(commands::finetune::FinetuneArgs),
    /// Write classifier inputs as CSV.
    ExportFeatures(commands::export::ExportArgs),
    /// Synthesize a labeled corpus.
    Synth(commands::synth::SynthArgs),
}

pub fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Preprocess(a) => commands::preprocess::run(a),
        Command::Augment(a) => commands::augment::run(a),
        Command::Optimize(a) => commands::optimize::run(a),
        Command::Experiment(a) => experiment::run(a),
        Command::Finetune(a) => commands::finetune::run(a),
        Command::ExportFeatures(a) => commands::export::run(a),
        Command::Synth(a) => commands::synth::run(a),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
