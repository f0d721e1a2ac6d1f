use std::path::PathBuf;

use kinaug_core::augmentation::{
    estimate_distributions, generate_set, DistributionSet, GenerationConfig, DEFAULT_MAX_ATTEMPTS,
};
use kinaug_core::datasets::{load_dataset, save_dataset, Dataset, RepetitionSource};

use crate::error::{write_json, CliError, CliResult};
use crate::resolve;

/// Candidates kept per (source, class) pair at desk scale.
pub const DEFAULT_PER_CLASS_COUNT: usize = 30;

#[derive(Debug, clap::Args)]
pub struct AugmentArgs {
    /// Manifest of the calibrated real dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Distribution file; combined with --estimate it overrides estimated groups.
    #[arg(long)]
    pub distributions: Option<PathBuf>,
    /// Estimate distributions from the real repetitions.
    #[arg(long)]
    pub estimate: bool,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub ruleset: Option<String>,
    /// Accepted candidates per (source, target class) pair.
    #[arg(long, default_value_t = DEFAULT_PER_CLASS_COUNT)]
    pub count: usize,
    #[arg(long, default_value_t = DEFAULT_MAX_ATTEMPTS)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &AugmentArgs) -> CliResult<()> {
    if args.count == 0 || args.max_attempts == 0 {
        return Err(CliError::Usage(
            "--count and --max-attempts must be at least 1".into(),
        ));
    }
    let real = load_dataset(&args.data)?;
    let model = resolve::model(args.model.as_deref(), &real.exercise_id)?;
    let ruleset = resolve::ruleset(args.ruleset.as_deref(), &real.exercise_id)?;
    resolve::check_segments(&real, &model)?;
    let sources: Vec<_> = real
        .repetitions
        .iter()
        .filter(|r| r.source == RepetitionSource::Real)
        .cloned()
        .collect();
    let dists = match (&args.distributions, args.estimate) {
        (None, false) => {
            return Err(CliError::Usage(
                "pass --distributions, --estimate or both".into(),
            ))
        }
        (Some(p), false) => DistributionSet::load(p)?,
        (None, true) => estimate_distributions(&sources)?,
        (Some(p), true) => {
            estimate_distributions(&sources)?.merged_with(&DistributionSet::load(p)?)
        }
    };
    let cfg = GenerationConfig {
        max_attempts: args.max_attempts,
        ..GenerationConfig::new(args.count, args.seed)
    };
    let (augmented, report) = generate_set(&sources, &dists, &model, &ruleset, &cfg)?;
    let out = resolve::output_dir(args.out.as_deref(), "augment");
    if augmented.is_empty() {
        std::fs::create_dir_all(&out).map_err(|e| kinaug_core::Error::io(&out, e))?;
    } else {
        let mut dataset = Dataset::from_repetitions(augmented)?;
        dataset.segments = real.segments.clone();
        save_dataset(&dataset, &out)?;
    }
    dists.save(&out.join("distributions.json"))?;
    write_json(&report, &out.join("generation_report.json"))?;
    for c in &report.classes {
        println!(
            "class {}: {} accepted of {} attempts",
            c.class, c.accepted, c.attempts
        );
    }
    println!(
        "{} accepted, {} unreachable pairs, written to {}",
        report.accepted,
        report.unreachable.len(),
        out.display()
    );
    Ok(())
}
