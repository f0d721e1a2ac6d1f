use std::path::{Path, PathBuf};

use kinaug_core::datasets::{save_dataset, synthesize_corpus, CorpusSpec, Dataset};

use crate::error::{CliError, CliResult};
use crate::resolve;

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    /// Built-in corpus (`foot_drop`, `deep_squat`) or corpus-spec JSON file.
    #[arg(long, default_value = "foot_drop")]
    pub corpus: String,
    /// Rule set grading the ground truth (built-in name or file).
    #[arg(long)]
    pub ruleset: Option<String>,
    /// Number of repetitions.
    #[arg(long, default_value_t = 210)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn corpus_spec(arg: &str) -> CliResult<CorpusSpec> {
    match resolve::builtin_corpus(arg) {
        Some(s) => Ok(s),
        None => Ok(CorpusSpec::load(Path::new(arg))?),
    }
}

pub fn run(args: &SynthArgs) -> CliResult<()> {
    if args.n == 0 {
        return Err(CliError::Usage("--n must be at least 1".into()));
    }
    let spec = corpus_spec(&args.corpus)?;
    let model = spec.skeletal_model()?;
    let ruleset = resolve::ruleset(args.ruleset.as_deref(), &spec.exercise_id)?;
    let reps = synthesize_corpus(&model, &ruleset, &spec, args.n, args.seed)?;
    let dataset = Dataset::from_repetitions(reps)?;
    let out = resolve::output_dir(args.out.as_deref(), "synth");
    save_dataset(&dataset, &out)?;
    let counts = dataset.class_counts();
    println!(
        "wrote {} repetitions ({} / {} / {} per class) to {}",
        dataset.repetitions.len(),
        counts[0],
        counts[1],
        counts[2],
        out.display()
    );
    Ok(())
}
