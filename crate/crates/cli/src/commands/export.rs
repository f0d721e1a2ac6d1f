use std::path::PathBuf;

use kinaug_core::datasets::{build_input_matrix, load_dataset, DEFAULT_TIME_STEPS};
use kinaug_core::Error;

use crate::error::{CliError, CliResult};
use crate::resolve;

#[derive(Debug, clap::Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Resampled length of every trajectory.
    #[arg(long, default_value_t = DEFAULT_TIME_STEPS)]
    pub time_steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Writes `features.csv` (one flattened input matrix per row) and
/// `labels.csv` (id, subject, label, source per row, same order). The
/// feature file is the input for embeddings such as t-SNE (perplexity 15
/// suits corpora of a few hundred repetitions).
pub fn run(args: &ExportArgs) -> CliResult<()> {
    if args.time_steps < 2 {
        return Err(CliError::Usage("--time-steps must be at least 2".into()));
    }
    let data = load_dataset(&args.data)?;
    let out = resolve::output_dir(args.out.as_deref(), "export-features");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let fpath = out.join("features.csv");
    let lpath = out.join("labels.csv");
    let mut features = csv::Writer::from_path(&fpath).map_err(|e| Error::parse(&fpath, e))?;
    let mut labels = csv::Writer::from_path(&lpath).map_err(|e| Error::parse(&lpath, e))?;
    let mut header = Vec::new();
    for seg in data.segment_ids() {
        for c in ["w", "x", "y", "z"] {
            for t in 0..args.time_steps {
                header.push(format!("{seg}.{c}.{t}"));
            }
        }
    }
    features
        .write_record(&header)
        .map_err(|e| Error::parse(&fpath, e))?;
    labels
        .write_record(["repetition_id", "subject_id", "label", "source"])
        .map_err(|e| Error::parse(&lpath, e))?;
    for rep in &data.repetitions {
        let (m, label) = build_input_matrix(rep, args.time_steps)?;
        features
            .write_record(m.data.iter().map(|v| format!("{v:.16e}")))
            .map_err(|e| Error::parse(&fpath, e))?;
        let source = match rep.source {
            kinaug_core::datasets::RepetitionSource::Real => "real",
            kinaug_core::datasets::RepetitionSource::Augmented => "augmented",
        };
        labels
            .write_record([rep.id.as_str(), &rep.subject_id, &label.to_string(), source])
            .map_err(|e| Error::parse(&lpath, e))?;
    }
    features.flush().map_err(|e| Error::io(&fpath, e))?;
    labels.flush().map_err(|e| Error::io(&lpath, e))?;
    println!(
        "exported {} repetitions x {} features to {}",
        data.repetitions.len(),
        header.len(),
        fpath.display()
    );
    Ok(())
}
