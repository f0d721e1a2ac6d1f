use std::path::{Path, PathBuf};

use kinaug_core::calibration::{apply_offset, compute_offset};
use kinaug_core::datasets::{
    load_dataset, load_inertial, save_dataset, DataKind, Dataset, DatasetManifest, Repetition,
    SegmentEntry,
};
use kinaug_core::rotation::{
    estimate_orientation, OrientationTrajectory, Quaternion, DEFAULT_MADGWICK_BETA,
};
use kinaug_core::Error;

use crate::error::{CliError, CliResult};
use crate::resolve;

#[derive(Debug, clap::Args)]
pub struct PreprocessArgs {
    /// Manifest of the raw (inertial) or pre-oriented dataset.
    #[arg(long)]
    pub data: PathBuf,
    /// Skeletal model whose segment order the output follows.
    #[arg(long)]
    pub model: Option<String>,
    /// Madgwick filter gain.
    #[arg(long, default_value_t = DEFAULT_MADGWICK_BETA)]
    pub beta: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn calibrate(
    manifest: &Path,
    segments: &[SegmentEntry],
    trajs: &[OrientationTrajectory],
) -> kinaug_core::Result<Vec<OrientationTrajectory>> {
    segments
        .iter()
        .zip(trajs)
        .map(|(seg, traj)| {
            let [start, end] = seg.calibration_window.ok_or_else(|| {
                Error::parse(
                    manifest,
                    format!("segment {} has no calibration window", seg.id),
                )
            })?;
            let reference = seg.reference.unwrap_or(Quaternion::IDENTITY);
            let offset = compute_offset(traj, start..end, reference)?;
            apply_offset(&offset, traj)
        })
        .collect()
}

pub fn run(args: &PreprocessArgs) -> CliResult<()> {
    if !(args.beta >= 0.0 && args.beta.is_finite()) {
        return Err(CliError::Usage(format!(
            "--beta {} must be >= 0",
            args.beta
        )));
    }
    let manifest = DatasetManifest::load(&args.data)?;
    let reps: Vec<Repetition> = match manifest.data_kind {
        DataKind::Orientation => {
            let ds = load_dataset(&args.data)?;
            ds.repetitions
                .iter()
                .map(|r| {
                    r.with_trajectories(calibrate(
                        &args.data,
                        &manifest.segments,
                        r.trajectories(),
                    )?)
                })
                .collect::<kinaug_core::Result<_>>()?
        }
        DataKind::Inertial => {
            let (_, recordings) = load_inertial(&args.data)?;
            let mut reps = Vec::with_capacity(recordings.len());
            for rec in recordings {
                let mut trajs = Vec::with_capacity(rec.segments.len());
                for (seg, samples) in manifest.segments.iter().zip(&rec.segments) {
                    let (q, _) = estimate_orientation(samples, args.beta, None)?;
                    trajs.push(OrientationTrajectory::new(
                        &seg.id,
                        manifest.sample_rate,
                        q,
                    )?);
                }
                let trajs = calibrate(&args.data, &manifest.segments, &trajs)?;
                let e = rec.entry;
                let mut rep =
                    Repetition::new(e.id, e.subject_id, &manifest.exercise_id, e.label, trajs)?;
                rep.source = e.source;
                rep.rater_labels = e.rater_labels;
                rep.provenance = e.provenance;
                reps.push(rep);
            }
            reps
        }
    };
    let mut dataset = Dataset::from_repetitions(reps)?;
    dataset.segments = manifest.segments.clone();
    if let Some(name) = args.model.as_deref() {
        let model = resolve::model(Some(name), &dataset.exercise_id)?;
        resolve::check_segments(&dataset, &model)?;
        let order: Vec<&str> = model
            .segment_ids()
            .filter(|id| dataset.segments.iter().any(|s| s.id == *id))
            .collect();
        let reordered = dataset
            .repetitions
            .iter()
            .map(|r| kinaug_core::datasets::reorder_segments(r, &order))
            .collect::<kinaug_core::Result<Vec<_>>>()?;
        let entries = order
            .iter()
            .map(|id| {
                dataset
                    .segments
                    .iter()
                    .find(|s| s.id == *id)
                    .cloned()
                    .expect("present")
            })
            .collect();
        dataset.repetitions = reordered;
        dataset.segments = entries;
    }
    let out = resolve::output_dir(args.out.as_deref(), "preprocess");
    save_dataset(&dataset, &out)?;
    println!(
        "calibrated {} repetitions into {}",
        dataset.repetitions.len(),
        out.display()
    );
    Ok(())
}
