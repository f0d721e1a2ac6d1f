use std::path::PathBuf;

use kinaug_core::datasets::{load_dataset, Repetition};
use kinaug_core::labeling::{
    evaluate_labeler, optimize_thresholds, Label, LabelerEvaluation, OptimizationResult,
    DEFAULT_SEARCH_BUDGET,
};
use kinaug_core::skeleton::{extract_metrics, run_ik, KinematicMetrics, SkeletalModel};
use serde::Serialize;

use crate::error::{write_json, CliError, CliResult};
use crate::resolve;

#[derive(Debug, clap::Args)]
pub struct OptimizeArgs {
    /// Manifest of the expert-labeled dataset.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub model: Option<String>,
    /// Rule set whose thresholds are searched (built-in name or file).
    #[arg(long)]
    pub ruleset: Option<String>,
    /// Number of random threshold combinations.
    #[arg(long, default_value_t = DEFAULT_SEARCH_BUDGET)]
    pub budget: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct OptimizeReport {
    pub initial: LabelerEvaluation,
    pub optimized: LabelerEvaluation,
    pub search: OptimizationResult,
}

/// Joint-angle metrics of one repetition, via inverse kinematics.
pub fn repetition_metrics(
    model: &SkeletalModel,
    rep: &Repetition,
) -> kinaug_core::Result<KinematicMetrics> {
    let track = run_ik(model, rep.trajectories())?;
    extract_metrics(model, &track.poses, model.metrics())
}

pub fn run(args: &OptimizeArgs) -> CliResult<()> {
    if args.budget == 0 {
        return Err(CliError::Usage("--budget must be at least 1".into()));
    }
    let data = load_dataset(&args.data)?;
    let model = resolve::model(args.model.as_deref(), &data.exercise_id)?;
    let ruleset = resolve::ruleset(args.ruleset.as_deref(), &data.exercise_id)?;
    resolve::check_segments(&data, &model)?;
    let labeled: Vec<(KinematicMetrics, Label)> = data
        .repetitions
        .iter()
        .map(|r| Ok((repetition_metrics(&model, r)?, r.label)))
        .collect::<kinaug_core::Result<_>>()?;
    let search = optimize_thresholds(&ruleset, &labeled, args.budget, args.seed)?;
    let tuned = search.apply(&ruleset);
    let report = OptimizeReport {
        initial: evaluate_labeler(&ruleset, &labeled)?,
        optimized: evaluate_labeler(&tuned, &labeled)?,
        search,
    };
    let out = resolve::output_dir(args.out.as_deref(), "optimize");
    std::fs::create_dir_all(&out).map_err(|e| kinaug_core::Error::io(&out, e))?;
    tuned.save(&out.join("ruleset.json"))?;
    write_json(&report, &out.join("optimization.json"))?;
    println!(
        "GM-F1 {:.4} -> {:.4} over {} candidates; rule set written to {}",
        report.initial.gm_f1,
        report.optimized.gm_f1,
        args.budget,
        out.join("ruleset.json").display()
    );
    Ok(())
}
