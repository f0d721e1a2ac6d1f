use std::path::PathBuf;

use kinaug_core::classifier::{
    evaluate, finetune, load_checkpoint, save_checkpoint, write_history_csv, Example,
    FinetuneConfig,
};
use kinaug_core::datasets::{build_input_matrix, load_dataset, reorder_segments, Dataset};
use kinaug_core::Error;

use crate::error::{write_json, CliError, CliResult};
use crate::resolve;

#[derive(Debug, clap::Args)]
pub struct FinetuneArgs {
    /// Checkpoint to start from.
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Tuning set manifest.
    #[arg(long)]
    pub data: PathBuf,
    /// Validation manifest, recorded in the history only.
    #[arg(long)]
    pub val: PathBuf,
    /// Optional test manifest evaluated before and after tuning.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// `desk` (default) or `full` learning-rate schedule.
    #[arg(long, default_value = "desk")]
    pub preset: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn examples(data: &Dataset, order: &[&str], time_steps: usize) -> CliResult<Vec<Example>> {
    data.repetitions
        .iter()
        .map(|r| {
            Ok(build_input_matrix(
                &reorder_segments(r, order)?,
                time_steps,
            )?)
        })
        .collect()
}

pub fn run(args: &FinetuneArgs) -> CliResult<()> {
    let base = match args.preset.as_str() {
        "desk" => FinetuneConfig::desk(),
        "full" => FinetuneConfig::default(),
        other => return Err(CliError::Usage(format!("unknown preset {other}"))),
    };
    let model = load_checkpoint(&args.checkpoint)?;
    let tune = load_dataset(&args.data)?;
    let order: Vec<String> = tune.segment_ids().iter().map(|s| s.to_string()).collect();
    let order: Vec<&str> = order.iter().map(String::as_str).collect();
    if 4 * order.len() != model.input_rows {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} input rows, data has {} segments",
            model.input_rows,
            order.len()
        )));
    }
    let steps = model.input_cols;
    let tune_ex = examples(&tune, &order, steps)?;
    let val_ex = examples(&load_dataset(&args.val)?, &order, steps)?;
    let mut cfg = FinetuneConfig {
        seed: args.seed,
        ..base
    };
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    let tuned = finetune(&model, &tune_ex, &val_ex, &cfg)?;
    let out = resolve::output_dir(args.out.as_deref(), "finetune");
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    save_checkpoint(&tuned, &out.join("model.ckpt"))?;
    write_history_csv(&tuned, &out.join("model.history.csv"))?;
    if let Some(t) = &args.test {
        let test_ex = examples(&load_dataset(t)?, &order, steps)?;
        let before = evaluate(&model, &test_ex)?;
        let after = evaluate(&tuned, &test_ex)?;
        println!("macro F1 {:.4} -> {:.4}", before.macro_f1, after.macro_f1);
        write_json(
            &serde_json::json!({ "baseline": before, "finetuned": after }),
            &out.join("evaluation.json"),
        )?;
    }
    Ok(())
}
