use std::path::{Path, PathBuf};

use kinaug_core::datasets::{CorpusSpec, Dataset};
use kinaug_core::labeling::RuleSet;
use kinaug_core::skeleton::SkeletalModel;

use crate::error::{CliError, CliResult};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_ENV: &str = "KINAUG_OUTPUT_ROOT";

/// `--out` if given, else `<root>/<command>` with the root taken from
/// [`OUTPUT_ROOT_ENV`] or `kinaug-out`.
pub fn output_dir(explicit: Option<&Path>, command: &str) -> PathBuf {
    match explicit {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUTPUT_ROOT_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("kinaug-out"))
            .join(command),
    }
}

pub fn builtin_model(name: &str) -> Option<SkeletalModel> {
    match name {
        "full_body" => Some(SkeletalModel::full_body()),
        "lower_body" => Some(SkeletalModel::lower_body()),
        _ => None,
    }
}

pub fn builtin_ruleset(name: &str) -> Option<RuleSet> {
    match name {
        "deep_squat" => Some(RuleSet::deep_squat()),
        "foot_drop" => Some(RuleSet::foot_drop()),
        _ => None,
    }
}

pub fn builtin_corpus(name: &str) -> Option<CorpusSpec> {
    match name {
        "deep_squat" => Some(CorpusSpec::deep_squat()),
        "foot_drop" => Some(CorpusSpec::foot_drop()),
        _ => None,
    }
}

/// Built-in model name or model file; defaults by exercise id.
pub fn model(arg: Option<&str>, exercise_id: &str) -> CliResult<SkeletalModel> {
    match arg {
        Some(a) => match builtin_model(a) {
            Some(m) => Ok(m),
            None => Ok(SkeletalModel::load(Path::new(a))?),
        },
        None => builtin_corpus(exercise_id)
            .map(|spec| spec.skeletal_model())
            .transpose()?
            .ok_or_else(|| {
                CliError::Usage(format!(
                    "no built-in model for exercise {exercise_id}; pass --model"
                ))
            }),
    }
}

/// Built-in rule set name or rule set file; defaults by exercise id.
pub fn ruleset(arg: Option<&str>, exercise_id: &str) -> CliResult<RuleSet> {
    let rs = match arg {
        Some(a) => match builtin_ruleset(a) {
            Some(r) => r,
            None => RuleSet::load(Path::new(a))?,
        },
        None => builtin_ruleset(exercise_id).ok_or_else(|| {
            CliError::Usage(format!(
                "no built-in rule set for exercise {exercise_id}; pass --ruleset"
            ))
        })?,
    };
    if rs.exercise_id != exercise_id {
        return Err(CliError::Usage(format!(
            "rule set is for exercise {}, data is {exercise_id}",
            rs.exercise_id
        )));
    }
    Ok(rs)
}

/// Fails unless every dataset segment exists in the model.
pub fn check_segments(dataset: &Dataset, model: &SkeletalModel) -> CliResult<()> {
    for id in dataset.segment_ids() {
        model.segment_index(id)?;
    }
    Ok(())
}
