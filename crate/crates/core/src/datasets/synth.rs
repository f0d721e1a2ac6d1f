use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Repetition;
use crate::labeling::{assign_label, Label, RuleSet, NUM_CLASSES};
use crate::rotation::{euler_to_quat, EulerAngles};
use crate::skeleton::{
    anchor_root_positions, export_consistent_orientations, extract_metrics, Pose, SkeletalModel,
};
use crate::{Error, Result};

/// Attempts allowed per requested repetition before synthesis gives up.
pub const MAX_ATTEMPTS_PER_REP: usize = 100;

/// Start and peak value of one coordinate; the motion follows
/// `start + (peak - start) * sin^2(pi * u)` for `u` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofProfile {
    pub start: f64,
    pub peak: f64,
}

/// Motion of one class; several archetypes may share a label, in which case
/// each repetition picks one uniformly. Keys are `segment.dof` for joint angles or
/// `root.roll`, `root.pitch`, `root.yaw` for the root orientation; omitted
/// coordinates stay neutral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassArchetype {
    pub label: Label,
    pub profiles: BTreeMap<String, DofProfile>,
}

/// Participant-specific movement characteristics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectSpec {
    pub id: String,
    /// Constant added to start and peak of the keyed coordinate.
    #[serde(default)]
    pub offsets: BTreeMap<String, f64>,
    /// Multiplies every excursion `peak - start`.
    #[serde(default = "one")]
    pub amplitude: f64,
    /// Overrides the corpus-wide class frequencies for this subject.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<[f64; NUM_CLASSES]>,
}

impl SubjectSpec {
    fn weights<'a>(&'a self, spec: &'a CorpusSpec) -> &'a [f64; NUM_CLASSES] {
        self.class_weights.as_ref().unwrap_or(&spec.class_weights)
    }
}

fn valid_weights(w: &[f64]) -> bool {
    w.iter().all(|w| *w >= 0.0) && w.iter().sum::<f64>() > 0.0
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub exercise_id: String,
    /// `full_body` or `lower_body`.
    pub model: String,
    pub frames: usize,
    pub sample_rate: f64,
    pub classes: Vec<ClassArchetype>,
    pub subjects: Vec<SubjectSpec>,
    /// Relative class frequencies within each subject without its own weights.
    #[serde(default = "equal_weights")]
    pub class_weights: [f64; NUM_CLASSES],
    /// Standard deviation of per-repetition noise on starts (rad).
    pub start_noise: f64,
    /// Standard deviation of per-repetition noise on peaks (rad).
    pub peak_noise: f64,
}

fn equal_weights() -> [f64; NUM_CLASSES] {
    [1.0; NUM_CLASSES]
}

impl CorpusSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("corpus spec: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
    }

    /// Balanced leg-raise corpus for the 9-segment model.
    pub fn foot_drop() -> Self {
        Self::from_json(include_str!("../../corpora/foot_drop.json"))
            .expect("bundled foot drop corpus spec is valid")
    }

    /// Class-imbalanced squat corpus for the 15-segment model.
    pub fn deep_squat() -> Self {
        Self::from_json(include_str!("../../corpora/deep_squat.json"))
            .expect("bundled deep squat corpus spec is valid")
    }

    pub fn skeletal_model(&self) -> Result<SkeletalModel> {
        match self.model.as_str() {
            "full_body" => Ok(SkeletalModel::full_body()),
            "lower_body" => Ok(SkeletalModel::lower_body()),
            other => Err(Error::Config(format!("unknown model {other:?}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.frames < 2 || !(self.sample_rate > 0.0) {
            return Err(Error::Config(
                "corpus needs >= 2 frames and a positive rate".into(),
            ));
        }
        if self.subjects.is_empty() || self.classes.is_empty() {
            return Err(Error::Config(
                "corpus needs subjects and class archetypes".into(),
            ));
        }
        if !valid_weights(&self.class_weights)
            || self
                .subjects
                .iter()
                .any(|s| !valid_weights(s.weights(self)))
        {
            return Err(Error::Config(
                "class weights must be non-negative, not all zero".into(),
            ));
        }
        if !(self.start_noise >= 0.0 && self.peak_noise >= 0.0) {
            return Err(Error::Config("noise levels must be non-negative".into()));
        }
        Ok(())
    }
}

/// Splits `total` proportionally to `weights` (largest remainder, ties to the
/// lower index).
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let sum: f64 = weights.iter().sum();
    let exact: Vec<f64> = weights.iter().map(|w| total as f64 * w / sum).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let missing = total - counts.iter().sum::<usize>();
    for &i in order.iter().take(missing) {
        counts[i] += 1;
    }
    counts
}

enum Coord {
    Root(usize),
    Dof(usize),
}

fn resolve(model: &SkeletalModel, key: &str) -> Result<Coord> {
    match key {
        "root.roll" => Ok(Coord::Root(0)),
        "root.pitch" => Ok(Coord::Root(1)),
        "root.yaw" => Ok(Coord::Root(2)),
        _ => {
            let (seg, dof) = key
                .split_once('.')
                .ok_or_else(|| Error::Config(format!("bad coordinate key {key:?}")))?;
            Ok(Coord::Dof(model.dof_index(seg, dof)?))
        }
    }
}

/// Samples one pose sequence for `(subject, archetype)`.
fn sample_motion(
    model: &SkeletalModel,
    spec: &CorpusSpec,
    subject: &SubjectSpec,
    archetype: &ClassArchetype,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Pose>> {
    let start_noise = Normal::new(0.0, spec.start_noise).expect("validated");
    let peak_noise = Normal::new(0.0, spec.peak_noise).expect("validated");
    let mut keys: Vec<&String> = archetype
        .profiles
        .keys()
        .chain(subject.offsets.keys())
        .collect();
    keys.sort();
    keys.dedup();
    let limits = model.limits();
    let mut coords = Vec::with_capacity(keys.len());
    for key in keys {
        let base = archetype.profiles.get(key).copied().unwrap_or(DofProfile {
            start: 0.0,
            peak: 0.0,
        });
        let offset = subject.offsets.get(key).copied().unwrap_or(0.0);
        let start = base.start + offset + start_noise.sample(rng);
        let peak = start + (base.peak - base.start) * subject.amplitude + peak_noise.sample(rng);
        coords.push((resolve(model, key)?, start, peak));
    }
    let mut poses = Vec::with_capacity(spec.frames);
    for f in 0..spec.frames {
        let u = f as f64 / (spec.frames - 1) as f64;
        let s = (PI * u).sin().powi(2);
        let mut pose = Pose::neutral(model);
        let mut root = [0.0; 3];
        for (coord, start, peak) in &coords {
            let v = start + (peak - start) * s;
            match *coord {
                Coord::Root(axis) => root[axis] = v,
                Coord::Dof(i) => pose.joint_angles[i] = v.clamp(limits[i].0, limits[i].1),
            }
        }
        pose.root_orientation = euler_to_quat(EulerAngles::from_array(root))?;
        poses.push(pose);
    }
    anchor_root_positions(model, &mut poses)?;
    Ok(poses)
}

/// Ground-truth corpus: `n` repetitions spread evenly over subjects and by
/// `class_weights` over classes, each graded by `ruleset` on its true poses
/// and resampled until the grade matches its archetype's class.
pub fn synthesize_corpus(
    model: &SkeletalModel,
    ruleset: &RuleSet,
    spec: &CorpusSpec,
    n: usize,
    seed: u64,
) -> Result<Vec<Repetition>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_subject = apportion(n, &vec![1.0; spec.subjects.len()]);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0usize;
    let budget = MAX_ATTEMPTS_PER_REP * n.max(1);
    for (subject, &count) in spec.subjects.iter().zip(&per_subject) {
        let per_class = apportion(count, subject.weights(spec));
        for (c, &wanted) in per_class.iter().enumerate() {
            if wanted == 0 {
                continue;
            }
            let label = Label::from_index(c);
            let archetypes: Vec<&ClassArchetype> =
                spec.classes.iter().filter(|a| a.label == label).collect();
            if archetypes.is_empty() {
                return Err(Error::Config(format!(
                    "corpus spec has no archetype for class {label}"
                )));
            }
            for k in 0..wanted {
                loop {
                    let archetype = archetypes[rng.random_range(0..archetypes.len())];
                    attempts += 1;
                    if attempts > budget {
                        return Err(Error::Config(format!(
                            "archetype for class {label} (subject {}) keeps failing the rule set after {budget} attempts",
                            subject.id
                        )));
                    }
                    let poses = sample_motion(model, spec, subject, archetype, &mut rng)?;
                    let metrics = extract_metrics(model, &poses, model.metrics())?;
                    if assign_label(&metrics, ruleset)?.label != label {
                        continue;
                    }
                    let trajs = export_consistent_orientations(model, &poses, spec.sample_rate)?;
                    out.push(Repetition::new(
                        format!("{}-c{label}-{k:03}", subject.id),
                        subject.id.clone(),
                        spec.exercise_id.clone(),
                        label,
                        trajs,
                    )?);
                    break;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
pub(crate) fn apportion_for_tests(total: usize, weights: &[f64]) -> Vec<usize> {
    apportion(total, weights)
}
