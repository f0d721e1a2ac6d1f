//! Repetitions, on-disk datasets, splits and classifier inputs.

mod io;
mod splits;
mod synth;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::augmentation::Provenance;
use crate::labeling::{Label, NUM_CLASSES};
use crate::rotation::{resample_trajectory, OrientationTrajectory};
use crate::{Error, Result};

pub use io::{
    load_dataset, load_inertial, save_dataset, save_inertial, DataKind, DatasetManifest,
    InertialRecording, RepetitionEntry, SegmentEntry, MANIFEST_SCHEMA_VERSION,
};
pub use splits::{audit_leakage, loso_split, stratified_kfold, Side, SplitKind, SplitPlan};
pub use synth::{
    synthesize_corpus, ClassArchetype, CorpusSpec, DofProfile, SubjectSpec, MAX_ATTEMPTS_PER_REP,
};

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default,
)]
#[serde(rename_all = "snake_case")]
pub enum RepetitionSource {
    #[default]
    Real,
    Augmented,
}

/// One exercise repetition: a labeled set of equally long segment
/// orientation trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Repetition {
    pub id: String,
    pub subject_id: String,
    pub exercise_id: String,
    pub label: Label,
    pub source: RepetitionSource,
    pub rater_labels: Vec<Label>,
    pub provenance: Option<Provenance>,
    trajectories: Vec<OrientationTrajectory>,
}

impl Repetition {
    pub fn new(
        id: impl Into<String>,
        subject_id: impl Into<String>,
        exercise_id: impl Into<String>,
        label: Label,
        trajectories: Vec<OrientationTrajectory>,
    ) -> Result<Self> {
        let id = id.into();
        let Some(first) = trajectories.first() else {
            return Err(Error::InvalidArgument(format!(
                "repetition {id} has no trajectories"
            )));
        };
        let mut seen = BTreeSet::new();
        for t in &trajectories {
            if t.len() != first.len() || t.sample_rate() != first.sample_rate() {
                return Err(Error::InvalidArgument(format!(
                    "repetition {id}: segment {} has {} samples at {} Hz, expected {} at {} Hz",
                    t.segment_id(),
                    t.len(),
                    t.sample_rate(),
                    first.len(),
                    first.sample_rate()
                )));
            }
            if !seen.insert(t.segment_id()) {
                return Err(Error::InvalidArgument(format!(
                    "repetition {id}: duplicate segment {}",
                    t.segment_id()
                )));
            }
        }
        Ok(Repetition {
            id,
            subject_id: subject_id.into(),
            exercise_id: exercise_id.into(),
            label,
            source: RepetitionSource::Real,
            rater_labels: Vec::new(),
            provenance: None,
            trajectories,
        })
    }

    pub fn trajectories(&self) -> &[OrientationTrajectory] {
        &self.trajectories
    }

    pub fn trajectory(&self, segment_id: &str) -> Option<&OrientationTrajectory> {
        self.trajectories
            .iter()
            .find(|t| t.segment_id() == segment_id)
    }

    pub fn segment_ids(&self) -> impl Iterator<Item = &str> {
        self.trajectories.iter().map(|t| t.segment_id())
    }

    pub fn len(&self) -> usize {
        self.trajectories[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn sample_rate(&self) -> f64 {
        self.trajectories[0].sample_rate()
    }

    /// Replaces the payload, keeping metadata. Same validation as [`Repetition::new`].
    pub fn with_trajectories(&self, trajectories: Vec<OrientationTrajectory>) -> Result<Self> {
        let fresh = Repetition::new(
            self.id.clone(),
            self.subject_id.clone(),
            self.exercise_id.clone(),
            self.label,
            trajectories,
        )?;
        Ok(Repetition {
            trajectories: fresh.trajectories,
            ..self.clone()
        })
    }
}

/// A loaded dataset: shared segment metadata plus repetitions.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub exercise_id: String,
    pub sample_rate: f64,
    pub segments: Vec<SegmentEntry>,
    pub repetitions: Vec<Repetition>,
}

impl Dataset {
    /// Builds a dataset whose segment list is taken from the first repetition.
    pub fn from_repetitions(repetitions: Vec<Repetition>) -> Result<Self> {
        let Some(first) = repetitions.first() else {
            return Err(Error::InvalidArgument("dataset has no repetitions".into()));
        };
        let segments = first
            .segment_ids()
            .map(|id| SegmentEntry {
                id: id.to_string(),
                calibration_window: None,
                reference: None,
            })
            .collect();
        Ok(Dataset {
            exercise_id: first.exercise_id.clone(),
            sample_rate: first.sample_rate(),
            segments,
            repetitions,
        })
    }

    pub fn segment_ids(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.id.as_str()).collect()
    }

    pub fn subjects(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self
            .repetitions
            .iter()
            .map(|r| r.subject_id.as_str())
            .collect();
        set.into_iter().map(str::to_string).collect()
    }

    pub fn get(&self, id: &str) -> Option<&Repetition> {
        self.repetitions.iter().find(|r| r.id == id)
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        class_counts(self.repetitions.iter().map(|r| r.label))
    }
}

pub fn class_counts(labels: impl IntoIterator<Item = Label>) -> [usize; NUM_CLASSES] {
    let mut counts = [0; NUM_CLASSES];
    for l in labels {
        counts[l.index()] += 1;
    }
    counts
}

/// Indices after random duplication of minority-class members until every
/// class matches the majority count. Originals come first, in input order.
pub fn oversample_indices(labels: &[Label], seed: u64) -> Result<Vec<usize>> {
    let mut members: [Vec<usize>; NUM_CLASSES] = Default::default();
    for (i, l) in labels.iter().enumerate() {
        members[l.index()].push(i);
    }
    if let Some(c) = members.iter().position(Vec::is_empty) {
        return Err(Error::InvalidArgument(format!(
            "class {} has no repetitions to oversample",
            Label::from_index(c)
        )));
    }
    let target = members.iter().map(Vec::len).max().unwrap_or(0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<usize> = (0..labels.len()).collect();
    for m in &members {
        for _ in m.len()..target {
            out.push(m[rng.random_range(0..m.len())]);
        }
    }
    Ok(out)
}

pub fn oversample(reps: &[Repetition], seed: u64) -> Result<Vec<Repetition>> {
    let labels: Vec<Label> = reps.iter().map(|r| r.label).collect();
    Ok(oversample_indices(&labels, seed)?
        .into_iter()
        .map(|i| reps[i].clone())
        .collect())
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

pub const DEFAULT_TIME_STEPS: usize = 256;

/// Classifier input: each trajectory resampled to `time_steps`, then four
/// rows (w, x, y, z) per segment in the repetition's segment order.
pub fn build_input_matrix(rep: &Repetition, time_steps: usize) -> Result<(Matrix, Label)> {
    let mut m = Matrix::zeros(4 * rep.trajectories.len(), time_steps);
    for (s, traj) in rep.trajectories.iter().enumerate() {
        let resampled = resample_trajectory(traj, time_steps)?;
        for (t, q) in resampled.samples().iter().enumerate() {
            for (k, v) in q.to_array().into_iter().enumerate() {
                m.data[(4 * s + k) * time_steps + t] = v;
            }
        }
    }
    Ok((m, rep.label))
}

/// Reorders trajectories to `order`; fails if a segment is missing.
pub fn reorder_segments(rep: &Repetition, order: &[&str]) -> Result<Repetition> {
    let trajs = order
        .iter()
        .map(|id| {
            rep.trajectory(id).cloned().ok_or_else(|| {
                Error::InvalidArgument(format!("repetition {} lacks segment {id}", rep.id))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rep.with_trajectories(trajs)
}

pub(crate) fn shuffled<T: Clone>(items: &[T], rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(rng);
    v
}

#[cfg(test)]
mod tests;
