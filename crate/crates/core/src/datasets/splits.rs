use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{shuffled, Repetition};
use crate::labeling::Label;
use crate::{Error, Result};

/// Fraction of the non-test repetitions held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SplitKind {
    Kfold {
        k: usize,
        fold: usize,
    },
    Loso {
        subject: String,
    },
    /// Tuning on part of one subject's repetitions, testing on the rest.
    Finetune {
        subject: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub kind: SplitKind,
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    /// Subjects with fewer repetitions than folds, distributed best-effort.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flagged_subjects: Vec<String>,
}

impl SplitPlan {
    pub fn side(&self, side: Side) -> &[String] {
        match side {
            Side::Train => &self.train,
            Side::Validation => &self.validation,
            Side::Test => &self.test,
        }
    }

    pub fn side_of(&self, id: &str) -> Option<Side> {
        [Side::Train, Side::Validation, Side::Test]
            .into_iter()
            .find(|&s| self.side(s).iter().any(|x| x == id))
    }

    pub fn held_out_subject(&self) -> Option<&str> {
        match &self.kind {
            SplitKind::Loso { subject } => Some(subject),
            SplitKind::Kfold { .. } | SplitKind::Finetune { .. } => None,
        }
    }
}

/// Splits the non-test repetitions into train and validation, stratified by
/// class. Each class with at least two members contributes at least one
/// validation repetition.
fn train_validation(reps: &[&Repetition], rng: &mut ChaCha8Rng) -> (Vec<String>, Vec<String>) {
    let mut classes: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
    for (i, r) in reps.iter().enumerate() {
        classes.entry(r.label).or_default().push(i);
    }
    let mut val = BTreeSet::new();
    for members in classes.values() {
        let order = shuffled(members, rng);
        let n = order.len();
        let mut n_val = (n as f64 * VALIDATION_FRACTION).round() as usize;
        if n >= 2 {
            n_val = n_val.max(1);
        }
        val.extend(order.into_iter().take(n_val));
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (i, r) in reps.iter().enumerate() {
        if val.contains(&i) {
            validation.push(r.id.clone());
        } else {
            train.push(r.id.clone());
        }
    }
    (train, validation)
}

fn check_unique_ids(reps: &[Repetition]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for r in reps {
        if !seen.insert(r.id.as_str()) {
            return Err(Error::InvalidArgument(format!(
                "duplicate repetition id {}",
                r.id
            )));
        }
    }
    Ok(())
}

/// k folds stratified per (subject, class) group; fold i is the test set of
/// plan i.
pub fn stratified_kfold(reps: &[Repetition], k: usize, seed: u64) -> Result<Vec<SplitPlan>> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "k-fold needs k >= 2, got {k}"
        )));
    }
    if k > reps.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} available repetitions",
            reps.len()
        )));
    }
    check_unique_ids(reps)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut groups: BTreeMap<(&str, Label), Vec<usize>> = BTreeMap::new();
    let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, r) in reps.iter().enumerate() {
        groups.entry((&r.subject_id, r.label)).or_default().push(i);
        *per_subject.entry(&r.subject_id).or_default() += 1;
    }
    let flagged: Vec<String> = per_subject
        .iter()
        .filter(|(_, &n)| n < k)
        .map(|(s, _)| s.to_string())
        .collect();

    // Round-robin inside each group; the start fold carries over between
    // groups so fold sizes stay within one of each other.
    let mut fold_of = vec![0; reps.len()];
    let mut start = 0;
    for members in groups.values() {
        for (j, idx) in shuffled(members, &mut rng).into_iter().enumerate() {
            fold_of[idx] = (start + j) % k;
        }
        start = (start + members.len()) % k;
    }

    let mut plans = Vec::with_capacity(k);
    for fold in 0..k {
        let test: Vec<String> = (0..reps.len())
            .filter(|&i| fold_of[i] == fold)
            .map(|i| reps[i].id.clone())
            .collect();
        let rest: Vec<&Repetition> = (0..reps.len())
            .filter(|&i| fold_of[i] != fold)
            .map(|i| &reps[i])
            .collect();
        let (train, validation) = train_validation(&rest, &mut rng);
        plans.push(SplitPlan {
            kind: SplitKind::Kfold { k, fold },
            train,
            validation,
            test,
            flagged_subjects: flagged.clone(),
        });
    }
    Ok(plans)
}

/// One plan per subject, holding that subject's repetitions out as the test set.
pub fn loso_split(reps: &[Repetition], seed: u64) -> Result<Vec<SplitPlan>> {
    check_unique_ids(reps)?;
    let subjects: BTreeSet<&str> = reps.iter().map(|r| r.subject_id.as_str()).collect();
    if subjects.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "leave-one-subject-out needs at least 2 subjects, found {}",
            subjects.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(subjects
        .into_iter()
        .map(|subject| {
            let test = reps
                .iter()
                .filter(|r| r.subject_id == subject)
                .map(|r| r.id.clone())
                .collect();
            let rest: Vec<&Repetition> = reps.iter().filter(|r| r.subject_id != subject).collect();
            let (train, validation) = train_validation(&rest, &mut rng);
            SplitPlan {
                kind: SplitKind::Loso {
                    subject: subject.to_string(),
                },
                train,
                validation,
                test,
                flagged_subjects: Vec::new(),
            }
        })
        .collect())
}

/// Checks that a plan partitions real repetitions without leakage and that
/// every augmented repetition placed on a side derives from a real repetition
/// on the same side. Reports all offending ids.
pub fn audit_leakage(
    plan: &SplitPlan,
    real: &[Repetition],
    augmented: &[(Side, &Repetition)],
) -> Result<()> {
    let subject_of: HashMap<&str, &str> = real
        .iter()
        .map(|r| (r.id.as_str(), r.subject_id.as_str()))
        .collect();
    let mut offenders = BTreeSet::new();
    let mut side_of: HashMap<&str, Side> = HashMap::new();
    for side in [Side::Train, Side::Validation, Side::Test] {
        for id in plan.side(side) {
            if !subject_of.contains_key(id.as_str()) || side_of.insert(id, side).is_some() {
                offenders.insert(id.clone());
            }
        }
    }
    if let Some(held_out) = plan.held_out_subject() {
        for side in [Side::Train, Side::Validation] {
            for id in plan.side(side) {
                if subject_of.get(id.as_str()) == Some(&held_out) {
                    offenders.insert(id.clone());
                }
            }
        }
        for id in &plan.test {
            if subject_of.get(id.as_str()).is_some_and(|s| *s != held_out) {
                offenders.insert(id.clone());
            }
        }
    }
    for (side, rep) in augmented {
        let ok = rep.provenance.as_ref().is_some_and(|p| {
            side_of.get(p.source_id.as_str()) == Some(side)
                && subject_of.get(p.source_id.as_str()) == Some(&rep.subject_id.as_str())
        });
        let leaks_subject = *side != Side::Test && plan.held_out_subject() == Some(&rep.subject_id);
        if !ok || leaks_subject {
            offenders.insert(rep.id.clone());
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(Error::Leakage {
            ids: offenders.into_iter().collect(),
        })
    }
}
