use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{gm_f1, ConfusionMatrix, Label, RuleSet, NUM_CLASSES};
use crate::skeleton::KinematicMetrics;
use crate::{Error, Result};

pub const DEFAULT_SEARCH_BUDGET: u64 = 100_000;

/// Outcome of a random threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub exercise_id: String,
    pub thresholds: BTreeMap<String, f64>,
    pub score: f64,
    pub budget: u64,
    pub seed: u64,
    /// Zero-based index of the candidate that produced `score`.
    pub best_index: u64,
    /// Ranges the thresholds were drawn from.
    pub ranges: BTreeMap<String, [f64; 2]>,
    /// Every strict improvement of the running maximum as (index, score).
    pub improvements: Vec<(u64, f64)>,
}

impl OptimizationResult {
    /// The input rule set with the winning thresholds.
    pub fn apply(&self, ruleset: &RuleSet) -> RuleSet {
        ruleset.with_thresholds(&self.thresholds)
    }
}

/// Random search over criterion thresholds maximizing GM-F1 against the
/// expert labels. Candidates are drawn from a ChaCha8 stream seeded with
/// `seed`; ties keep the earliest candidate.
pub fn optimize_thresholds(
    ruleset: &RuleSet,
    reps: &[(KinematicMetrics, Label)],
    budget: u64,
    seed: u64,
) -> Result<OptimizationResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument(
            "search budget must be at least 1".into(),
        ));
    }
    if reps.is_empty() {
        return Err(Error::InvalidArgument(
            "no labeled repetitions to optimize on".into(),
        ));
    }
    let compiled = ruleset.compile()?;
    let nc = ruleset.criteria.len();

    // values[r * nc + c]: aggregate read by criterion c on repetition r
    let mut values = Vec::with_capacity(reps.len() * nc);
    for (metrics, _) in reps {
        for c in &ruleset.criteria {
            values.push(c.value(metrics)?);
        }
    }
    let truth: Vec<usize> = reps.iter().map(|(_, l)| l.index()).collect();

    let mut ranges = BTreeMap::new();
    let mut bounds = Vec::with_capacity(nc);
    for (ci, c) in ruleset.criteria.iter().enumerate() {
        let [lo, hi] = match ruleset.search_ranges.get(&c.id) {
            Some(r) => *r,
            None => {
                let col = values.iter().skip(ci).step_by(nc.max(1));
                let lo = col.clone().copied().fold(f64::INFINITY, f64::min);
                let hi = col.copied().fold(f64::NEG_INFINITY, f64::max);
                [lo, hi]
            }
        };
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::Config(format!(
                "invalid search range for criterion {}",
                c.id
            )));
        }
        ranges.insert(c.id.clone(), [lo, hi]);
        bounds.push((lo, hi));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut candidate = vec![0.0; nc];
    let mut best = vec![0.0; nc];
    let mut best_score = f64::NEG_INFINITY;
    let mut best_index = 0;
    let mut improvements = Vec::new();
    let mut cm = ConfusionMatrix::new(NUM_CLASSES);

    for index in 0..budget {
        for (t, &(lo, hi)) in candidate.iter_mut().zip(&bounds) {
            *t = lo + (hi - lo) * rng.random::<f64>();
        }
        cm.clear();
        for (r, &true_class) in truth.iter().enumerate() {
            let row = &values[r * nc..(r + 1) * nc];
            let mut bits = 0u64;
            for (ci, c) in ruleset.criteria.iter().enumerate() {
                if c.comparator.holds(row[ci], candidate[ci]) {
                    bits |= 1 << ci;
                }
            }
            cm.add(true_class, compiled.decide(bits).index());
        }
        let score = gm_f1(&cm)?;
        if score > best_score {
            best_score = score;
            best_index = index;
            best.copy_from_slice(&candidate);
            improvements.push((index, score));
        }
    }

    Ok(OptimizationResult {
        exercise_id: ruleset.exercise_id.clone(),
        thresholds: ruleset
            .criteria
            .iter()
            .zip(&best)
            .map(|(c, &t)| (c.id.clone(), t))
            .collect(),
        score: best_score,
        budget,
        seed,
        best_index,
        ranges,
        improvements,
    })
}
