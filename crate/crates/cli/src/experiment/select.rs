use std::collections::BTreeMap;

use kinaug_core::augmentation::{
    candidate_seed, generate_candidate, CandidateOutcome, DistributionSet,
};
use kinaug_core::datasets::Repetition;
use kinaug_core::labeling::{Label, RuleSet, NUM_CLASSES};
use kinaug_core::skeleton::SkeletalModel;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Requested and obtained augmented examples per class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuotaSummary {
    pub requested: [usize; NUM_CLASSES],
    pub accepted: [usize; NUM_CLASSES],
    pub attempts: [u64; NUM_CLASSES],
}

/// Even split of `total` over classes, earlier classes taking the remainder.
pub fn even_quotas(total: usize) -> [usize; NUM_CLASSES] {
    let mut q = [total / NUM_CLASSES; NUM_CLASSES];
    for slot in q.iter_mut().take(total % NUM_CLASSES) {
        *slot += 1;
    }
    q
}

/// Indices ordered so consecutive entries cycle through subjects, each
/// subject's own entries shuffled.
fn interleave_by_subject<'a>(
    subjects: impl Iterator<Item = &'a str>,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, s) in subjects.enumerate() {
        groups.entry(s).or_default().push(i);
    }
    let mut lists: Vec<Vec<usize>> = groups.into_values().collect();
    for l in &mut lists {
        l.shuffle(rng);
    }
    let mut order = Vec::new();
    let longest = lists.iter().map(Vec::len).max().unwrap_or(0);
    for round in 0..longest {
        for l in &lists {
            if let Some(&i) = l.get(round) {
                order.push(i);
            }
        }
    }
    order
}

/// Generates augmented examples until every class quota is met or all
/// sources are exhausted for that class. Sources are visited round-robin
/// across subjects; each visit yields at most one accepted example and a
/// source is dropped for a class after `max_attempts` consecutive rejections.
pub fn generate_quota(
    sources: &[&Repetition],
    dists: &DistributionSet,
    model: &SkeletalModel,
    ruleset: &RuleSet,
    quotas: [usize; NUM_CLASSES],
    max_attempts: u32,
    seed: u64,
) -> kinaug_core::Result<(Vec<Repetition>, QuotaSummary)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = interleave_by_subject(sources.iter().map(|r| r.subject_id.as_str()), &mut rng);
    let mut out = Vec::new();
    let mut summary = QuotaSummary {
        requested: quotas,
        ..QuotaSummary::default()
    };
    for (c, &quota) in quotas.iter().enumerate() {
        let class = Label::from_index(c);
        let mut next_attempt = vec![0u32; sources.len()];
        let mut alive = vec![true; sources.len()];
        while summary.accepted[c] < quota && alive.iter().any(|&a| a) {
            for &s in &order {
                if summary.accepted[c] >= quota {
                    break;
                }
                if !alive[s] {
                    continue;
                }
                let src = sources[s];
                let mut failures = 0;
                loop {
                    let attempt = next_attempt[s];
                    next_attempt[s] += 1;
                    summary.attempts[c] += 1;
                    let cand_seed = candidate_seed(seed, &src.id, class, attempt);
                    match generate_candidate(src, class, dists, model, ruleset, cand_seed, attempt)?
                    {
                        CandidateOutcome::Accepted(rep) => {
                            out.push(*rep);
                            summary.accepted[c] += 1;
                            break;
                        }
                        CandidateOutcome::Rejected(_) => {
                            failures += 1;
                            if failures >= max_attempts {
                                alive[s] = false;
                                break;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok((out, summary))
}

/// Picks up to each class quota from a pre-generated pool, cycling through
/// subjects. Pool entries are grouped by their label.
pub fn select_from_pool<'a>(
    pool: &[&'a Repetition],
    quotas: [usize; NUM_CLASSES],
    seed: u64,
) -> (Vec<&'a Repetition>, QuotaSummary) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let mut summary = QuotaSummary {
        requested: quotas,
        ..QuotaSummary::default()
    };
    for (c, &quota) in quotas.iter().enumerate() {
        let members: Vec<&Repetition> = pool
            .iter()
            .copied()
            .filter(|r| r.label.index() == c)
            .collect();
        let order = interleave_by_subject(members.iter().map(|r| r.subject_id.as_str()), &mut rng);
        for &i in order.iter().take(quota) {
            out.push(members[i]);
        }
        summary.accepted[c] = quota.min(members.len());
    }
    (out, summary)
}
