use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{augment_trajectory, sample_params, AugmentationParams, DistributionSet};
use crate::datasets::{Repetition, RepetitionSource};
use crate::labeling::{assign_label, Label, RuleSet, NUM_CLASSES};
use crate::skeleton::{export_consistent_orientations, extract_metrics, run_ik, SkeletalModel};
use crate::{Error, Result};

pub const DEFAULT_MAX_ATTEMPTS: u32 = 50;

/// Where an augmented repetition came from and how it was made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub intended_class: Label,
    pub assigned_label: Label,
    pub seed: u64,
    pub attempt: u32,
    pub params: AugmentationParams,
    pub ik_mean_residual: f64,
    pub ik_max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub source_id: String,
    pub intended_class: Label,
    pub assigned_label: Label,
    pub seed: u64,
    pub attempt: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CandidateOutcome {
    Accepted(Box<Repetition>),
    Rejected(Rejection),
}

/// Deterministic per-candidate seed.
pub fn candidate_seed(master: u64, source_id: &str, class: Label, attempt: u32) -> u64 {
    mix_key(&[
        &master.to_le_bytes(),
        source_id.as_bytes(),
        &[0xff, class.value()],
        &attempt.to_le_bytes(),
    ])
}

/// Deterministic sub-seed for a named stage (fold, split, selection).
pub fn derive_seed(master: u64, key: &str) -> u64 {
    mix_key(&[&master.to_le_bytes(), &[0xfe], key.as_bytes()])
}

/// FNV-1a over the concatenated parts, then a splitmix64 finalizer.
fn mix_key(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in parts.iter().flat_map(|p| p.iter()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Samples parameters for `target`, augments every segment, projects through
/// inverse kinematics and grades the result. Accepted only if the assigned
/// label equals `target`.
pub fn generate_candidate(
    source: &Repetition,
    target: Label,
    dists: &DistributionSet,
    model: &SkeletalModel,
    ruleset: &RuleSet,
    seed: u64,
    attempt: u32,
) -> Result<CandidateOutcome> {
    let dist = dists.get(&source.exercise_id, target).ok_or_else(|| {
        Error::Config(format!(
            "no augmentation distribution for exercise {} class {target}",
            source.exercise_id
        ))
    })?;
    for seg in source.segment_ids() {
        if !dist.segments.contains_key(seg) {
            return Err(Error::Config(format!(
                "distribution {}/{target} lacks segment {seg}",
                source.exercise_id
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = sample_params(dist, &mut rng);
    params
        .segments
        .retain(|seg, _| source.trajectory(seg).is_some());

    let augmented = source
        .trajectories()
        .iter()
        .map(|t| Ok(augment_trajectory(t, &params.segments[t.segment_id()])?.trajectory))
        .collect::<Result<Vec<_>>>()?;
    let track = run_ik(model, &augmented)?;
    let exported = export_consistent_orientations(model, &track.poses, track.sample_rate)?;
    let metrics = extract_metrics(model, &track.poses, model.metrics())?;
    let assigned = assign_label(&metrics, ruleset)?.label;
    if assigned != target {
        return Ok(CandidateOutcome::Rejected(Rejection {
            source_id: source.id.clone(),
            intended_class: target,
            assigned_label: assigned,
            seed,
            attempt,
        }));
    }
    let trajectories = source
        .segment_ids()
        .map(|seg| {
            exported
                .iter()
                .find(|t| t.segment_id() == seg)
                .cloned()
                .ok_or_else(|| Error::Config(format!("model {} lacks segment {seg}", model.name())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep = Repetition::new(
        format!("{}~c{}~a{}", source.id, target, attempt),
        source.subject_id.clone(),
        source.exercise_id.clone(),
        target,
        trajectories,
    )?;
    rep.source = RepetitionSource::Augmented;
    rep.provenance = Some(Provenance {
        source_id: source.id.clone(),
        intended_class: target,
        assigned_label: assigned,
        seed,
        attempt,
        params,
        ik_mean_residual: track.mean_residual(),
        ik_max_residual: track.max_residual(),
    });
    Ok(CandidateOutcome::Accepted(Box::new(rep)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    pub per_class_count: usize,
    pub max_attempts: u32,
    pub master_seed: u64,
    /// Classes to generate; all classes when empty.
    #[serde(default)]
    pub classes: Vec<Label>,
}

impl GenerationConfig {
    pub fn new(per_class_count: usize, master_seed: u64) -> Self {
        GenerationConfig {
            per_class_count,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
            master_seed,
            classes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub source_id: String,
    pub class: Label,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: u32,
    /// Rejections by the label the rule set assigned instead.
    pub rejected_as: [usize; NUM_CLASSES],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: Label,
    pub requested: usize,
    pub accepted: usize,
    pub attempts: u64,
    pub acceptance_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub master_seed: u64,
    pub per_class_count: usize,
    pub max_attempts: u32,
    pub pairs: Vec<PairReport>,
    pub classes: Vec<ClassSummary>,
    /// (source, class) pairs without a single accepted candidate.
    pub unreachable: Vec<(String, Label)>,
    pub accepted: usize,
    pub shortfall: usize,
}

/// For every source and class, generates up to `per_class_count` accepted
/// candidates, giving each slot at most `max_attempts` tries. A pair stops at
/// its first exhausted slot. Missing distributions mark a pair unreachable.
pub fn generate_set(
    sources: &[Repetition],
    dists: &DistributionSet,
    model: &SkeletalModel,
    ruleset: &RuleSet,
    cfg: &GenerationConfig,
) -> Result<(Vec<Repetition>, GenerationReport)> {
    if cfg.per_class_count == 0 {
        return Err(Error::InvalidArgument(
            "per-class count must be at least 1".into(),
        ));
    }
    if cfg.max_attempts == 0 {
        return Err(Error::InvalidArgument(
            "max attempts must be at least 1".into(),
        ));
    }
    let classes: Vec<Label> = if cfg.classes.is_empty() {
        Label::ALL.to_vec()
    } else {
        cfg.classes.clone()
    };
    let mut out = Vec::new();
    let mut pairs = Vec::new();
    for source in sources {
        for &class in &classes {
            let mut pair = PairReport {
                source_id: source.id.clone(),
                class,
                requested: cfg.per_class_count,
                accepted: 0,
                attempts: 0,
                rejected_as: [0; NUM_CLASSES],
                error: None,
            };
            let mut attempt = 0u32;
            'slots: for _ in 0..cfg.per_class_count {
                for _ in 0..cfg.max_attempts {
                    let seed = candidate_seed(cfg.master_seed, &source.id, class, attempt);
                    let outcome =
                        generate_candidate(source, class, dists, model, ruleset, seed, attempt);
                    attempt += 1;
                    pair.attempts = attempt;
                    match outcome {
                        Ok(CandidateOutcome::Accepted(rep)) => {
                            pair.accepted += 1;
                            out.push(*rep);
                            continue 'slots;
                        }
                        Ok(CandidateOutcome::Rejected(r)) => {
                            pair.rejected_as[r.assigned_label.index()] += 1;
                        }
                        Err(Error::Config(msg)) => {
                            pair.error = Some(msg);
                            break 'slots;
                        }
                        Err(e) => return Err(e),
                    }
                }
                break;
            }
            pairs.push(pair);
        }
    }
    let summaries = classes
        .iter()
        .map(|&class| {
            let of_class = pairs.iter().filter(|p| p.class == class);
            let requested = of_class.clone().map(|p| p.requested).sum();
            let accepted = of_class.clone().map(|p| p.accepted).sum();
            let attempts: u64 = of_class.map(|p| u64::from(p.attempts)).sum();
            ClassSummary {
                class,
                requested,
                accepted,
                attempts,
                acceptance_rate: if attempts == 0 {
                    0.0
                } else {
                    accepted as f64 / attempts as f64
                },
            }
        })
        .collect::<Vec<_>>();
    let unreachable = pairs
        .iter()
        .filter(|p| p.accepted == 0)
        .map(|p| (p.source_id.clone(), p.class))
        .collect();
    let accepted = out.len();
    let requested: usize = pairs.iter().map(|p| p.requested).sum();
    let report = GenerationReport {
        master_seed: cfg.master_seed,
        per_class_count: cfg.per_class_count,
        max_attempts: cfg.max_attempts,
        pairs,
        classes: summaries,
        unreachable,
        accepted,
        shortfall: requested - accepted,
    };
    Ok((out, report))
}
