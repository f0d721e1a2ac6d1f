//! Rule-based exercise grading.
//!
//! A [`RuleSet`] evaluates threshold criteria on repetition-level metric
//! aggregates and maps the outcome vector to a label through an ordered
//! decision table (first matching rule wins, with a mandatory default).

mod confusion;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::skeleton::KinematicMetrics;
use crate::{Error, Result};

pub use confusion::{gm_f1, ConfusionMatrix};
pub use search::{optimize_thresholds, OptimizationResult, DEFAULT_SEARCH_BUDGET};

pub const RULESET_SCHEMA_VERSION: u32 = 1;
pub const NUM_CLASSES: usize = 3;

/// Exercise quality label, 1 (poor) to 3 (flawless).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct Label(u8);

impl Label {
    pub const ALL: [Label; NUM_CLASSES] = [Label(1), Label(2), Label(3)];

    pub fn new(value: u8) -> Result<Self> {
        if (1..=NUM_CLASSES as u8).contains(&value) {
            Ok(Label(value))
        } else {
            Err(Error::InvalidArgument(format!(
                "label {value} outside 1..={NUM_CLASSES}"
            )))
        }
    }

    pub fn from_index(index: usize) -> Self {
        assert!(index < NUM_CLASSES, "class index {index} out of range");
        Label(index as u8 + 1)
    }

    pub fn value(self) -> u8 {
        self.0
    }

    /// Zero-based class index.
    pub fn index(self) -> usize {
        self.0 as usize - 1
    }
}

impl TryFrom<u8> for Label {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Label::new(v)
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        l.0
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateSelector {
    Min,
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<=")]
    AtMost,
}

impl Comparator {
    /// Inclusive comparison.
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparator::AtLeast => value >= threshold,
            Comparator::AtMost => value <= threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub id: String,
    pub metric: String,
    pub aggregate: AggregateSelector,
    pub comparator: Comparator,
    pub threshold: f64,
    #[serde(default)]
    pub description: String,
}

impl Criterion {
    pub fn value(&self, metrics: &KinematicMetrics) -> Result<f64> {
        let agg = metrics.aggregate(&self.metric).ok_or_else(|| {
            Error::Config(format!(
                "criterion {} needs metric {}, which was not extracted",
                self.id, self.metric
            ))
        })?;
        Ok(match self.aggregate {
            AggregateSelector::Min => agg.min,
            AggregateSelector::Max => agg.max,
            AggregateSelector::Mean => agg.mean,
        })
    }
}

/// One row of the decision table: matches when every listed criterion has
/// the required outcome (true = fulfilled).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRule {
    #[serde(default)]
    pub when: BTreeMap<String, bool>,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub schema_version: u32,
    pub exercise_id: String,
    pub criteria: Vec<Criterion>,
    pub rules: Vec<DecisionRule>,
    /// Label when no rule matches.
    pub default_label: Label,
    /// Threshold search range per criterion id; criteria without an entry use
    /// the observed range of their aggregate.
    #[serde(default)]
    pub search_ranges: BTreeMap<String, [f64; 2]>,
}

/// Result of grading one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub label: Label,
    /// Fulfillment of each criterion, in rule-set order.
    pub outcomes: Vec<bool>,
}

/// Decision table compiled to bit masks over criterion indices.
#[derive(Debug, Clone)]
pub(crate) struct CompiledRules {
    rules: Vec<(u64, u64, Label)>,
    default_label: Label,
}

impl CompiledRules {
    #[inline]
    pub(crate) fn decide(&self, outcomes: u64) -> Label {
        self.rules
            .iter()
            .find(|(mask, want, _)| outcomes & mask == *want)
            .map(|r| r.2)
            .unwrap_or(self.default_label)
    }
}

impl RuleSet {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != RULESET_SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "rule set schema version {} not supported (expected {RULESET_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.criteria.len() > 64 {
            return Err(Error::Config("at most 64 criteria are supported".into()));
        }
        for (i, c) in self.criteria.iter().enumerate() {
            if self.criteria[..i].iter().any(|o| o.id == c.id) {
                return Err(Error::Config(format!("duplicate criterion {}", c.id)));
            }
            if !c.threshold.is_finite() {
                return Err(Error::Config(format!(
                    "criterion {} threshold is not finite",
                    c.id
                )));
            }
        }
        for (id, [lo, hi]) in &self.search_ranges {
            if self.criterion_index(id).is_none() {
                return Err(Error::Config(format!(
                    "search range for unknown criterion {id}"
                )));
            }
            if !(lo <= hi) {
                return Err(Error::Config(format!("search range for {id} has lo > hi")));
            }
        }
        self.compile().map(|_| ())
    }

    pub fn criterion_index(&self, id: &str) -> Option<usize> {
        self.criteria.iter().position(|c| c.id == id)
    }

    pub(crate) fn compile(&self) -> Result<CompiledRules> {
        let mut rules = Vec::with_capacity(self.rules.len());
        for r in &self.rules {
            let (mut mask, mut want) = (0u64, 0u64);
            for (id, &required) in &r.when {
                let i = self.criterion_index(id).ok_or_else(|| {
                    Error::Config(format!("decision rule references unknown criterion {id}"))
                })?;
                mask |= 1 << i;
                if required {
                    want |= 1 << i;
                }
            }
            rules.push((mask, want, r.label));
        }
        Ok(CompiledRules {
            rules,
            default_label: self.default_label,
        })
    }

    pub fn thresholds(&self) -> BTreeMap<String, f64> {
        self.criteria
            .iter()
            .map(|c| (c.id.clone(), c.threshold))
            .collect()
    }

    /// Copy with thresholds replaced; ids not present are left unchanged.
    pub fn with_thresholds(&self, thresholds: &BTreeMap<String, f64>) -> RuleSet {
        let mut out = self.clone();
        for c in &mut out.criteria {
            if let Some(&t) = thresholds.get(&c.id) {
                c.threshold = t;
            }
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rs: RuleSet =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("rule set: {e}")))?;
        rs.validate()?;
        Ok(rs)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let rs: RuleSet = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        rs.validate()?;
        Ok(rs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("rule set serializes");
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// Deep-squat style grading for the 15-segment model.
    pub fn deep_squat() -> Self {
        Self::from_json(include_str!("../../rulesets/deep_squat.json"))
            .expect("bundled deep squat rule set is valid")
    }

    /// Leg-raise grading with foot-drop and weight-shift error patterns for
    /// the 9-segment model.
    pub fn foot_drop() -> Self {
        Self::from_json(include_str!("../../rulesets/foot_drop.json"))
            .expect("bundled foot drop rule set is valid")
    }

    /// Names of the metrics the criteria read.
    pub fn required_metrics(&self) -> Vec<&str> {
        let mut m: Vec<&str> = self.criteria.iter().map(|c| c.metric.as_str()).collect();
        m.sort_unstable();
        m.dedup();
        m
    }
}

pub fn assign_label(metrics: &KinematicMetrics, ruleset: &RuleSet) -> Result<Assignment> {
    let compiled = ruleset.compile()?;
    let mut bits = 0u64;
    let mut outcomes = Vec::with_capacity(ruleset.criteria.len());
    for (i, c) in ruleset.criteria.iter().enumerate() {
        let ok = c.comparator.holds(c.value(metrics)?, c.threshold);
        if ok {
            bits |= 1 << i;
        }
        outcomes.push(ok);
    }
    Ok(Assignment {
        label: compiled.decide(bits),
        outcomes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelerEvaluation {
    pub confusion: ConfusionMatrix,
    pub gm_f1: f64,
    pub per_class_f1: Vec<f64>,
}

/// Grades every repetition and compares against the expert labels.
pub fn evaluate_labeler(
    ruleset: &RuleSet,
    reps: &[(KinematicMetrics, Label)],
) -> Result<LabelerEvaluation> {
    let mut cm = ConfusionMatrix::new(NUM_CLASSES);
    for (metrics, truth) in reps {
        let assigned = assign_label(metrics, ruleset)?.label;
        cm.add(truth.index(), assigned.index());
    }
    Ok(LabelerEvaluation {
        gm_f1: gm_f1(&cm)?,
        per_class_f1: cm.per_class_f1(),
        confusion: cm,
    })
}

#[cfg(test)]
mod tests;
