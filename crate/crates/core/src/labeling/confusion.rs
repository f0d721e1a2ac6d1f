use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Square confusion matrix; rows are true classes, columns assigned classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(n: usize) -> Self {
        ConfusionMatrix {
            n,
            counts: vec![0; n * n],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidArgument(
                "confusion matrix must be square".into(),
            ));
        }
        Ok(ConfusionMatrix {
            n,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.n
    }

    pub fn clear(&mut self) {
        self.counts.fill(0);
    }

    pub fn add(&mut self, truth: usize, assigned: usize) {
        self.counts[truth * self.n + assigned] += 1;
    }

    pub fn get(&self, truth: usize, assigned: usize) -> u64 {
        self.counts[truth * self.n + assigned]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.n.max(1))
            .map(<[u64]>::to_vec)
            .collect()
    }

    pub fn accuracy(&self) -> f64 {
        let diag: u64 = (0..self.n).map(|i| self.get(i, i)).sum();
        diag as f64 / self.total().max(1) as f64
    }

    /// One-vs-rest F1 per class. A class that is neither present nor
    /// predicted scores 1.
    pub fn per_class_f1(&self) -> Vec<f64> {
        (0..self.n)
            .map(|c| {
                let tp = self.get(c, c);
                let true_total: u64 = (0..self.n).map(|j| self.get(c, j)).sum();
                let pred_total: u64 = (0..self.n).map(|i| self.get(i, c)).sum();
                let denom = true_total + pred_total;
                if denom == 0 {
                    1.0
                } else {
                    2.0 * tp as f64 / denom as f64
                }
            })
            .collect()
    }

    /// Classes that occur either in the truth or in the assignments.
    pub fn present_classes(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&c| (0..self.n).any(|j| self.get(c, j) > 0 || self.get(j, c) > 0))
            .collect()
    }

    /// Unweighted mean F1 over the classes present in truth or assignments.
    pub fn macro_f1(&self) -> f64 {
        let f1 = self.per_class_f1();
        let present = self.present_classes();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().map(|&c| f1[c]).sum::<f64>() / present.len() as f64
    }
}

/// Geometric mean of the per-class F1 scores.
pub fn gm_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.classes() == 0 {
        return Err(Error::InvalidArgument("empty confusion matrix".into()));
    }
    let f1 = cm.per_class_f1();
    if f1.contains(&0.0) {
        return Ok(0.0);
    }
    let log_mean = f1.iter().map(|f| f.ln()).sum::<f64>() / f1.len() as f64;
    Ok(log_mean.exp())
}
