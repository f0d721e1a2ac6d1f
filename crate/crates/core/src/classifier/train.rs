use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, eval_loss, forward, loss_and_grads, Example, Mode, ModelState, DENSE_TENSORS};
use crate::datasets::Matrix;
use crate::labeling::{ConfusionMatrix, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 32,
            patience: 10,
            max_epochs: 200,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Larger step and epoch cap for the narrow desk-scale network.
    pub fn desk() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            patience: 20,
            max_epochs: 150,
            ..TrainConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.patience == 0 || self.max_epochs == 0 {
            return Err(Error::Config(
                "batch size, patience and max epochs must be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Slanted triangular schedule over dense layers only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinetuneConfig {
    pub start_lr: f64,
    pub peak_lr: f64,
    pub end_lr: f64,
    pub peak_epoch: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            start_lr: 2e-5,
            peak_lr: 1e-4,
            end_lr: 1e-6,
            peak_epoch: 5,
            epochs: 20,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    /// The default schedule scaled to match [`TrainConfig::desk`].
    pub fn desk() -> Self {
        FinetuneConfig {
            start_lr: 2e-4,
            peak_lr: 1e-3,
            end_lr: 1e-5,
            ..FinetuneConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.peak_epoch >= self.epochs {
            return Err(Error::Config(format!(
                "peak epoch {} must precede the last epoch {}",
                self.peak_epoch, self.epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }

    /// Linear rise from `start_lr` to `peak_lr` at `peak_epoch`, then linear
    /// decay reaching `end_lr` at `epochs`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        let e = epoch.min(self.epochs) as f64;
        let p = self.peak_epoch as f64;
        if e <= p {
            if self.peak_epoch == 0 {
                return self.peak_lr;
            }
            self.start_lr + (self.peak_lr - self.start_lr) * e / p
        } else {
            self.peak_lr + (self.end_lr - self.peak_lr) * (e - p) / (self.epochs as f64 - p)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

/// Stops once the monitored loss has not improved for `patience` epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            stale: 0,
        }
    }

    /// Records one epoch's loss; true when training should stop.
    pub fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        self.stale >= self.patience
    }
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
}

impl Adam {
    fn new(model: &ModelState, beta1: f64, beta2: f64, epsilon: f64) -> Self {
        let zeros: Vec<Vec<f64>> = model.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            m: zeros.clone(),
            v: zeros,
            t: 0,
            beta1,
            beta2,
            epsilon,
        }
    }

    fn step(&mut self, tensors: &mut [Vec<f64>], grads: &[Vec<f64>], lr: f64, which: &[usize]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for &k in which {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, w) in tensors[k].iter_mut().enumerate() {
                let g = grads[k][i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                *w -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.epsilon);
            }
        }
    }
}

fn check_sets(train: &[Example], val: &[Example]) -> Result<()> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument(
            "training and validation sets must be nonempty".into(),
        ));
    }
    Ok(())
}

/// One pass over `set` in seeded-shuffled mini-batches; returns the mean
/// training loss.
fn run_epoch(
    model: &mut ModelState,
    adam: &mut Adam,
    set: &[Example],
    batch_size: usize,
    lr: f64,
    which: &[usize],
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..set.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for chunk in order.chunks(batch_size) {
        let batch: Vec<Example> = chunk.iter().map(|&i| set[i].clone()).collect();
        let (loss, grads) = loss_and_grads(model, &batch, Mode::Train, rng)?;
        adam.step(&mut model.tensors, &grads, lr, which);
        total += loss * chunk.len() as f64;
    }
    Ok(total / set.len() as f64)
}

/// Adam training with early stopping on validation loss; keeps the weights
/// of the epoch with the highest validation macro F1.
pub fn train(
    model: &ModelState,
    train_set: &[Example],
    val_set: &[Example],
    cfg: &TrainConfig,
) -> Result<ModelState> {
    cfg.validate()?;
    check_sets(train_set, val_set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    current.history.clear();
    let mut adam = Adam::new(&current, cfg.beta1, cfg.beta2, cfg.epsilon);
    let all: Vec<usize> = (0..current.tensors.len()).collect();
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best: Option<(f64, usize, Vec<Vec<f64>>)> = None;
    let mut history = Vec::new();
    for epoch in 1..=cfg.max_epochs {
        let train_loss = run_epoch(
            &mut current,
            &mut adam,
            train_set,
            cfg.batch_size,
            cfg.learning_rate,
            &all,
            &mut rng,
        )?;
        let (val_loss, cm) = eval_loss(&current, val_set)?;
        let f1 = cm.macro_f1();
        history.push(EpochRecord {
            epoch,
            learning_rate: cfg.learning_rate,
            train_loss,
            val_loss,
            val_macro_f1: f1,
        });
        if best.as_ref().is_none_or(|(b, _, _)| f1 > *b) {
            best = Some((f1, epoch, current.tensors.clone()));
        }
        if stopper.observe(val_loss) {
            break;
        }
    }
    let (_, epoch, tensors) = best.expect("at least one epoch");
    current.tensors = tensors;
    current.best_epoch = Some(epoch);
    current.history = history;
    Ok(current)
}

/// Dense-layer fine-tuning for `cfg.epochs` epochs on the slanted triangular
/// schedule; returns the final weights. `val_set` only feeds the history.
pub fn finetune(
    model: &ModelState,
    tune_set: &[Example],
    val_set: &[Example],
    cfg: &FinetuneConfig,
) -> Result<ModelState> {
    cfg.validate()?;
    check_sets(tune_set, val_set)?;
    let defaults = TrainConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = model.clone();
    let mut adam = Adam::new(&current, defaults.beta1, defaults.beta2, defaults.epsilon);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let train_loss = run_epoch(
            &mut current,
            &mut adam,
            tune_set,
            cfg.batch_size,
            lr,
            &DENSE_TENSORS,
            &mut rng,
        )?;
        let (val_loss, cm) = eval_loss(&current, val_set)?;
        current.history.push(EpochRecord {
            epoch: model.history.len() + epoch + 1,
            learning_rate: lr,
            train_loss,
            val_loss,
            val_macro_f1: cm.macro_f1(),
        });
    }
    Ok(current)
}

pub fn predict(model: &ModelState, inputs: &[Matrix]) -> Result<Vec<Label>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(forward(model, inputs, Mode::Eval, &mut rng)?
        .iter()
        .map(|p| Label::from_index(argmax(p)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub per_class_f1: Vec<f64>,
    pub macro_f1: f64,
}

impl Evaluation {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Self {
        Evaluation {
            per_class_f1: confusion.per_class_f1(),
            macro_f1: confusion.macro_f1(),
            confusion,
        }
    }
}

/// Argmax predictions scored against the labels.
pub fn evaluate(model: &ModelState, test_set: &[Example]) -> Result<Evaluation> {
    if test_set.is_empty() {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let (_, cm) = eval_loss(model, test_set)?;
    Ok(Evaluation::from_confusion(cm))
}
