//! Small convolutional classifier over quaternion input matrices.
//!
//! One valid-padded convolution (single input channel) with ReLU, two ReLU
//! dense layers and a softmax output. Dropout follows the convolution and each
//! hidden dense layer. Everything runs in `f64` on the CPU.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datasets::Matrix;
use crate::labeling::{ConfusionMatrix, Label, NUM_CLASSES};
use crate::{Error, Result};

mod checkpoint;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, write_history_csv, CHECKPOINT_VERSION};
pub use train::{
    evaluate, finetune, predict, train, EarlyStopping, EpochRecord, Evaluation, FinetuneConfig,
    TrainConfig,
};

/// One classifier example: input matrix and its label.
pub type Example = (Matrix, Label);

pub const CONV_W: usize = 0;
pub const CONV_B: usize = 1;
pub const DENSE1_W: usize = 2;
pub const DENSE1_B: usize = 3;
pub const DENSE2_W: usize = 4;
pub const DENSE2_B: usize = 5;
pub const OUT_W: usize = 6;
pub const OUT_B: usize = 7;
pub const TENSOR_NAMES: [&str; 8] = [
    "conv.w", "conv.b", "dense1.w", "dense1.b", "dense2.w", "dense2.b", "out.w", "out.b",
];
/// Tensors carrying the L2 penalty.
pub const KERNELS: [usize; 4] = [CONV_W, DENSE1_W, DENSE2_W, OUT_W];
/// Tensors updated by fine-tuning.
pub const DENSE_TENSORS: [usize; 6] = [DENSE1_W, DENSE1_B, DENSE2_W, DENSE2_B, OUT_W, OUT_B];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub filters: usize,
    pub kernel: usize,
    pub dropout: f64,
    pub dense1: usize,
    pub dense2: usize,
    pub classes: usize,
    pub l2: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            filters: 16,
            kernel: 5,
            dropout: 0.2,
            dense1: 512,
            dense2: 128,
            classes: NUM_CLASSES,
            l2: 1e-3,
        }
    }
}

impl ModelConfig {
    /// Same layer types with narrower layers, sized for CPU-only experiments.
    pub fn desk() -> Self {
        ModelConfig {
            filters: 8,
            dense1: 32,
            dense2: 16,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.filters == 0 || self.kernel == 0 || self.dense1 == 0 || self.dense2 == 0 {
            return Err(Error::Config(
                "layer widths and kernel size must be positive".into(),
            ));
        }
        if self.classes < 2 {
            return Err(Error::Config(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout
            )));
        }
        if !self.l2.is_finite() || self.l2 < 0.0 {
            return Err(Error::Config(format!(
                "L2 factor {} must be finite and >= 0",
                self.l2
            )));
        }
        Ok(())
    }

    /// Convolution output `(rows, cols)` for an input of the given shape.
    pub fn conv_output(&self, rows: usize, cols: usize) -> Result<(usize, usize)> {
        if rows < self.kernel || cols < self.kernel {
            return Err(Error::Config(format!(
                "{k}x{k} kernel does not fit a {rows}x{cols} input",
                k = self.kernel
            )));
        }
        Ok((rows - self.kernel + 1, cols - self.kernel + 1))
    }

    /// Element count of every tensor, in [`TENSOR_NAMES`] order.
    pub fn tensor_sizes(&self, rows: usize, cols: usize) -> Result<[usize; 8]> {
        self.validate()?;
        let (h, w) = self.conv_output(rows, cols)?;
        let flat = self.filters * h * w;
        Ok([
            self.filters * self.kernel * self.kernel,
            self.filters,
            self.dense1 * flat,
            self.dense1,
            self.dense2 * self.dense1,
            self.dense2,
            self.classes * self.dense2,
            self.classes,
        ])
    }

    pub fn parameter_count(&self, rows: usize, cols: usize) -> Result<usize> {
        Ok(self.tensor_sizes(rows, cols)?.iter().sum())
    }

    /// Glorot fan-in and fan-out of a kernel tensor.
    fn fans(&self, tensor: usize, flat: usize) -> (usize, usize) {
        let kk = self.kernel * self.kernel;
        match tensor {
            CONV_W => (kk, kk * self.filters),
            DENSE1_W => (flat, self.dense1),
            DENSE2_W => (self.dense1, self.dense2),
            OUT_W => (self.dense2, self.classes),
            _ => unreachable!("not a kernel"),
        }
    }

    /// Glorot-uniform bound `sqrt(6 / (fan_in + fan_out))` of a kernel tensor.
    pub fn glorot_limit(&self, tensor: usize, rows: usize, cols: usize) -> Result<f64> {
        let (h, w) = self.conv_output(rows, cols)?;
        let (fi, fo) = self.fans(tensor, self.filters * h * w);
        Ok((6.0 / (fi + fo) as f64).sqrt())
    }
}

/// Weights, configuration and training history.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub input_rows: usize,
    pub input_cols: usize,
    pub tensors: Vec<Vec<f64>>,
    pub history: Vec<EpochRecord>,
    /// Epoch whose weights were kept, if trained.
    pub best_epoch: Option<usize>,
}

pub fn init_model(cfg: &ModelConfig, rows: usize, cols: usize, seed: u64) -> Result<ModelState> {
    let sizes = cfg.tensor_sizes(rows, cols)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = Vec::with_capacity(sizes.len());
    for (t, &n) in sizes.iter().enumerate() {
        if KERNELS.contains(&t) {
            let limit = cfg.glorot_limit(t, rows, cols)?;
            tensors.push((0..n).map(|_| rng.random_range(-limit..limit)).collect());
        } else {
            tensors.push(vec![0.0; n]);
        }
    }
    Ok(ModelState {
        config: cfg.clone(),
        input_rows: rows,
        input_cols: cols,
        tensors,
        history: Vec::new(),
        best_epoch: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Activations of one example kept for backpropagation.
struct Trace {
    conv: Vec<f64>,
    conv_mask: Option<Vec<f64>>,
    h1: Vec<f64>,
    h1_mask: Option<Vec<f64>>,
    h2: Vec<f64>,
    h2_mask: Option<Vec<f64>>,
    probs: Vec<f64>,
}

fn dropout_mask(n: usize, rate: f64, rng: &mut impl Rng) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

fn apply_mask(x: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => x.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => x.to_vec(),
    }
}

fn dense_relu(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * x.len()..(r + 1) * x.len()];
            (bias + dot(row, x)).max(0.0)
        })
        .collect()
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 4];
    let (ac, bc) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ac
        .remainder()
        .iter()
        .zip(bc.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ac.zip(bc) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl ModelState {
    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.rows != self.input_rows || x.cols != self.input_cols || x.data.len() != x.rows * x.cols
        {
            return Err(Error::InvalidArgument(format!(
                "input is {}x{}, model expects {}x{}",
                x.rows, x.cols, self.input_rows, self.input_cols
            )));
        }
        Ok(())
    }

    fn trace(&self, x: &Matrix, mode: Mode, rng: &mut impl Rng) -> Trace {
        let cfg = &self.config;
        let t = &self.tensors;
        let k = cfg.kernel;
        let (h, w) = (x.rows - k + 1, x.cols - k + 1);
        let mut conv = vec![0.0; cfg.filters * h * w];
        for f in 0..cfg.filters {
            let kern = &t[CONV_W][f * k * k..(f + 1) * k * k];
            let out = &mut conv[f * h * w..(f + 1) * h * w];
            out.fill(t[CONV_B][f]);
            for a in 0..k {
                for b in 0..k {
                    let kv = kern[a * k + b];
                    for i in 0..h {
                        let start = (i + a) * x.cols + b;
                        let xr = &x.data[start..start + w];
                        for (o, &xv) in out[i * w..(i + 1) * w].iter_mut().zip(xr) {
                            *o += kv * xv;
                        }
                    }
                }
            }
            out.iter_mut().for_each(|v| *v = v.max(0.0));
        }
        let train = mode == Mode::Train && cfg.dropout > 0.0;
        let mut mask = |n: usize| train.then(|| dropout_mask(n, cfg.dropout, rng));
        let conv_mask = mask(conv.len());
        let h1 = dense_relu(&t[DENSE1_W], &t[DENSE1_B], &apply_mask(&conv, &conv_mask));
        let h1_mask = mask(h1.len());
        let h2 = dense_relu(&t[DENSE2_W], &t[DENSE2_B], &apply_mask(&h1, &h1_mask));
        let h2_mask = mask(h2.len());
        let a2 = apply_mask(&h2, &h2_mask);
        let logits: Vec<f64> = (0..cfg.classes)
            .map(|c| t[OUT_B][c] + dot(&t[OUT_W][c * a2.len()..(c + 1) * a2.len()], &a2))
            .collect();
        Trace {
            conv,
            conv_mask,
            h1,
            h1_mask,
            h2,
            h2_mask,
            probs: softmax(&logits),
        }
    }

    /// Adds the gradient of `-ln p[label]` for one example into `grads`.
    fn backprop(&self, x: &Matrix, tr: &Trace, label: usize, grads: &mut [Vec<f64>]) {
        let cfg = &self.config;
        let t = &self.tensors;

        let mut g_logits = tr.probs.clone();
        g_logits[label] -= 1.0;

        let a2 = apply_mask(&tr.h2, &tr.h2_mask);
        let mut g_a2 = vec![0.0; a2.len()];
        for (c, &g) in g_logits.iter().enumerate() {
            grads[OUT_B][c] += g;
            let row = c * a2.len();
            for (j, &a) in a2.iter().enumerate() {
                grads[OUT_W][row + j] += g * a;
                g_a2[j] += g * t[OUT_W][row + j];
            }
        }
        let g_z2 = relu_back(&g_a2, &tr.h2, &tr.h2_mask);

        let a1 = apply_mask(&tr.h1, &tr.h1_mask);
        let g_a1 = dense_back(&t[DENSE2_W], &g_z2, &a1, &mut grads[DENSE2_W..=DENSE2_B]);
        let g_z1 = relu_back(&g_a1, &tr.h1, &tr.h1_mask);

        let a0 = apply_mask(&tr.conv, &tr.conv_mask);
        let g_a0 = dense_back(&t[DENSE1_W], &g_z1, &a0, &mut grads[DENSE1_W..=DENSE1_B]);
        let g_z0 = relu_back(&g_a0, &tr.conv, &tr.conv_mask);

        let k = cfg.kernel;
        let (h, w) = (x.rows - k + 1, x.cols - k + 1);
        for f in 0..cfg.filters {
            let gz = &g_z0[f * h * w..(f + 1) * h * w];
            let gk = &mut grads[CONV_W][f * k * k..(f + 1) * k * k];
            for a in 0..k {
                for b in 0..k {
                    let mut s = 0.0;
                    for i in 0..h {
                        let start = (i + a) * x.cols + b;
                        s += dot(&gz[i * w..(i + 1) * w], &x.data[start..start + w]);
                    }
                    gk[a * k + b] += s;
                }
            }
            grads[CONV_B][f] += gz.iter().sum::<f64>();
        }
    }
}

/// Gradient through `a = relu(z) * mask`, given `h = relu(z)`.
fn relu_back(g_a: &[f64], h: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    g_a.iter()
        .enumerate()
        .map(|(i, &g)| {
            if h[i] <= 0.0 {
                0.0
            } else {
                mask.as_ref().map_or(g, |m| g * m[i])
            }
        })
        .collect()
}

/// Accumulates weight and bias gradients of `z = W x + b`; returns `dL/dx`.
fn dense_back(w: &[f64], g_z: &[f64], x: &[f64], grads: &mut [Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut g_x = vec![0.0; n];
    let (gw, gb) = grads.split_at_mut(1);
    for (r, &g) in g_z.iter().enumerate() {
        if g == 0.0 {
            continue;
        }
        gb[0][r] += g;
        let row = &w[r * n..(r + 1) * n];
        let grow = &mut gw[0][r * n..(r + 1) * n];
        for j in 0..n {
            grow[j] += g * x[j];
        }
        for j in 0..n {
            g_x[j] += g * row[j];
        }
    }
    g_x
}

/// Class probabilities, one row per input. `rng` drives dropout in train mode.
pub fn forward(
    model: &ModelState,
    batch: &[Matrix],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<f64>>> {
    batch
        .iter()
        .map(|x| {
            model.check_input(x)?;
            Ok(model.trace(x, mode, rng).probs)
        })
        .collect()
}

fn check_label(model: &ModelState, label: Label) -> Result<usize> {
    let i = label.index();
    if i >= model.config.classes {
        return Err(Error::InvalidArgument(format!(
            "label {label} outside the model's {} classes",
            model.config.classes
        )));
    }
    Ok(i)
}

/// L2 penalty `l2 * sum(w^2)` over the kernels.
pub fn l2_penalty(model: &ModelState) -> f64 {
    model.config.l2
        * KERNELS
            .iter()
            .map(|&t| model.tensors[t].iter().map(|w| w * w).sum::<f64>())
            .sum::<f64>()
}

/// Mean cross-entropy plus L2 penalty, and its gradient for every tensor.
pub fn loss_and_grads(
    model: &ModelState,
    batch: &[Example],
    mode: Mode,
    rng: &mut impl Rng,
) -> Result<(f64, Vec<Vec<f64>>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grads: Vec<Vec<f64>> = model.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
    let mut ce = 0.0;
    for (x, label) in batch {
        model.check_input(x)?;
        let c = check_label(model, *label)?;
        let tr = model.trace(x, mode, rng);
        ce -= tr.probs[c].max(f64::MIN_POSITIVE).ln();
        model.backprop(x, &tr, c, &mut grads);
    }
    let n = batch.len() as f64;
    for g in grads.iter_mut() {
        g.iter_mut().for_each(|v| *v /= n);
    }
    let l2 = model.config.l2;
    for &t in &KERNELS {
        for (g, w) in grads[t].iter_mut().zip(&model.tensors[t]) {
            *g += 2.0 * l2 * w;
        }
    }
    Ok((ce / n + l2_penalty(model), grads))
}

/// Eval-mode mean cross-entropy plus L2 penalty, with the confusion matrix.
pub(crate) fn eval_loss(model: &ModelState, set: &[Example]) -> Result<(f64, ConfusionMatrix)> {
    let mut cm = ConfusionMatrix::new(model.config.classes);
    let mut ce = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for (x, label) in set {
        model.check_input(x)?;
        let c = check_label(model, *label)?;
        let probs = model.trace(x, Mode::Eval, &mut rng).probs;
        ce -= probs[c].max(f64::MIN_POSITIVE).ln();
        cm.add(c, argmax(&probs));
    }
    Ok((ce / set.len().max(1) as f64 + l2_penalty(model), cm))
}

/// First index of the largest entry.
pub(crate) fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}
