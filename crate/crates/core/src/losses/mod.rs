//! Segmentation objectives on foreground probabilities, the causal LM loss,
//! their weighted combination, schedules, and a finite-difference checker.
//!
//! Every segmentation loss comes in a `*_with_grad` form returning the
//! analytic gradient with respect to the foreground probabilities, laid out
//! like [`SegBatch::probs`].

mod gradcheck;
mod objective;
mod schedule;

pub use gradcheck::{grad_check, GradCheckReport};
pub(crate) use objective::binary_foreground;
pub use objective::{joint_objective, JointOutput, LossBreakdown};
pub use schedule::{lr_schedule, weight_schedule};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default smoothing / log-clamp constant.
pub const EPSILON: f64 = 1e-6;

/// Background-to-foreground frame ratio of the benchmark training split, used
/// as the default BCE positive weight.
pub const DEFAULT_POS_WEIGHT: f64 = 2.3378;

/// Tversky false-negative weight.
pub const DEFAULT_BETA: f64 = 0.7;

/// Foreground probabilities and binary labels for `batch × frames` frames,
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SegBatch {
    pub probs: Vec<f64>,
    pub labels: Vec<f64>,
    pub batch: usize,
    pub frames: usize,
}

impl SegBatch {
    pub fn new(probs: Vec<f64>, labels: Vec<f64>, batch: usize, frames: usize) -> Result<Self> {
        let n = batch * frames;
        if probs.len() != n || labels.len() != n {
            return Err(Error::invalid(format!(
                "seg batch shape mismatch: {} probs, {} labels, expected {batch}x{frames}",
                probs.len(),
                labels.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        if let Some(y) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid(format!("label {y} is not binary")));
        }
        Ok(Self {
            probs,
            labels,
            batch,
            frames,
        })
    }

    /// Single-row batch.
    pub fn row(probs: Vec<f64>, labels: Vec<f64>) -> Result<Self> {
        let f = probs.len();
        Self::new(probs, labels, 1, f)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.probs.iter().copied().zip(self.labels.iter().copied())
    }
}

/// The four scalar weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lm: f64,
    pub bce: f64,
    pub tversky: f64,
    pub dice: f64,
}

impl LossWeights {
    pub fn new(lm: f64, bce: f64, tversky: f64, dice: f64) -> Result<Self> {
        let w = Self {
            lm,
            bce,
            tversky,
            dice,
        };
        if w.as_array().iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid(format!("loss weights must be >= 0: {w:?}")));
        }
        Ok(w)
    }

    /// Pure language-model fine-tuning.
    pub const LM_ONLY: LossWeights = LossWeights {
        lm: 1.0,
        bce: 0.0,
        tversky: 0.0,
        dice: 0.0,
    };

    /// Weights reached at the end of warm-up.
    pub const WARM: LossWeights = LossWeights {
        lm: 0.2,
        bce: 0.2667,
        tversky: 0.2667,
        dice: 0.2667,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.lm, self.bce, self.tversky, self.dice]
    }
}

/// Hyperparameters of the segmentation losses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossParams {
    pub pos_weight: f64,
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl Default for LossParams {
    fn default() -> Self {
        Self {
            pos_weight: DEFAULT_POS_WEIGHT,
            alpha: 1.0 - DEFAULT_BETA,
            beta: DEFAULT_BETA,
            epsilon: EPSILON,
        }
    }
}

impl LossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.pos_weight > 0.0 && self.pos_weight.is_finite()) {
            return Err(Error::invalid(format!("pos_weight must be > 0, got {}", self.pos_weight)));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::invalid(format!("{name} must be in (0, 1), got {v}")));
            }
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::invalid("epsilon must be > 0"));
        }
        if (self.alpha + self.beta - 1.0).abs() > 1e-12 {
            log::warn!(
                "tversky alpha + beta = {} (override of alpha = 1 - beta)",
                self.alpha + self.beta
            );
        }
        Ok(())
    }
}

/// Positive-weighted binary cross-entropy, averaged over all frames.
pub fn bce_loss(batch: &SegBatch, pos_weight: f64, epsilon: f64) -> f64 {
    bce_loss_with_grad(batch, pos_weight, epsilon).0
}

pub fn bce_loss_with_grad(batch: &SegBatch, pos_weight: f64, epsilon: f64) -> (f64, Vec<f64>) {
    let n = batch.len().max(1) as f64;
    let mut total = 0.0;
    let grad = batch
        .pairs()
        .map(|(p, y)| {
            let pc = p.clamp(epsilon, 1.0 - epsilon);
            total -= pos_weight * y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
            if p != pc {
                // clamped: flat in p
                0.0
            } else {
                -(pos_weight * y / pc - (1.0 - y) / (1.0 - pc)) / n
            }
        })
        .collect();
    (total / n, grad)
}

/// Soft counts over the whole batch.
fn soft_counts(batch: &SegBatch) -> (f64, f64, f64) {
    batch.pairs().fold((0.0, 0.0, 0.0), |(tp, fp, fn_), (p, y)| {
        (tp + p * y, fp + p * (1.0 - y), fn_ + (1.0 - p) * y)
    })
}

/// `1 - (TP + eps) / (TP + alpha FP + beta FN + eps)` on global soft counts.
pub fn tversky_loss(batch: &SegBatch, alpha: f64, beta: f64, epsilon: f64) -> f64 {
    let (tp, fp, fn_) = soft_counts(batch);
    1.0 - (tp + epsilon) / (tp + alpha * fp + beta * fn_ + epsilon)
}

pub fn tversky_loss_with_grad(batch: &SegBatch, alpha: f64, beta: f64, epsilon: f64) -> (f64, Vec<f64>) {
    let (tp, fp, fn_) = soft_counts(batch);
    let num = tp + epsilon;
    let den = tp + alpha * fp + beta * fn_ + epsilon;
    let loss = 1.0 - num / den;
    let den2 = den * den;
    let grad = batch
        .labels
        .iter()
        .map(|&y| {
            let dnum = y;
            let dden = y + alpha * (1.0 - y) - beta * y;
            -(dnum * den - num * dden) / den2
        })
        .collect();
    (loss, grad)
}

/// Two-class (background, foreground) generalized Dice loss with inverse
/// squared-volume class weights, on global batch sums.
pub fn generalized_dice_loss(batch: &SegBatch, epsilon: f64) -> f64 {
    generalized_dice_loss_with_grad(batch, epsilon).0
}

pub fn generalized_dice_loss_with_grad(batch: &SegBatch, epsilon: f64) -> (f64, Vec<f64>) {
    // fg plane is (p, y), bg plane is (1 - p, 1 - y)
    let mut vol_fg = 0.0;
    let mut vol_bg = 0.0;
    let mut inter_fg = 0.0;
    let mut inter_bg = 0.0;
    let mut sum_fg = 0.0;
    let mut sum_bg = 0.0;
    for (p, y) in batch.pairs() {
        vol_fg += y;
        vol_bg += 1.0 - y;
        inter_fg += p * y;
        inter_bg += (1.0 - p) * (1.0 - y);
        sum_fg += p + y;
        sum_bg += (1.0 - p) + (1.0 - y);
    }
    let w_fg = 1.0 / ((vol_fg + epsilon) * (vol_fg + epsilon));
    let w_bg = 1.0 / ((vol_bg + epsilon) * (vol_bg + epsilon));
    let num = w_fg * inter_fg + w_bg * inter_bg;
    let den = w_fg * sum_fg + w_bg * sum_bg;
    let loss = 1.0 - 2.0 * num / den;
    let den2 = den * den;
    let grad = batch
        .labels
        .iter()
        .map(|&y| {
            let dnum = w_fg * y - w_bg * (1.0 - y);
            let dden = w_fg - w_bg;
            -2.0 * (dnum * den - num * dden) / den2
        })
        .collect();
    (loss, grad)
}

/// Mean negative log-likelihood of `targets` under row-wise softmax of
/// `logits` (`targets.len() × vocab`, row-major).
pub fn lm_loss(logits: &[f64], vocab: usize, targets: &[u32]) -> Result<f64> {
    lm_loss_with_grad(logits, vocab, targets).map(|(l, _)| l)
}

/// LM loss and its gradient with respect to the logits.
pub fn lm_loss_with_grad(logits: &[f64], vocab: usize, targets: &[u32]) -> Result<(f64, Vec<f64>)> {
    if targets.is_empty() {
        return Err(Error::invalid("lm_loss: no supervised positions"));
    }
    if vocab == 0 || logits.len() != targets.len() * vocab {
        return Err(Error::invalid(format!(
            "lm_loss: {} logits for {} positions of vocab {vocab}",
            logits.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; logits.len()];
    for (row, (&t, g)) in logits
        .chunks_exact(vocab)
        .zip(targets.iter().zip(grad.chunks_exact_mut(vocab)))
    {
        let t = t as usize;
        if t >= vocab {
            return Err(Error::invalid(format!("target id {t} outside vocab {vocab}")));
        }
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
        let log_z = max + sum.ln();
        total += log_z - row[t];
        for (gi, &z) in g.iter_mut().zip(row) {
            *gi = (z - log_z).exp() / n;
        }
        g[t] -= 1.0 / n;
    }
    Ok((total / n, grad))
}

/// `w_lm l_lm + w_bce l_bce + w_tv l_tv + w_gd l_gd`.
pub fn combined_loss(lm: f64, bce: f64, tversky: f64, dice: f64, w: &LossWeights) -> f64 {
    w.lm * lm + w.bce * bce + w.tversky * tversky + w.dice * dice
}
