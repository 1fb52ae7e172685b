use std::f64::consts::PI;

use super::LossWeights;
use crate::error::{Error, Result};

/// Loss weights for a 1-based `epoch`: linear from `start` at epoch 1 to `end`
/// at epoch `warmup_epochs + 1`, then held at `end`.
pub fn weight_schedule(
    epoch: usize,
    warmup_epochs: usize,
    start: &LossWeights,
    end: &LossWeights,
) -> Result<LossWeights> {
    if epoch < 1 {
        return Err(Error::invalid("epochs are numbered from 1"));
    }
    if warmup_epochs < 1 {
        return Err(Error::invalid("warmup_epochs must be >= 1"));
    }
    if epoch > warmup_epochs {
        return Ok(*end);
    }
    let t = (epoch - 1) as f64 / warmup_epochs as f64;
    let lerp = |a: f64, b: f64| a * (1.0 - t) + b * t;
    Ok(LossWeights {
        lm: lerp(start.lm, end.lm),
        bce: lerp(start.bce, end.bce),
        tversky: lerp(start.tversky, end.tversky),
        dice: lerp(start.dice, end.dice),
    })
}

/// Linear warm-up from 0 to `base_lr`, then cosine decay to 0 at `total_steps`.
pub fn lr_schedule(step: usize, total_steps: usize, warmup_steps: usize, base_lr: f64) -> f64 {
    if step < warmup_steps {
        return base_lr * step as f64 / warmup_steps as f64;
    }
    if total_steps <= warmup_steps {
        return base_lr;
    }
    let progress = ((step - warmup_steps) as f64 / (total_steps - warmup_steps) as f64).min(1.0);
    base_lr * 0.5 * (1.0 + (PI * progress).cos())
}
