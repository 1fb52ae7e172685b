use serde::{Deserialize, Serialize};

use super::{
    bce_loss_with_grad, combined_loss, generalized_dice_loss_with_grad, lm_loss_with_grad,
    tversky_loss_with_grad, LossParams, LossWeights, SegBatch,
};
use crate::error::{Error, Result};

/// Per-component losses of one step and their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub lm: f64,
    pub bce: f64,
    pub tversky: f64,
    pub dice: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.lm, self.bce, self.tversky, self.dice, self.total]
            .iter()
            .all(|v| v.is_finite())
    }

    /// Name of the first non-finite component, if any.
    pub fn non_finite_component(&self) -> Option<&'static str> {
        [
            ("lm", self.lm),
            ("bce", self.bce),
            ("tversky", self.tversky),
            ("dice", self.dice),
            ("total", self.total),
        ]
        .into_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(n, _)| n)
    }
}

#[derive(Debug, Clone)]
pub struct JointOutput {
    pub losses: LossBreakdown,
    /// Foreground probability per sample and frame.
    pub probs: Vec<Vec<f64>>,
    /// Gradient of the total with respect to each sample's answer logits.
    pub dlogits: Vec<Vec<f64>>,
}

/// The full training objective evaluated on answer-position logits.
///
/// For each sample, `logits[s]` holds `(frames + 1) × vocab` values: one row
/// per supervised answer position (every mask character, then EOS).
/// `targets[s]` are the teacher-forced ids for those rows and `labels[s]` the
/// binary foreground labels of the first `frames` rows. The LM loss averages
/// over every supervised row of the batch; the segmentation losses use the
/// two-way softmax over the `id0` / `id1` logits of the mask rows. Components
/// with zero weight contribute no gradient.
#[allow(clippy::too_many_arguments)]
pub fn joint_objective(
    logits: &[Vec<f64>],
    targets: &[Vec<u32>],
    labels: &[Vec<bool>],
    vocab: usize,
    id0: u32,
    id1: u32,
    weights: &LossWeights,
    params: &LossParams,
) -> Result<JointOutput> {
    let batch = logits.len();
    if batch == 0 || targets.len() != batch || labels.len() != batch {
        return Err(Error::invalid(format!(
            "joint objective: {} logit sets, {} target sets, {} label sets",
            batch,
            targets.len(),
            labels.len()
        )));
    }
    if id0 == id1 || id0 as usize >= vocab || id1 as usize >= vocab {
        return Err(Error::invalid("joint objective: bad binary token ids"));
    }
    let frames = labels[0].len();
    for s in 0..batch {
        if labels[s].len() != frames
            || targets[s].len() < frames
            || logits[s].len() != targets[s].len() * vocab
        {
            return Err(Error::invalid(format!("joint objective: sample {s} has inconsistent shapes")));
        }
    }

    let flat_logits: Vec<f64> = logits.iter().flatten().copied().collect();
    let flat_targets: Vec<u32> = targets.iter().flatten().copied().collect();
    let (lm, dlm) = lm_loss_with_grad(&flat_logits, vocab, &flat_targets)?;

    let (i0, i1) = (id0 as usize, id1 as usize);
    let mut probs = Vec::with_capacity(batch);
    let mut flat_p = Vec::with_capacity(batch * frames);
    let mut flat_y = Vec::with_capacity(batch * frames);
    for s in 0..batch {
        let p: Vec<f64> = (0..frames)
            .map(|r| {
                let row = &logits[s][r * vocab..(r + 1) * vocab];
                binary_foreground(row[i0], row[i1])
            })
            .collect();
        flat_p.extend_from_slice(&p);
        flat_y.extend(labels[s].iter().map(|&b| if b { 1.0 } else { 0.0 }));
        probs.push(p);
    }
    let seg = SegBatch::new(flat_p, flat_y, batch, frames)?;
    let (bce, dbce) = bce_loss_with_grad(&seg, params.pos_weight, params.epsilon);
    let (tversky, dtv) = tversky_loss_with_grad(&seg, params.alpha, params.beta, params.epsilon);
    let (dice, dgd) = generalized_dice_loss_with_grad(&seg, params.epsilon);
    let total = combined_loss(lm, bce, tversky, dice, weights);

    let seg_terms = [(weights.bce, &dbce), (weights.tversky, &dtv), (weights.dice, &dgd)];
    let mut dlogits = Vec::with_capacity(batch);
    let mut offset = 0;
    for (s, sample) in logits.iter().enumerate() {
        let n = sample.len();
        let mut d: Vec<f64> = if weights.lm != 0.0 {
            dlm[offset..offset + n].iter().map(|g| weights.lm * g).collect()
        } else {
            vec![0.0; n]
        };
        offset += n;
        for r in 0..frames {
            let k = s * frames + r;
            let mut dp = 0.0;
            let mut active = false;
            for (w, g) in seg_terms {
                if w != 0.0 {
                    dp += w * g[k];
                    active = true;
                }
            }
            if active {
                let p = seg.probs[k];
                let dz = dp * p * (1.0 - p);
                d[r * vocab + i1] += dz;
                d[r * vocab + i0] -= dz;
            }
        }
        dlogits.push(d);
    }

    Ok(JointOutput {
        losses: LossBreakdown {
            lm,
            bce,
            tversky,
            dice,
            total,
        },
        probs,
        dlogits,
    })
}

/// `softmax([z0, z1])[1]`.
pub(crate) fn binary_foreground(z0: f64, z1: f64) -> f64 {
    let d = z1 - z0;
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        let e = d.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_way_softmax() {
        assert_eq!(binary_foreground(0.3, 0.3), 0.5);
        assert!((binary_foreground(0.0, 3f64.ln()) - 0.75).abs() < 1e-15);
        assert!((binary_foreground(5.0, 5.0 + 3f64.ln()) - 0.75).abs() < 1e-15);
        assert!(binary_foreground(0.0, 800.0) == 1.0);
        assert!(binary_foreground(800.0, 0.0) >= 0.0);
    }

    #[test]
    fn lm_only_gradient_ignores_segmentation() {
        let vocab = 4;
        let logits = vec![vec![0.1, -0.2, 0.3, 0.05, 0.4, 0.0, -0.1, 0.2, 0.0, 0.1, 0.2, 0.3]];
        let targets = vec![vec![1, 2, 3]];
        let labels = vec![vec![true, false]];
        let out = joint_objective(
            &logits,
            &targets,
            &labels,
            vocab,
            1,
            2,
            &LossWeights::LM_ONLY,
            &LossParams::default(),
        )
        .unwrap();
        let (lm, dlm) = lm_loss_with_grad(&logits[0], vocab, &targets[0]).unwrap();
        assert_eq!(out.losses.lm, lm);
        assert_eq!(out.losses.total, lm);
        assert_eq!(out.dlogits[0], dlm);
    }
}
