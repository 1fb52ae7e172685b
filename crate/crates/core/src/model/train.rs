use super::{AdamW, InterleavedInput, ParamStore, ToyDecoder};
use crate::error::{Error, Result};
use crate::losses::{joint_objective, lm_loss_with_grad, LossBreakdown, LossParams, LossWeights};

/// Teacher-forced input plus the per-frame labels it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    pub input: InterleavedInput,
    pub labels: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub losses: LossBreakdown,
    pub grad_norm: f64,
}

/// Forward the batch, evaluate the joint objective on the answer logits, and
/// add `scale ×` its parameter gradient into `grads`.
///
/// Nothing is added when any loss component is non-finite; the error names
/// the component.
pub fn accumulate_gradients(
    model: &ToyDecoder,
    batch: &[TrainExample],
    weights: &LossWeights,
    params: &LossParams,
    grads: &mut ParamStore,
    scale: f64,
) -> Result<LossBreakdown> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let frames = model.config().frames;
    let mut logits = Vec::with_capacity(batch.len());
    let mut caches = Vec::with_capacity(batch.len());
    let mut targets = Vec::with_capacity(batch.len());
    let mut labels = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        if ex.labels.len() != frames || ex.input.answer_targets.len() != frames + 1 {
            return Err(Error::invalid(format!(
                "training example has {} labels and {} answer targets for {frames} frames",
                ex.labels.len(),
                ex.input.answer_targets.len()
            )));
        }
        let (l, cache) = model.forward_cached(&ex.input, ex.input.answer_rows(), true)?;
        if l.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numeric(format!("logits for batch item {i} are not finite")));
        }
        logits.push(l);
        caches.push(cache.expect("recorded forward"));
        targets.push(ex.input.answer_targets.clone());
        labels.push(ex.labels.clone());
    }
    let vocab = &model.config().vocab;
    let out = joint_objective(
        &logits,
        &targets,
        &labels,
        vocab.len(),
        vocab.zero(),
        vocab.one(),
        weights,
        params,
    )?;
    if let Some(component) = out.losses.non_finite_component() {
        return Err(Error::Numeric(format!("{component} loss is not finite")));
    }
    for ((ex, cache), mut d) in batch.iter().zip(&caches).zip(out.dlogits) {
        if scale != 1.0 {
            d.iter_mut().for_each(|g| *g *= scale);
        }
        model.backward(&ex.input, cache, &d, grads);
    }
    Ok(out.losses)
}

/// One optimisation step on one batch: forward, slice the answer logits,
/// two-way softmax, the four losses, their weighted sum, backward, update.
pub fn train_step(
    model: &mut ToyDecoder,
    optimizer: &mut AdamW,
    batch: &[TrainExample],
    weights: &LossWeights,
    params: &LossParams,
    lr: f64,
) -> Result<StepReport> {
    let mut grads = model.params().zeros_like();
    let losses = accumulate_gradients(model, batch, weights, params, &mut grads, 1.0)?;
    let grad_norm = grads.l2_norm();
    optimizer.step(model.params_mut(), &grads, lr);
    Ok(StepReport { losses, grad_norm })
}

/// Plain causal-LM fine-tuning gradient: token cross-entropy over every
/// supervised row of the batch, nothing else. Returns the loss.
pub fn lm_gradients(model: &ToyDecoder, batch: &[TrainExample], grads: &mut ParamStore) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("empty training batch"));
    }
    let mut logits = Vec::new();
    let mut targets = Vec::new();
    let mut caches = Vec::with_capacity(batch.len());
    for ex in batch {
        let (l, cache) = model.forward_cached(&ex.input, ex.input.answer_rows(), true)?;
        logits.extend_from_slice(&l);
        targets.extend_from_slice(&ex.input.answer_targets);
        caches.push((l.len(), cache.expect("recorded forward")));
    }
    let (loss, dlogits) = lm_loss_with_grad(&logits, model.vocab_size(), &targets)?;
    if !loss.is_finite() {
        return Err(Error::Numeric("lm loss is not finite".into()));
    }
    let mut offset = 0;
    for (ex, (n, cache)) in batch.iter().zip(&caches) {
        model.backward(&ex.input, cache, &dlogits[offset..offset + n], grads);
        offset += n;
    }
    Ok(loss)
}

/// One AdamW step of plain LM fine-tuning.
pub fn lm_step(model: &mut ToyDecoder, optimizer: &mut AdamW, batch: &[TrainExample], lr: f64) -> Result<f64> {
    let mut grads = model.params().zeros_like();
    let loss = lm_gradients(model, batch, &mut grads)?;
    optimizer.step(model.params_mut(), &grads, lr);
    Ok(loss)
}
