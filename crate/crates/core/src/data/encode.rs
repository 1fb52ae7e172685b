use rand::Rng;
use serde::{Deserialize, Serialize};

use super::prompt::{build_prompt, IMAGE_PLACEHOLDER};
use super::{FrameVariants, VideoSample};
use crate::error::{Error, Result};
use crate::maskcodec::moments_to_mask;
use crate::model::{InterleavedInput, Slot, TrainExample, Vocab};

/// Which sampled feature set a pass sees.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variation {
    Left,
    #[default]
    Middle,
    Right,
    /// Uniform choice among the three, drawn from the caller's rng.
    Random,
}

pub fn variation_pick<'a, R: Rng + ?Sized>(features: &'a FrameVariants, mode: Variation, rng: &mut R) -> &'a [f64] {
    let mode = match mode {
        Variation::Random => [Variation::Left, Variation::Middle, Variation::Right][rng.random_range(0..3)],
        m => m,
    };
    match mode {
        Variation::Left => &features.left,
        Variation::Right => &features.right,
        _ => &features.middle,
    }
}

/// Prompt tokens for `query`, with the i-th `<image>` replaced by frame `i`.
pub fn prompt_slots(query: &str, f: usize, vocab: &Vocab) -> Result<Vec<Slot>> {
    let text = build_prompt(query, f)?;
    let mut frame = 0;
    Ok(text
        .split_whitespace()
        .map(|w| {
            if w == IMAGE_PLACEHOLDER {
                frame += 1;
                Slot::Frame(frame - 1)
            } else {
                Slot::Token(vocab.id(w))
            }
        })
        .collect())
}

/// Vocabulary covering the prompts of `samples`.
pub fn corpus_vocab(samples: &[VideoSample], f: usize) -> Result<Vocab> {
    let prompts = samples
        .iter()
        .map(|s| build_prompt(&s.query, f))
        .collect::<Result<Vec<_>>>()?;
    Ok(Vocab::build(prompts.iter().map(String::as_str)))
}

/// Ground-truth foreground bit of every sampled frame.
pub fn frame_labels(sample: &VideoSample, f: usize) -> Result<Vec<bool>> {
    Ok(moments_to_mask(&sample.gt_spans, &sample.timeline(f)?))
}

fn features_for(sample: &VideoSample, f: usize) -> Result<&FrameVariants> {
    let feats = sample
        .features
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("qid {} has no frame features", sample.qid)))?;
    if feats.frames != f {
        return Err(Error::invalid(format!(
            "qid {} has {} frames of features, model expects {f}",
            sample.qid, feats.frames
        )));
    }
    Ok(feats)
}

/// Teacher-forced training example.
pub fn encode_example<R: Rng + ?Sized>(
    sample: &VideoSample,
    f: usize,
    vocab: &Vocab,
    variation: Variation,
    rng: &mut R,
) -> Result<TrainExample> {
    let feats = features_for(sample, f)?;
    let labels = frame_labels(sample, f)?;
    let prompt = prompt_slots(&sample.query, f, vocab)?;
    let input = InterleavedInput::teacher_forced(prompt, variation_pick(feats, variation, rng).to_vec(), &labels, vocab)?;
    Ok(TrainExample { input, labels })
}

/// Prompt-only input on the middle features, for decoding.
pub fn encode_prompt(sample: &VideoSample, f: usize, vocab: &Vocab) -> Result<InterleavedInput> {
    let feats = features_for(sample, f)?;
    InterleavedInput::prompt(prompt_slots(&sample.query, f, vocab)?, feats.middle.clone())
}
