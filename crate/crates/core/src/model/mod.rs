//! Toy interleaved causal decoder.
//!
//! The decoder reads a prompt in which every `<image>` placeholder is replaced
//! by a linear projection of one frame feature vector, and answers with one
//! `0`/`1` token per frame followed by EOS. Forward and backward passes are
//! written out by hand in `f64`, so every gradient the training step uses can
//! be checked against finite differences.

mod beam;
mod checkpoint;
mod decoder;
pub(crate) mod linalg;
mod optim;
mod params;
mod train;
mod vocab;

pub use beam::{beam_decode, BeamOutput};
pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use decoder::{DecodeState, ForwardOutput, ToyDecoder};
pub use optim::{AdamHyper, AdamW};
pub use params::ParamStore;
pub use train::{accumulate_gradients, lm_gradients, lm_step, train_step, StepReport, TrainExample};
pub use vocab::Vocab;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::binary_foreground;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyModelConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub vocab: Vocab,
    pub frame_feature_dim: usize,
    pub frames: usize,
    pub max_seq_len: usize,
    /// Standard deviation of the normal weight initialisation.
    pub init_std: f64,
}

impl ToyModelConfig {
    /// Default toy dimensions: 64-wide, 2 layers, 4 heads.
    pub fn toy(vocab: Vocab, frame_feature_dim: usize, frames: usize, max_seq_len: usize) -> Self {
        Self {
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            vocab,
            frame_feature_dim,
            frames,
            max_seq_len,
            init_std: 0.02,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.vocab.validate()?;
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::invalid(format!(
                "d_model {} must be a positive multiple of n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if self.frames == 0 || self.frame_feature_dim == 0 {
            return Err(Error::invalid("frames and frame_feature_dim must be >= 1"));
        }
        if self.max_seq_len < self.frames + 1 {
            return Err(Error::invalid("max_seq_len cannot hold the answer"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }
}

/// One position of an interleaved sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Token(u32),
    /// Row `i` of the sample's frame feature matrix.
    Frame(usize),
}

/// A prompt with frame slots, optionally extended by teacher-forced answer
/// tokens.
///
/// Logit row `t` predicts the token at `t + 1`, so the supervised rows are
/// `answer_start .. answer_start + answer_targets.len()` where
/// `answer_start = prompt_len - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterleavedInput {
    pub slots: Vec<Slot>,
    /// `frames × frame_feature_dim`, row-major.
    pub frame_features: Vec<f64>,
    pub answer_start: usize,
    /// The `frames` mask tokens followed by EOS; empty at inference.
    pub answer_targets: Vec<u32>,
}

impl InterleavedInput {
    /// Prompt only, ready for decoding.
    pub fn prompt(slots: Vec<Slot>, frame_features: Vec<f64>) -> Result<Self> {
        if slots.is_empty() {
            return Err(Error::invalid("empty prompt"));
        }
        let answer_start = slots.len() - 1;
        Ok(Self {
            slots,
            frame_features,
            answer_start,
            answer_targets: Vec::new(),
        })
    }

    /// Prompt followed by the teacher-forced answer for `bits`.
    pub fn teacher_forced(prompt: Vec<Slot>, frame_features: Vec<f64>, bits: &[bool], vocab: &Vocab) -> Result<Self> {
        let mut input = Self::prompt(prompt, frame_features)?;
        let tokens: Vec<u32> = bits
            .iter()
            .map(|&b| if b { vocab.one() } else { vocab.zero() })
            .collect();
        input.slots.extend(tokens.iter().map(|&t| Slot::Token(t)));
        input.answer_targets = tokens;
        input.answer_targets.push(vocab.eos());
        Ok(input)
    }

    pub fn prompt_len(&self) -> usize {
        self.answer_start + 1
    }

    pub fn answer_rows(&self) -> std::ops::Range<usize> {
        self.answer_start..self.answer_start + self.answer_targets.len()
    }

    pub fn frame_slots(&self) -> usize {
        self.slots.iter().filter(|s| matches!(s, Slot::Frame(_))).count()
    }
}

/// Foreground probability per frame from full-vocabulary logits (`rows × vocab`).
///
/// Takes rows `answer_rows` (the mask positions), keeps the logits of `id0`
/// and `id1`, and applies a two-way softmax.
pub fn extract_frame_probs(
    logits: &[f64],
    vocab: usize,
    answer_rows: std::ops::Range<usize>,
    id0: u32,
    id1: u32,
) -> Result<Vec<f64>> {
    if id0 == id1 || id0 as usize >= vocab || id1 as usize >= vocab {
        return Err(Error::invalid("extract_frame_probs: bad binary token ids"));
    }
    if answer_rows.end * vocab > logits.len() {
        return Err(Error::invalid(format!(
            "extract_frame_probs: rows {answer_rows:?} outside {} logit rows",
            logits.len() / vocab.max(1)
        )));
    }
    Ok(answer_rows
        .map(|r| {
            let row = &logits[r * vocab..(r + 1) * vocab];
            binary_foreground(row[id0 as usize], row[id1 as usize])
        })
        .collect())
}
