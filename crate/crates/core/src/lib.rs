//! Joint video moment retrieval and highlight detection cast as frame
//! segmentation over binary answer tokens.
//!
//! A video is reduced to `f` uniformly sampled frames. A causal decoder reads
//! the frames interleaved with an instruction prompt and answers with `f`
//! characters drawn from `{'0', '1'}`, one per frame. The logits of those two
//! tokens double as per-frame foreground probabilities, which lets
//! segmentation objectives (pos-weighted BCE, Tversky, generalized Dice) train
//! the decoder directly alongside the usual causal LM loss.
//!
//! Modules:
//! - [`timeline`]: time/frame arithmetic and score interpolation
//! - [`maskcodec`]: mask text, spans and span confidences
//! - [`losses`]: objectives, schedules and gradient checking
//! - [`model`]: the toy interleaved decoder, training step, beam decoding and checkpoints
//! - [`data`]: benchmark JSONL, synthetic corpora, prompts and statistics
//! - [`metrics`]: moment retrieval and highlight detection scoring
//! - [`cli`]: run configuration and the `synth | train | predict | score | stats | prompt` commands

pub mod cli;
pub mod data;
pub mod error;
pub mod losses;
pub mod maskcodec;
pub mod metrics;
pub mod model;
pub mod timeline;

pub use error::{Error, Result};
pub use maskcodec::{FrameMask, MomentSpan};
pub use timeline::Timeline;
