#![allow(dead_code)]

use frameseg::data::{corpus_vocab, prompt_slots, synth_generate, SynthConfig, VideoSample};
use frameseg::model::{ToyDecoder, ToyModelConfig};

/// Small synthetic corpus at f=10 over 20 s videos.
pub fn small_corpus(n: usize, seed: u64) -> Vec<VideoSample> {
    synth_generate(&SynthConfig {
        n_samples: n,
        frames: 10,
        duration: 20.0,
        seed,
        ..Default::default()
    })
    .unwrap()
}

/// A narrow one-layer decoder sized for `samples`.
pub fn small_model(samples: &[VideoSample], frames: usize, seed: u64) -> ToyDecoder {
    let vocab = corpus_vocab(samples, frames).unwrap();
    let longest = samples
        .iter()
        .map(|s| prompt_slots(&s.query, frames, &vocab).unwrap().len())
        .max()
        .unwrap();
    let dim = samples[0].features.as_ref().unwrap().dim;
    let cfg = ToyModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        vocab,
        frame_feature_dim: dim,
        frames,
        max_seq_len: longest + frames + 1,
        init_std: 0.1,
    };
    ToyDecoder::new(cfg, seed).unwrap()
}

pub fn bits(text: &str) -> Vec<bool> {
    text.chars().map(|c| c == '1').collect()
}

pub const REFERENCE_MASK: &str = "0000000000001111111111010";
pub mod oracle;
