//! Fit a small decoder to one sample, then compare greedy and beam decoding.

use frameseg::data::{corpus_vocab, encode_example, encode_prompt, prompt_slots, synth_generate, SynthConfig, Variation};
use frameseg::losses::{LossParams, LossWeights};
use frameseg::model::{beam_decode, train_step, AdamHyper, AdamW, ToyDecoder, ToyModelConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> frameseg::Result<()> {
    let frames = 10;
    let samples = synth_generate(&SynthConfig {
        n_samples: 1,
        frames,
        duration: 20.0,
        seed: 3,
        ..Default::default()
    })?;
    let s = &samples[0];
    let vocab = corpus_vocab(&samples, frames)?;
    let config = ToyModelConfig {
        d_model: 16,
        n_layers: 1,
        n_heads: 2,
        frame_feature_dim: s.features.as_ref().map_or(0, |f| f.dim),
        frames,
        max_seq_len: prompt_slots(&s.query, frames, &vocab)?.len() + frames + 1,
        init_std: 0.1,
        vocab,
    };
    let mut model = ToyDecoder::new(config, 7)?;
    let vocab = model.config().vocab.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let example = encode_example(s, frames, &vocab, Variation::Middle, &mut rng)?;
    println!("target   {}", example.labels.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>());

    let mut opt = AdamW::new(model.params(), AdamHyper::default());
    let prompt = encode_prompt(s, frames, &vocab)?;
    let mut done = 0;
    for step in [0, 10, 30, 60] {
        for _ in done..step {
            train_step(&mut model, &mut opt, std::slice::from_ref(&example), &LossWeights::WARM, &LossParams::default(), 1e-2)?;
        }
        done = step;
        for beams in [1, 3] {
            let out = beam_decode(&model, &prompt, beams, true)?;
            println!("step {step:>2} beams {beams}: {}  log p {:.4}", out.mask_text, out.score);
        }
    }
    Ok(())
}
