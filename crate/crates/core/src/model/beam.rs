use std::cmp::Ordering;

use super::linalg::log_softmax;
use super::{extract_frame_probs, DecodeState, InterleavedInput, ToyDecoder};
use crate::error::{Error, Result};
use crate::losses::binary_foreground;
use crate::maskcodec::{parse_mask, FrameMask, ParseMode};

#[derive(Debug, Clone, PartialEq)]
pub struct BeamOutput {
    /// Generated ids of the winning beam, EOS included when emitted.
    pub tokens: Vec<u32>,
    pub mask_text: String,
    /// Parsed bits with the foreground probability of every frame.
    pub mask: FrameMask,
    /// Sum of full-vocabulary log-probabilities of the winning tokens.
    pub score: f64,
}

#[derive(Clone)]
struct Beam {
    tokens: Vec<u32>,
    score: f64,
    state: DecodeState,
    done: bool,
    /// `(logit of '0', logit of '1')` at every generated position.
    binary_logits: Vec<(f64, f64)>,
}

struct Candidate {
    score: f64,
    beam: usize,
    token: Option<u32>,
}

/// Beam search over the answer.
///
/// Constrained decoding allows only `0`/`1` for the first `frames` steps and
/// EOS after them, so the output always parses strictly. Unconstrained
/// decoding expands the `n_beams` most likely tokens of the full vocabulary
/// and is parsed leniently. Frame probabilities come from the two-way softmax
/// of the `0`/`1` logits along the winning beam.
pub fn beam_decode(model: &ToyDecoder, input: &InterleavedInput, n_beams: usize, constrained: bool) -> Result<BeamOutput> {
    if n_beams == 0 {
        return Err(Error::invalid("n_beams must be >= 1"));
    }
    let cfg = model.config();
    let frames = cfg.frames;
    let vocab = &cfg.vocab;
    let (id0, id1, eos) = (vocab.zero(), vocab.one(), vocab.eos());
    let max_steps = frames + 1;

    let mut beams = vec![Beam {
        tokens: Vec::new(),
        score: 0.0,
        state: model.start_decoding(input)?,
        done: false,
        binary_logits: Vec::new(),
    }];

    // '1' wins exact ties so greedy bits agree with p >= 0.5
    let token_rank = |t: u32| if t == id1 { 0 } else { t as u64 + 1 };

    for step in 0..max_steps {
        let mut candidates = Vec::new();
        for (bi, beam) in beams.iter().enumerate() {
            if beam.done {
                candidates.push(Candidate {
                    score: beam.score,
                    beam: bi,
                    token: None,
                });
                continue;
            }
            let lp = log_softmax(&beam.state.logits);
            let allowed: Vec<u32> = if constrained {
                if step < frames {
                    vec![id0, id1]
                } else {
                    vec![eos]
                }
            } else {
                let mut ids: Vec<u32> = (0..lp.len() as u32).collect();
                ids.sort_by(|&a, &b| {
                    lp[b as usize]
                        .total_cmp(&lp[a as usize])
                        .then(token_rank(a).cmp(&token_rank(b)))
                });
                ids.truncate(n_beams);
                ids
            };
            for t in allowed {
                candidates.push(Candidate {
                    score: beam.score + lp[t as usize],
                    beam: bi,
                    token: Some(t),
                });
            }
        }
        candidates.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then(a.beam.cmp(&b.beam))
                .then_with(|| match (a.token, b.token) {
                    (Some(x), Some(y)) => token_rank(x).cmp(&token_rank(y)),
                    _ => Ordering::Equal,
                })
        });
        candidates.truncate(n_beams);

        let mut next = Vec::with_capacity(candidates.len());
        for c in candidates {
            let parent = &beams[c.beam];
            let Some(t) = c.token else {
                next.push(parent.clone());
                continue;
            };
            let mut beam = parent.clone();
            let logits = &parent.state.logits;
            beam.binary_logits.push((logits[id0 as usize], logits[id1 as usize]));
            beam.tokens.push(t);
            beam.score = c.score;
            beam.done = t == eos || step + 1 == max_steps;
            if !beam.done {
                model.decode_step(&mut beam.state, t)?;
            }
            next.push(beam);
        }
        beams = next;
        if beams.iter().all(|b| b.done) {
            break;
        }
    }

    let best = beams
        .into_iter()
        .next()
        .ok_or_else(|| Error::Numeric("beam search produced no hypothesis".into()))?;
    let mask_text = vocab.detokenize(&best.tokens);
    let mode = if constrained { ParseMode::Strict } else { ParseMode::Lenient };
    let bits = parse_mask(&mask_text, frames, mode)?.bits;

    let along_beam = best.tokens.len() >= frames && best.tokens[..frames].iter().all(|&t| t == id0 || t == id1);
    let probs = if along_beam {
        best.binary_logits[..frames]
            .iter()
            .map(|&(z0, z1)| binary_foreground(z0, z1))
            .collect()
    } else {
        let prompt = input.slots[..input.prompt_len()].to_vec();
        let forced = InterleavedInput::teacher_forced(prompt, input.frame_features.clone(), &bits, vocab)?;
        let out = model.forward(std::slice::from_ref(&forced))?;
        let start = forced.answer_start;
        extract_frame_probs(&out.logits[0], vocab.len(), start..start + frames, id0, id1)?
    };

    Ok(BeamOutput {
        tokens: best.tokens,
        mask_text,
        mask: FrameMask::with_probs(bits, probs)?,
        score: best.score,
    })
}
