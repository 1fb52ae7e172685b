use std::path::Path;

use log::info;

use super::config::RunConfig;
use crate::data::{encode_prompt, frame_labels, load_split, OnRecordError, VideoSample};
use crate::error::{Error, Result};
use crate::maskcodec::{mask_to_moments, score_spans, FrameMask};
use crate::metrics::{write_predictions, PredictionRecord, Provenance};
use crate::model::{beam_decode, Checkpoint, ToyDecoder};
use crate::timeline::{clip_query_times, CLIP_SECONDS};

/// Decode one sample and turn the mask into ranked windows and clip scores.
pub fn predict_sample(
    model: &ToyDecoder,
    sample: &VideoSample,
    beams: usize,
    constrained: bool,
) -> Result<(PredictionRecord, FrameMask)> {
    let cfg = model.config();
    let f = cfg.frames;
    let input = encode_prompt(sample, f, &cfg.vocab)?;
    let out = beam_decode(model, &input, beams, constrained)?;
    let probs = out.mask.probs.clone().expect("decoder masks carry probabilities");
    let tl = sample.timeline(f)?;
    let spans = mask_to_moments(&out.mask.bits, &tl)?;
    let pred_spans = score_spans(&spans, &probs, &tl)?;
    let pred_clip_scores = tl.interpolate_scores(&probs, &clip_query_times(sample.duration, CLIP_SECONDS)?)?;
    Ok((
        PredictionRecord {
            qid: sample.qid,
            pred_spans,
            pred_clip_scores,
        },
        out.mask,
    ))
}

/// Predictions for `samples` in input order, plus the frame accuracy of the
/// decoded masks.
pub fn predict_all(
    model: &ToyDecoder,
    samples: &[VideoSample],
    beams: usize,
    constrained: bool,
) -> Result<(Vec<PredictionRecord>, f64)> {
    let f = model.config().frames;
    let mut records = Vec::with_capacity(samples.len());
    let mut right = 0usize;
    for s in samples {
        let (rec, mask) = predict_sample(model, s, beams, constrained)?;
        let labels = frame_labels(s, f)?;
        right += mask.bits.iter().zip(&labels).filter(|(a, b)| a == b).count();
        records.push(rec);
    }
    let acc = if samples.is_empty() {
        0.0
    } else {
        right as f64 / (samples.len() * f) as f64
    };
    Ok((records, acc))
}

/// Decode `split` of the configured corpus with a checkpoint and write
/// prediction JSONL to `out`.
pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, split: &str, out: &Path) -> Result<Vec<PredictionRecord>> {
    let ckpt = Checkpoint::load(checkpoint)?;
    if ckpt.model_config.frames != cfg.frames {
        return Err(Error::Usage(format!(
            "checkpoint was trained with {} frames but the config asks for {}",
            ckpt.model_config.frames, cfg.frames
        )));
    }
    let model = ckpt.model()?;
    let samples = load_split(&cfg.corpus_dir, split, OnRecordError::Abort)?;
    let (records, acc) = predict_all(&model, &samples, cfg.beams, cfg.constrained)?;
    info!("{} predictions, frame accuracy {:.4}", records.len(), acc);
    let prov = Provenance {
        config_hash: cfg.hash(),
        seed: cfg.seed,
    };
    write_predictions(out, &records, Some(&prov))?;
    Ok(records)
}
