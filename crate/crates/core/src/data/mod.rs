//! Benchmark ingestion, synthetic corpora, prompts, labels and statistics.

mod encode;
mod features;
mod prompt;
mod qvh;
mod stats;
mod synth;

pub use encode::{corpus_vocab, encode_example, encode_prompt, frame_labels, prompt_slots, variation_pick, Variation};
pub use features::{load_split, read_features, split_paths, write_features, write_split, FeatureHeader, SplitPaths};
pub use prompt::{build_prompt, IMAGE_PLACEHOLDER, SYSTEM_PROMPT};
pub use qvh::{load_qvh_jsonl, parse_qvh_line, to_qvh_json, write_qvh_jsonl, OnRecordError};
pub use stats::{dataset_stats, DatasetStats, HistogramBin};
pub use synth::{synth_generate, SynthConfig, ACTIVITY_WORDS};
pub(crate) use synth::derive_seed;

use log::warn;

use crate::maskcodec::MomentSpan;
use crate::timeline::{clip_count, Timeline, CLIP_SECONDS};

/// Features of the sampled frames for one video: the centre sample and the
/// two neighbouring samples, each `frames × dim` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameVariants {
    pub frames: usize,
    pub dim: usize,
    pub middle: Vec<f64>,
    pub left: Vec<f64>,
    pub right: Vec<f64>,
}

/// One query over one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSample {
    pub qid: u64,
    pub vid: Option<String>,
    pub query: String,
    pub duration: f64,
    pub gt_spans: Vec<MomentSpan>,
    /// Annotator ratings (0–4) for every 2 s clip, `ceil(duration / 2)` rows.
    pub gt_clip_saliency: Option<Vec<Vec<u8>>>,
    pub features: Option<FrameVariants>,
}

impl VideoSample {
    pub fn clip_count(&self) -> usize {
        clip_count(self.duration, CLIP_SECONDS)
    }

    pub fn timeline(&self, frames: usize) -> crate::Result<Timeline> {
        Timeline::uniform(self.duration, frames)
    }
}

/// Source frame of each of the `f` samples. Videos with fewer than `f`
/// decodable frames repeat their last frame.
pub fn sampled_frame_indices(tl: &Timeline) -> Vec<usize> {
    let available = tl.available_frames();
    if available < tl.frames() {
        warn!(
            "video has {available} frames, fewer than {}; repeating the last frame",
            tl.frames()
        );
    }
    tl.sample_indices()
}
