//! Synthetic corpus with planted foreground segments.
//!
//! Every query names one activity. Frames whose centre lies inside a planted
//! segment sit near that activity's prototype vector; all other frames sit
//! near one of a set of distractor prototypes. Coordinate 0 of every
//! prototype is `+1` for activities and `-1` for distractors, so without noise
//! a threshold on that coordinate separates the classes exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FrameVariants, VideoSample};
use crate::error::{Error, Result};
use crate::maskcodec::MomentSpan;
use crate::timeline::{Timeline, CLIP_SECONDS};

pub const ACTIVITY_WORDS: [&str; 12] = [
    "cooking", "dancing", "swimming", "painting", "cycling", "singing", "reading", "running", "skating", "climbing",
    "fishing", "juggling",
];

const PLACEMENT_ATTEMPTS: usize = 200;
const ANNOTATORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub frames: usize,
    /// Video length in seconds, shared by every sample.
    pub duration: f64,
    pub feature_dim: usize,
    pub min_segments: usize,
    pub max_segments: usize,
    pub noise_std: f64,
    pub seed: u64,
    /// Number of distinct activities, at most `ACTIVITY_WORDS.len()`.
    pub n_activities: usize,
    pub n_distractors: usize,
    /// Segment boundaries fall on multiples of this many seconds.
    pub grid: f64,
    /// qid of the first sample; splits drawn from one seed use disjoint ranges.
    pub first_qid: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_samples: 500,
            frames: 10,
            duration: 20.0,
            feature_dim: 16,
            min_segments: 1,
            max_segments: 3,
            noise_std: 0.3,
            seed: 7,
            n_activities: 6,
            n_distractors: 6,
            grid: 2.0,
            first_qid: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::invalid(m));
        if self.frames == 0 || self.feature_dim < 2 {
            return bad("frames must be >= 1 and feature_dim >= 2".into());
        }
        if !(self.duration.is_finite() && self.duration > 0.0) || !(self.grid.is_finite() && self.grid > 0.0) {
            return bad(format!("duration {} and grid {} must be > 0", self.duration, self.grid));
        }
        if self.min_segments == 0 || self.min_segments > self.max_segments {
            return bad(format!(
                "segment range {}..={} is empty or starts at 0",
                self.min_segments, self.max_segments
            ));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.n_activities == 0 || self.n_activities > ACTIVITY_WORDS.len() || self.n_distractors == 0 {
            return bad(format!(
                "need 1..={} activities and >= 1 distractor",
                ACTIVITY_WORDS.len()
            ));
        }
        Ok(())
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Independent stream for `stream` under `seed`.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix(seed ^ splitmix(stream))
}

fn prototypes(cfg: &SynthConfig) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, u64::MAX));
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut make = |sign: f64| {
        let mut v: Vec<f64> = (0..cfg.feature_dim).map(|_| normal.sample(&mut rng)).collect();
        v[0] = sign;
        v
    };
    let act = (0..cfg.n_activities).map(|_| make(1.0)).collect();
    let dis = (0..cfg.n_distractors).map(|_| make(-1.0)).collect();
    (act, dis)
}

/// Disjoint, non-adjacent runs of at least `min_len` grid cells.
fn place_segments(rng: &mut ChaCha8Rng, cells: usize, n: usize, min_len: usize) -> Option<Vec<(usize, usize)>> {
    if min_len > cells {
        return None;
    }
    let max_len = (cells / 3).max(min_len);
    'attempt: for _ in 0..PLACEMENT_ATTEMPTS {
        let mut runs: Vec<(usize, usize)> = Vec::with_capacity(n);
        for _ in 0..n {
            let len = rng.random_range(min_len..=max_len.min(cells));
            let start = rng.random_range(0..=cells - len);
            let end = start + len;
            if runs.iter().any(|&(s, e)| start <= e && s <= end) {
                continue 'attempt;
            }
            runs.push((start, end));
        }
        runs.sort_unstable();
        return Some(runs);
    }
    None
}

/// Generate `cfg.n_samples` samples. The output depends only on `cfg`.
pub fn synth_generate(cfg: &SynthConfig) -> Result<Vec<VideoSample>> {
    cfg.validate()?;
    let (act, dis) = prototypes(cfg);
    let tl = Timeline::uniform(cfg.duration, cfg.frames)?;
    let cells = (cfg.duration / cfg.grid + 1e-9).floor() as usize;
    if cells == 0 {
        return Err(Error::invalid("grid is longer than the video"));
    }
    // a segment shorter than one frame step could hold no frame centre
    let min_len = ((tl.step() / cfg.grid) - 1e-9).ceil().max(1.0) as usize;
    let noise = Normal::new(0.0, cfg.noise_std).map_err(|e| Error::invalid(e.to_string()))?;
    let dim = cfg.feature_dim;

    (0..cfg.n_samples as u64)
        .map(|i| {
            let qid = cfg.first_qid + i;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, qid));
            let activity = rng.random_range(0..cfg.n_activities);
            let n_seg = rng.random_range(cfg.min_segments..=cfg.max_segments);
            let runs = place_segments(&mut rng, cells, n_seg, min_len).ok_or_else(|| {
                Error::invalid(format!(
                    "cannot place {n_seg} separated segments in {cells} grid cells"
                ))
            })?;
            let gt_spans = runs
                .iter()
                .map(|&(s, e)| MomentSpan::new(s as f64 * cfg.grid, (e as f64 * cfg.grid).min(cfg.duration)))
                .collect::<Result<Vec<_>>>()?;
            let inside = |t: f64| gt_spans.iter().any(|s| s.contains(t));

            let mut base = Vec::with_capacity(cfg.frames * dim);
            for f in 0..cfg.frames {
                if inside(tl.center(f)) {
                    base.extend_from_slice(&act[activity]);
                } else {
                    base.extend_from_slice(&dis[rng.random_range(0..cfg.n_distractors)]);
                }
            }
            let mut variant = || -> Vec<f64> { base.iter().map(|&b| b + noise.sample(&mut rng)).collect() };
            let middle = variant();
            let left = variant();
            let right = variant();

            let clips = crate::timeline::clip_query_times(cfg.duration, CLIP_SECONDS)?;
            let saliency = clips
                .iter()
                .map(|&c| {
                    (0..ANNOTATORS)
                        .map(|_| {
                            if inside(c) {
                                if rng.random_bool(0.8) {
                                    4
                                } else {
                                    3
                                }
                            } else {
                                rng.random_range(0..=1)
                            }
                        })
                        .collect()
                })
                .collect();

            Ok(VideoSample {
                qid,
                vid: Some(format!("synth_{qid:06}")),
                query: format!("a person is {} in this clip", ACTIVITY_WORDS[activity]),
                duration: cfg.duration,
                gt_spans,
                gt_clip_saliency: Some(saliency),
                features: Some(FrameVariants {
                    frames: cfg.frames,
                    dim,
                    middle,
                    left,
                    right,
                }),
            })
        })
        .collect()
}
