use log::warn;
use serde::{Deserialize, Serialize};

use super::VideoSample;
use crate::error::Result;
use crate::maskcodec::moments_to_mask;

/// Width of a duration histogram bin, in seconds.
const HIST_BIN_SECONDS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub from: f64,
    pub to: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub samples: usize,
    pub frames: usize,
    pub fg_frames: usize,
    pub bg_frames: usize,
    /// Background frames per foreground frame; infinite without foreground.
    pub bg_fg_ratio: f64,
    pub bg_fraction: f64,
    pub duration_histogram: Vec<HistogramBin>,
}

/// Label every sample with `f` frames and count foreground and background.
pub fn dataset_stats(samples: &[VideoSample], f: usize) -> Result<DatasetStats> {
    let mut fg = 0;
    let mut bg = 0;
    let mut hist: Vec<usize> = Vec::new();
    for s in samples {
        let tl = s.timeline(f)?;
        let n_fg = moments_to_mask(&s.gt_spans, &tl).iter().filter(|&&b| b).count();
        fg += n_fg;
        bg += f - n_fg;
        let bin = (s.duration / HIST_BIN_SECONDS).floor() as usize;
        if hist.len() <= bin {
            hist.resize(bin + 1, 0);
        }
        hist[bin] += 1;
    }
    let bg_fg_ratio = if fg == 0 {
        warn!("no foreground frames; background to foreground ratio is infinite");
        f64::INFINITY
    } else {
        bg as f64 / fg as f64
    };
    let total = fg + bg;
    Ok(DatasetStats {
        samples: samples.len(),
        frames: total,
        fg_frames: fg,
        bg_frames: bg,
        bg_fg_ratio,
        bg_fraction: if total == 0 { 0.0 } else { bg as f64 / total as f64 },
        duration_histogram: hist
            .into_iter()
            .enumerate()
            .map(|(i, count)| HistogramBin {
                from: i as f64 * HIST_BIN_SECONDS,
                to: (i + 1) as f64 * HIST_BIN_SECONDS,
                count,
            })
            .collect(),
    })
}
