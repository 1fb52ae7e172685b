//! Time and frame arithmetic for uniformly sampled videos.
//!
//! A video of `duration` seconds is split into `frames` equal windows of
//! `step = duration / frames` seconds. Frame `i` is the middle frame of window
//! `i`, centred at `(i + 0.5) * step`. The step is real-valued, so durations
//! that are not a multiple of the frame count need no special casing.

use crate::error::{Error, Result};

/// Frame rate assumed when a source does not carry one.
pub const DEFAULT_FPS: f64 = 30.0;

/// Length of a benchmark saliency clip in seconds.
pub const CLIP_SECONDS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timeline {
    duration: f64,
    fps: f64,
    frames: usize,
}

impl Timeline {
    pub fn new(duration: f64, fps: f64, frames: usize) -> Result<Self> {
        if !(duration.is_finite() && duration > 0.0) {
            return Err(Error::invalid(format!("duration must be > 0, got {duration}")));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::invalid(format!("fps must be > 0, got {fps}")));
        }
        if frames == 0 {
            return Err(Error::invalid("frame count must be >= 1"));
        }
        Ok(Self {
            duration,
            fps,
            frames,
        })
    }

    /// Timeline at [`DEFAULT_FPS`].
    pub fn uniform(duration: f64, frames: usize) -> Result<Self> {
        Self::new(duration, DEFAULT_FPS, frames)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn step(&self) -> f64 {
        self.duration / self.frames as f64
    }

    /// Boundary between window `i - 1` and window `i`; `boundary(frames)` is
    /// exactly the duration.
    pub fn boundary(&self, i: usize) -> f64 {
        if i >= self.frames {
            self.duration
        } else {
            self.duration * i as f64 / self.frames as f64
        }
    }

    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.step()
    }

    /// Source-video frame index of each sampled frame.
    ///
    /// `floor(step * fps * (i + 0.5))`, clamped to the last frame whose
    /// timestamp is below the duration.
    pub fn sample_indices(&self) -> Vec<usize> {
        let last = self.available_frames().saturating_sub(1);
        let scale = self.step() * self.fps;
        (0..self.frames)
            .map(|i| {
                let v = (scale * (0.5 + i as f64)).floor();
                (v.max(0.0) as usize).min(last)
            })
            .collect()
    }

    /// Source frames with a timestamp in `[0, duration)`.
    pub fn available_frames(&self) -> usize {
        let x = self.duration * self.fps;
        // 0.1 s at 30 fps is 3.0000000000000004 frames, not 4
        let n = x.round();
        if (x - n).abs() <= 1e-9 * n.max(1.0) {
            n as usize
        } else {
            x.ceil() as usize
        }
    }

    /// Half-open `[start, end)` window of every sampled frame.
    pub fn frame_windows(&self) -> Vec<(f64, f64)> {
        (0..self.frames)
            .map(|i| (self.boundary(i), self.boundary(i + 1)))
            .collect()
    }

    /// Index of the window that contains time `t`, clamped to the valid range.
    pub fn frame_at(&self, t: f64) -> usize {
        let i = (t / self.step()).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.frames - 1)
        }
    }

    /// Piecewise-linear interpolation of per-frame scores placed at the frame
    /// centres, held constant beyond the first and last centre.
    pub fn interpolate_scores(&self, frame_scores: &[f64], query_times: &[f64]) -> Result<Vec<f64>> {
        if frame_scores.is_empty() {
            return Err(Error::invalid("interpolate_scores: empty frame scores"));
        }
        if frame_scores.len() != self.frames {
            return Err(Error::invalid(format!(
                "interpolate_scores: {} scores for {} frames",
                frame_scores.len(),
                self.frames
            )));
        }
        let n = frame_scores.len();
        let step = self.step();
        let first = self.center(0);
        let last = self.center(n - 1);
        Ok(query_times
            .iter()
            .map(|&q| {
                if n == 1 || q <= first {
                    return frame_scores[0];
                }
                if q >= last {
                    return frame_scores[n - 1];
                }
                let k = ((q / step - 0.5).floor().max(0.0) as usize).min(n - 2);
                let t = ((q - self.center(k)) / step).clamp(0.0, 1.0);
                frame_scores[k] * (1.0 - t) + frame_scores[k + 1] * t
            })
            .collect())
    }
}

/// Source frames `offset` before and after `center_index`, clamped to the video.
pub fn neighbor_indices(center_index: usize, offset: usize, total_frames: usize) -> (usize, usize) {
    let right = center_index.saturating_add(offset).min(total_frames.saturating_sub(1));
    (center_index.saturating_sub(offset), right)
}

/// Centre time of each fixed-length scoring clip.
///
/// Clip `k` covers `[k * clip_len, min((k + 1) * clip_len, duration))` and is
/// scored at the midpoint of that covered range, so a trailing partial clip is
/// scored at the middle of what remains of the video.
pub fn clip_query_times(duration: f64, clip_len: f64) -> Result<Vec<f64>> {
    if !(clip_len.is_finite() && clip_len > 0.0) {
        return Err(Error::invalid(format!("clip length must be > 0, got {clip_len}")));
    }
    if !(duration.is_finite() && duration >= 0.0) {
        return Err(Error::invalid(format!("invalid duration {duration}")));
    }
    let n = clip_count(duration, clip_len);
    Ok((0..n)
        .map(|k| {
            let start = k as f64 * clip_len;
            let end = (start + clip_len).min(duration);
            0.5 * (start + end)
        })
        .collect())
}

/// Number of scoring clips, `ceil(duration / clip_len)`.
pub fn clip_count(duration: f64, clip_len: f64) -> usize {
    (duration / clip_len).ceil().max(0.0) as usize
}
