use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use super::VideoSample;
use crate::error::{Error, Result};
use crate::maskcodec::MomentSpan;
use crate::timeline::{clip_count, CLIP_SECONDS};

/// What to do with a malformed JSONL record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OnRecordError {
    #[default]
    Abort,
    /// Log the problem with its line number and continue.
    Skip,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    qid: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vid: Option<String>,
    query: Option<String>,
    duration: Option<f64>,
    relevant_windows: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relevant_clip_ids: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    saliency_scores: Option<Vec<Vec<i64>>>,
}

/// Parse one record. Errors carry no location; callers add it.
pub fn parse_qvh_line(line: &str) -> std::result::Result<VideoSample, String> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let qid = raw.qid.ok_or("missing field `qid`")?;
    let query = raw.query.ok_or("missing field `query`")?;
    let duration = raw.duration.ok_or("missing field `duration`")?;
    let windows = raw.relevant_windows.ok_or("missing field `relevant_windows`")?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(format!("duration must be > 0, got {duration}"));
    }
    if query.trim().is_empty() {
        return Err("empty query".into());
    }

    let mut gt_spans = Vec::with_capacity(windows.len());
    for w in &windows {
        let [s, e] = w[..] else {
            return Err(format!("window {w:?} must have two values"));
        };
        let (s, e) = (s.clamp(0.0, duration), e.clamp(0.0, duration));
        match MomentSpan::new(s, e) {
            Ok(span) => gt_spans.push(span),
            Err(_) => warn!("qid {qid}: dropping empty window {w:?} after clamping to [0, {duration}]"),
        }
    }

    let n_clips = clip_count(duration, CLIP_SECONDS);
    let gt_clip_saliency = match raw.saliency_scores {
        None => None,
        Some(scores) => {
            let ids: Vec<i64> = match raw.relevant_clip_ids {
                Some(ids) => ids,
                None if scores.len() == n_clips => (0..n_clips as i64).collect(),
                None => return Err("saliency_scores without relevant_clip_ids".into()),
            };
            if ids.len() != scores.len() {
                return Err(format!(
                    "{} relevant_clip_ids but {} saliency_scores rows",
                    ids.len(),
                    scores.len()
                ));
            }
            let annotators = scores.first().map_or(0, Vec::len);
            let mut full = vec![vec![0u8; annotators]; n_clips];
            for (&id, row) in ids.iter().zip(&scores) {
                if id < 0 || id as usize >= n_clips {
                    return Err(format!("clip id {id} outside 0..{n_clips}"));
                }
                if row.len() != annotators {
                    return Err("saliency rows have different annotator counts".into());
                }
                for (dst, &r) in full[id as usize].iter_mut().zip(row) {
                    if !(0..=4).contains(&r) {
                        return Err(format!("saliency rating {r} outside 0..=4"));
                    }
                    *dst = r as u8;
                }
            }
            Some(full)
        }
    };

    Ok(VideoSample {
        qid,
        vid: raw.vid,
        query,
        duration,
        gt_spans,
        gt_clip_saliency,
        features: None,
    })
}

/// Read a JSONL file in the benchmark schema.
pub fn load_qvh_jsonl(path: &Path, on_error: OnRecordError) -> Result<Vec<VideoSample>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_qvh_line(&line) {
            Ok(s) => out.push(s),
            Err(reason) => {
                let err = Error::Record {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason,
                };
                match on_error {
                    OnRecordError::Abort => return Err(err),
                    OnRecordError::Skip => warn!("skipping record: {err}"),
                }
            }
        }
    }
    if out.is_empty() {
        warn!("{} holds no samples", path.display());
    }
    Ok(out)
}

/// One JSONL line for `sample`. Saliency is written for clips with any
/// non-zero rating.
pub fn to_qvh_json(sample: &VideoSample) -> Result<String> {
    let (ids, scores) = match &sample.gt_clip_saliency {
        None => (None, None),
        Some(rows) => {
            let mut keep: Vec<usize> = (0..rows.len()).filter(|&k| rows[k].iter().any(|&r| r > 0)).collect();
            if keep.is_empty() {
                // keeps the annotator count
                keep = (0..rows.len()).collect();
            }
            (
                Some(keep.iter().map(|&k| k as i64).collect()),
                Some(keep.iter().map(|&k| rows[k].iter().map(|&r| r as i64).collect()).collect()),
            )
        }
    };
    let raw = RawRecord {
        qid: Some(sample.qid),
        vid: sample.vid.clone(),
        query: Some(sample.query.clone()),
        duration: Some(sample.duration),
        relevant_windows: Some(sample.gt_spans.iter().map(|s| vec![s.start, s.end]).collect()),
        relevant_clip_ids: ids,
        saliency_scores: scores,
    };
    Ok(serde_json::to_string(&raw)?)
}

pub fn write_qvh_jsonl(path: &Path, samples: &[VideoSample]) -> Result<()> {
    let mut buf = Vec::new();
    for s in samples {
        writeln!(buf, "{}", to_qvh_json(s)?).expect("write to memory");
    }
    std::fs::write(path, buf).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
