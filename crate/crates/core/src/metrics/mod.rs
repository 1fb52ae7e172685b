//! Moment retrieval and highlight detection scoring.
//!
//! All reported values are percentages in the JSON report; the functions
//! below return fractions.

mod hl;
mod mr;

pub use hl::{query_hl, rank_clips, ranked_ap, HL_POSITIVE_RATING};
pub use mr::{average_precision, avg_thresholds, iou_1d, rank_spans, top1_hit};

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, BufReader};
use std::path::Path;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::data::VideoSample;
use crate::error::{Error, Result};
use crate::maskcodec::MomentSpan;

/// Model output for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub qid: u64,
    /// Confidence-ranked spans.
    pub pred_spans: Vec<MomentSpan>,
    /// One score per 2 s clip.
    pub pred_clip_scores: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPrediction {
    qid: u64,
    pred_relevant_windows: Vec<Vec<f64>>,
    #[serde(default)]
    pred_saliency_scores: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

/// Run identity stamped on every prediction line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl PredictionRecord {
    pub fn to_json_line(&self, provenance: Option<&Provenance>) -> Result<String> {
        let raw = RawPrediction {
            qid: self.qid,
            pred_relevant_windows: self
                .pred_spans
                .iter()
                .map(|s| vec![s.start, s.end, s.confidence.unwrap_or(0.0)])
                .collect(),
            pred_saliency_scores: self.pred_clip_scores.clone(),
            config_hash: provenance.map(|p| p.config_hash.clone()),
            seed: provenance.map(|p| p.seed),
        };
        Ok(serde_json::to_string(&raw)?)
    }

    fn from_raw(raw: RawPrediction) -> std::result::Result<Self, String> {
        let pred_spans = raw
            .pred_relevant_windows
            .iter()
            .map(|w| match w[..] {
                [s, e, c] => MomentSpan::scored(s, e, c).map_err(|e| e.to_string()),
                _ => Err(format!("window {w:?} must be [start, end, score]")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self {
            qid: raw.qid,
            pred_spans,
            pred_clip_scores: raw.pred_saliency_scores,
        })
    }
}

/// Read prediction JSONL; malformed lines are reported with their number.
pub fn load_predictions(path: &Path) -> Result<(Vec<PredictionRecord>, Option<Provenance>)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut out = Vec::new();
    let mut provenance = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = |reason: String| Error::Record {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let raw: RawPrediction = serde_json::from_str(&line).map_err(|e| record(e.to_string()))?;
        if let (Some(h), Some(s)) = (&raw.config_hash, raw.seed) {
            provenance.get_or_insert(Provenance {
                config_hash: h.clone(),
                seed: s,
            });
        }
        out.push(PredictionRecord::from_raw(raw).map_err(record)?);
    }
    Ok((out, provenance))
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord], provenance: Option<&Provenance>) -> Result<()> {
    let mut text = String::new();
    for r in records {
        text.push_str(&r.to_json_line(provenance)?);
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Pair every ground-truth sample with its prediction. Both sides must cover
/// the same qids.
pub fn align<'a>(
    records: &'a [PredictionRecord],
    gt: &'a [VideoSample],
) -> Result<Vec<(&'a PredictionRecord, &'a VideoSample)>> {
    if gt.is_empty() {
        return Err(Error::invalid("no ground-truth queries to score"));
    }
    let by_qid: HashMap<u64, &PredictionRecord> = records.iter().map(|r| (r.qid, r)).collect();
    if by_qid.len() != records.len() {
        return Err(Error::invalid("duplicate qids in predictions"));
    }
    let missing: Vec<u64> = gt.iter().map(|g| g.qid).filter(|q| !by_qid.contains_key(q)).collect();
    let extra = records.len() + missing.len() - gt.len();
    if !missing.is_empty() || extra > 0 {
        return Err(Error::invalid(format!(
            "prediction and ground-truth qids differ: {} without prediction (first {:?}), {} without ground truth",
            missing.len(),
            missing.first(),
            extra
        )));
    }
    Ok(gt.iter().map(|g| (by_qid[&g.qid], g)).collect())
}

/// Fraction of queries whose top prediction reaches `threshold` IoU.
pub fn recall_at_1(records: &[PredictionRecord], gt: &[VideoSample], threshold: f64) -> Result<f64> {
    let pairs = align(records, gt)?;
    let hits = pairs
        .iter()
        .filter(|(r, g)| top1_hit(&r.pred_spans, &g.gt_spans, threshold))
        .count();
    Ok(hits as f64 / pairs.len() as f64)
}

/// Mean detection AP over queries that have ground-truth spans.
pub fn map_at_iou(records: &[PredictionRecord], gt: &[VideoSample], threshold: f64) -> Result<f64> {
    let pairs = align(records, gt)?;
    let aps: Vec<f64> = pairs
        .iter()
        .filter_map(|(r, g)| average_precision(&r.pred_spans, &g.gt_spans, threshold))
        .collect();
    if aps.is_empty() {
        return Err(Error::invalid("no query has ground-truth spans"));
    }
    Ok(aps.iter().sum::<f64>() / aps.len() as f64)
}

pub fn avg_map(records: &[PredictionRecord], gt: &[VideoSample]) -> Result<f64> {
    let t = avg_thresholds();
    let mut total = 0.0;
    for &th in &t {
        total += map_at_iou(records, gt, th)?;
    }
    Ok(total / t.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlMetrics {
    pub hl_map: f64,
    pub hit_at_1: f64,
    /// Queries that contributed; those without any positive clip are skipped.
    pub queries: usize,
}

pub fn hl_metrics(records: &[PredictionRecord], gt: &[VideoSample]) -> Result<HlMetrics> {
    let pairs = align(records, gt)?;
    let mut ap = 0.0;
    let mut hits = 0usize;
    let mut n = 0usize;
    for (r, g) in pairs {
        let Some(ratings) = &g.gt_clip_saliency else {
            continue;
        };
        if r.pred_clip_scores.len() != ratings.len() {
            return Err(Error::invalid(format!(
                "qid {}: {} clip scores for {} ground-truth clips",
                r.qid,
                r.pred_clip_scores.len(),
                ratings.len()
            )));
        }
        match query_hl(&r.pred_clip_scores, ratings) {
            Some((a, hit)) => {
                ap += a;
                hits += hit as usize;
                n += 1;
            }
            None => warn!("qid {} has no positive clip; left out of highlight scores", r.qid),
        }
    }
    if n == 0 {
        return Err(Error::invalid("no query has positive highlight clips"));
    }
    Ok(HlMetrics {
        hl_map: ap / n as f64,
        hit_at_1: hits as f64 / n as f64,
        queries: n,
    })
}

/// Fraction of frames whose predicted bit equals the label.
pub fn frame_accuracy(pred: &[Vec<bool>], labels: &[Vec<bool>]) -> Result<f64> {
    if pred.len() != labels.len() {
        return Err(Error::invalid("prediction and label counts differ"));
    }
    let mut total = 0usize;
    let mut right = 0usize;
    for (p, l) in pred.iter().zip(labels) {
        if p.len() != l.len() {
            return Err(Error::invalid("mask lengths differ"));
        }
        total += p.len();
        right += p.iter().zip(l).filter(|(a, b)| a == b).count();
    }
    if total == 0 {
        return Err(Error::invalid("no frames to compare"));
    }
    Ok(right as f64 / total as f64)
}

/// Metric values in percent, keyed as in the benchmark report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "R1@0.5")]
    pub r1_05: f64,
    #[serde(rename = "R1@0.7")]
    pub r1_07: f64,
    #[serde(rename = "mAP@0.5")]
    pub map_05: f64,
    #[serde(rename = "mAP@0.75")]
    pub map_075: f64,
    #[serde(rename = "mAP_avg")]
    pub map_avg: f64,
    #[serde(rename = "HL_mAP")]
    pub hl_map: Option<f64>,
    #[serde(rename = "HL_HIT@1")]
    pub hl_hit1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScores {
    pub qid: u64,
    pub r1_at_05: bool,
    pub r1_at_07: bool,
    pub ap: BTreeMap<String, f64>,
    pub hl_ap: Option<f64>,
    pub hl_hit: Option<bool>,
}

/// Full report plus per-query breakdown.
pub fn evaluate(records: &[PredictionRecord], gt: &[VideoSample]) -> Result<(MetricsReport, Vec<QueryScores>)> {
    let pct = |x: f64| 100.0 * x;
    let hl = if gt.iter().any(|g| g.gt_clip_saliency.is_some()) {
        Some(hl_metrics(records, gt)?)
    } else {
        None
    };
    let report = MetricsReport {
        r1_05: pct(recall_at_1(records, gt, 0.5)?),
        r1_07: pct(recall_at_1(records, gt, 0.7)?),
        map_05: pct(map_at_iou(records, gt, 0.5)?),
        map_075: pct(map_at_iou(records, gt, 0.75)?),
        map_avg: pct(avg_map(records, gt)?),
        hl_map: hl.map(|h| pct(h.hl_map)),
        hl_hit1: hl.map(|h| pct(h.hit_at_1)),
    };
    let breakdown = align(records, gt)?
        .into_iter()
        .map(|(r, g)| {
            let ap = avg_thresholds()
                .into_iter()
                .filter_map(|t| average_precision(&r.pred_spans, &g.gt_spans, t).map(|a| (format!("{t:.2}"), a)))
                .collect();
            let hl = g
                .gt_clip_saliency
                .as_ref()
                .filter(|s| s.len() == r.pred_clip_scores.len())
                .and_then(|s| query_hl(&r.pred_clip_scores, s));
            QueryScores {
                qid: r.qid,
                r1_at_05: top1_hit(&r.pred_spans, &g.gt_spans, 0.5),
                r1_at_07: top1_hit(&r.pred_spans, &g.gt_spans, 0.7),
                ap,
                hl_ap: hl.map(|h| h.0),
                hl_hit: hl.map(|h| h.1),
            }
        })
        .collect();
    Ok((report, breakdown))
}
