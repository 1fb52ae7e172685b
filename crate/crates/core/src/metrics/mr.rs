use std::cmp::Ordering;

use crate::maskcodec::MomentSpan;

/// IoU thresholds averaged by [`avg_map`](super::avg_map): 0.5, 0.55, …, 0.95.
pub fn avg_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

pub fn iou_1d(a: &MomentSpan, b: &MomentSpan) -> f64 {
    let inter = (a.end.min(b.end) - a.start.max(b.start)).max(0.0);
    let union = a.length() + b.length() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

/// Highest confidence first; equal confidences keep the earlier start first.
pub fn rank_spans(spans: &[MomentSpan]) -> Vec<MomentSpan> {
    let mut v = spans.to_vec();
    v.sort_by(|a, b| {
        let (ca, cb) = (a.confidence.unwrap_or(0.0), b.confidence.unwrap_or(0.0));
        cb.partial_cmp(&ca)
            .unwrap_or(Ordering::Equal)
            .then(a.start.total_cmp(&b.start))
    });
    v
}

/// Detection AP of ranked predictions against one query's ground truth.
///
/// Each prediction, in rank order, takes the unmatched ground-truth span of
/// highest IoU when that IoU reaches `threshold`. AP is the area under the
/// precision/recall curve with precision made monotone from the right.
/// Returns `None` when there is no ground truth.
pub fn average_precision(preds: &[MomentSpan], gts: &[MomentSpan], threshold: f64) -> Option<f64> {
    if gts.is_empty() {
        return None;
    }
    let ranked = rank_spans(preds);
    let mut matched = vec![false; gts.len()];
    let mut tp = Vec::with_capacity(ranked.len());
    for p in &ranked {
        let best = gts
            .iter()
            .enumerate()
            .filter(|(j, _)| !matched[*j])
            .map(|(j, g)| (j, iou_1d(p, g)))
            .filter(|&(_, iou)| iou >= threshold)
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
        match best {
            Some((j, _)) => {
                matched[j] = true;
                tp.push(true);
            }
            None => tp.push(false),
        }
    }
    let n_gt = gts.len() as f64;
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0.0;
    for (k, &t) in tp.iter().enumerate() {
        if t {
            hits += 1.0;
        }
        precision.push(hits / (k + 1) as f64);
        recall.push(hits / n_gt);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    let mut ap = 0.0;
    let mut prev_recall = 0.0;
    for (p, r) in precision.iter().zip(&recall) {
        ap += (r - prev_recall) * p;
        prev_recall = *r;
    }
    Some(ap)
}

/// True when the top-ranked prediction reaches `threshold` IoU with any
/// ground-truth span.
pub fn top1_hit(preds: &[MomentSpan], gts: &[MomentSpan], threshold: f64) -> bool {
    rank_spans(preds)
        .first()
        .is_some_and(|top| gts.iter().any(|g| iou_1d(top, g) >= threshold))
}
