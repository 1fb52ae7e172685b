//! Brute-force reference implementations, written independently of the
//! library code they check.

use frameseg::MomentSpan;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

fn overlap(a: &MomentSpan, b: &MomentSpan) -> f64 {
    let lo = a.start.max(b.start);
    let hi = a.end.min(b.end);
    if hi <= lo {
        return 0.0;
    }
    let inter = hi - lo;
    inter / ((a.end - a.start) + (b.end - b.start) - inter)
}

/// AP of a TP/FP sequence in rank order: each true positive contributes
/// `1/n_gt` times the best precision reached at or below its rank.
pub fn ap_of_flags(tp: &[bool], n_gt: usize) -> f64 {
    let prec: Vec<f64> = (0..tp.len())
        .map(|k| tp[..=k].iter().filter(|&&t| t).count() as f64 / (k + 1) as f64)
        .collect();
    (0..tp.len())
        .filter(|&k| tp[k])
        .map(|k| prec[k..].iter().copied().fold(0.0, f64::max))
        .sum::<f64>()
        / n_gt as f64
}

/// Best AP over every injective assignment of predictions to ground-truth
/// spans with IoU at least `tau`. Predictions must arrive in rank order.
pub fn optimal_ap(ranked: &[MomentSpan], gts: &[MomentSpan], tau: f64) -> f64 {
    fn go(k: usize, ranked: &[MomentSpan], gts: &[MomentSpan], tau: f64, used: &mut Vec<bool>, tp: &mut Vec<bool>) -> f64 {
        if k == ranked.len() {
            return ap_of_flags(tp, gts.len());
        }
        tp.push(false);
        let mut best = go(k + 1, ranked, gts, tau, used, tp);
        tp.pop();
        for j in 0..gts.len() {
            if !used[j] && overlap(&ranked[k], &gts[j]) >= tau {
                used[j] = true;
                tp.push(true);
                best = best.max(go(k + 1, ranked, gts, tau, used, tp));
                tp.pop();
                used[j] = false;
            }
        }
        best
    }
    go(0, ranked, gts, tau, &mut vec![false; gts.len()], &mut Vec::new())
}

/// Up to `max_gt` disjoint spans in `[0, 100]` and up to `max_pred` scored
/// predictions, half of them jittered copies of a ground-truth span.
/// Predictions come back sorted by (distinct) confidence.
pub fn random_detection_instance(
    rng: &mut ChaCha8Rng,
    max_pred: usize,
    max_gt: usize,
) -> (Vec<MomentSpan>, Vec<MomentSpan>) {
    let n_gt = rng.random_range(1..=max_gt);
    let mut cuts: Vec<f64> = (0..2 * n_gt).map(|_| rng.random_range(0.0..100.0)).collect();
    cuts.sort_by(f64::total_cmp);
    let gts: Vec<MomentSpan> = cuts
        .chunks(2)
        .filter(|c| c[1] - c[0] > 0.5)
        .map(|c| MomentSpan::new(c[0], c[1]).unwrap())
        .collect();
    let gts = if gts.is_empty() { vec![MomentSpan::new(10.0, 30.0).unwrap()] } else { gts };
    let n_pred = rng.random_range(0..=max_pred);
    let mut preds = Vec::new();
    for _ in 0..n_pred {
        let (s, e) = if rng.random_bool(0.5) {
            let g = gts[rng.random_range(0..gts.len())];
            let len = g.end - g.start;
            let s = g.start + rng.random_range(-0.3..0.3) * len;
            let e = g.end + rng.random_range(-0.3..0.3) * len;
            (s.clamp(0.0, 99.0), e.clamp(0.0, 100.0))
        } else {
            let s = rng.random_range(0.0..95.0);
            (s, s + rng.random_range(1.0..40.0))
        };
        let e = e.max(s + 0.1).min(100.0);
        preds.push(MomentSpan::scored(s.min(e - 0.05), e, rng.random_range(0.0..1.0)).unwrap());
    }
    preds.sort_by(|a, b| b.confidence.unwrap().total_cmp(&a.confidence.unwrap()));
    (preds, gts)
}

/// Ranked-retrieval AP from its definition: rank by score descending, ties
/// by clip index; average over positives of the best precision at or below
/// each positive's rank. Zero without positives.
pub fn definition_ranked_ap(scores: &[f64], relevant: &[bool]) -> f64 {
    let n = scores.len();
    let mut rank = vec![0usize; n];
    for i in 0..n {
        rank[i] = (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count();
    }
    let mut order = vec![0usize; n];
    for i in 0..n {
        order[rank[i]] = i;
    }
    let tp: Vec<bool> = order.iter().map(|&i| relevant[i]).collect();
    let n_pos = relevant.iter().filter(|&&r| r).count();
    if n_pos == 0 {
        0.0
    } else {
        ap_of_flags(&tp, n_pos)
    }
}

/// Mean AP over annotators and top-1 hit, `None` without any positive.
pub fn definition_query_hl(scores: &[f64], ratings: &[Vec<u8>]) -> Option<(f64, bool)> {
    let annotators = ratings[0].len();
    if !ratings.iter().flatten().any(|&r| r == 4) {
        return None;
    }
    let ap = (0..annotators)
        .map(|a| {
            let rel: Vec<bool> = ratings.iter().map(|r| r[a] == 4).collect();
            definition_ranked_ap(scores, &rel)
        })
        .sum::<f64>()
        / annotators as f64;
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let top = scores.iter().position(|&s| s == best).unwrap();
    Some((ap, ratings[top].contains(&4)))
}

pub fn random_hl_instance(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<Vec<u8>>) {
    let clips = rng.random_range(1..16);
    // coarse scores so ties are common
    let scores = (0..clips).map(|_| rng.random_range(0..8) as f64 / 8.0).collect();
    let mut ratings: Vec<Vec<u8>> = (0..clips).map(|_| (0..3).map(|_| rng.random_range(0..=4)).collect()).collect();
    if !ratings.iter().flatten().any(|&r| r == 4) {
        let c = rng.random_range(0..clips);
        ratings[c][rng.random_range(0..3)] = 4;
    }
    (scores, ratings)
}
