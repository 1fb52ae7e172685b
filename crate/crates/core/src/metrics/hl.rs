/// Annotator rating that marks a clip as a positive highlight.
pub const HL_POSITIVE_RATING: u8 = 4;

/// Clip indices by descending score; equal scores keep index order.
pub fn rank_clips(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    idx
}

/// Interpolated ranked-retrieval AP of `scores` against binary `relevant`.
/// Zero when nothing is relevant.
pub fn ranked_ap(scores: &[f64], relevant: &[bool]) -> f64 {
    let order = rank_clips(scores);
    let n_pos = relevant.iter().filter(|&&r| r).count();
    if n_pos == 0 {
        return 0.0;
    }
    let mut precision = Vec::with_capacity(order.len());
    let mut is_pos = Vec::with_capacity(order.len());
    let mut hits = 0.0;
    for (k, &i) in order.iter().enumerate() {
        if relevant[i] {
            hits += 1.0;
        }
        precision.push(hits / (k + 1) as f64);
        is_pos.push(relevant[i]);
    }
    for k in (0..precision.len().saturating_sub(1)).rev() {
        precision[k] = precision[k].max(precision[k + 1]);
    }
    precision
        .iter()
        .zip(&is_pos)
        .filter(|(_, &p)| p)
        .map(|(p, _)| p)
        .sum::<f64>()
        / n_pos as f64
}

/// Per-query highlight scores: the mean AP over annotators and whether the
/// top clip is positive for any annotator. `None` when no annotator marks any
/// clip positive.
pub fn query_hl(scores: &[f64], ratings: &[Vec<u8>]) -> Option<(f64, bool)> {
    let annotators = ratings.first().map_or(0, Vec::len);
    let positive = |clip: usize, a: usize| ratings[clip][a] >= HL_POSITIVE_RATING;
    if annotators == 0 || !(0..ratings.len()).any(|c| (0..annotators).any(|a| positive(c, a))) {
        return None;
    }
    let ap = (0..annotators)
        .map(|a| {
            let rel: Vec<bool> = (0..ratings.len()).map(|c| positive(c, a)).collect();
            ranked_ap(scores, &rel)
        })
        .sum::<f64>()
        / annotators as f64;
    let top = rank_clips(scores)[0];
    let hit = (0..annotators).any(|a| positive(top, a));
    Some((ap, hit))
}
