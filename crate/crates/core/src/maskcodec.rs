//! Conversions between mask text, per-frame bits, moment spans and ground-truth
//! labels.

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::timeline::Timeline;

/// Binary foreground mask over the sampled frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMask {
    pub bits: Vec<bool>,
    /// Foreground probability per frame, when the mask came from a decoder.
    pub probs: Option<Vec<f64>>,
}

impl FrameMask {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        Self { bits, probs: None }
    }

    pub fn with_probs(bits: Vec<bool>, probs: Vec<f64>) -> Result<Self> {
        if bits.len() != probs.len() {
            return Err(Error::invalid(format!(
                "mask has {} bits but {} probabilities",
                bits.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(format!("probability {p} outside [0, 1]")));
        }
        Ok(Self {
            bits,
            probs: Some(probs),
        })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// True when every bit equals `probs[i] >= 0.5`.
    pub fn is_consistent(&self) -> bool {
        match &self.probs {
            None => true,
            Some(p) => self.bits.iter().zip(p).all(|(&b, &p)| b == (p >= 0.5)),
        }
    }

    pub fn render(&self) -> String {
        render_mask(&self.bits)
    }
}

/// Half-open `[start, end)` interval in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSpan {
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl MomentSpan {
    pub fn new(start: f64, end: f64) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || start < 0.0 || start >= end {
            return Err(Error::invalid(format!("invalid span [{start}, {end})")));
        }
        Ok(Self {
            start,
            end,
            confidence: None,
        })
    }

    pub fn scored(start: f64, end: f64, confidence: f64) -> Result<Self> {
        let mut s = Self::new(start, end)?;
        s.confidence = Some(confidence);
        Ok(s)
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParseMode {
    /// Exactly `f` characters, all `0` or `1`.
    Strict,
    /// Drop anything that is not `0`/`1`, truncate to `f`, right-pad with `0`.
    #[default]
    Lenient,
}

pub fn parse_mask(text: &str, frames: usize, mode: ParseMode) -> Result<FrameMask> {
    if frames == 0 {
        return Err(Error::invalid("frame count must be >= 1"));
    }
    match mode {
        ParseMode::Strict => {
            let mut bits = Vec::with_capacity(frames);
            for (position, c) in text.chars().enumerate() {
                match c {
                    '0' => bits.push(false),
                    '1' => bits.push(true),
                    other => {
                        return Err(Error::MaskParse {
                            position,
                            reason: format!("unexpected character {other:?}"),
                        })
                    }
                }
                if bits.len() > frames {
                    return Err(Error::MaskParse {
                        position,
                        reason: format!("mask longer than {frames} characters"),
                    });
                }
            }
            if bits.len() < frames {
                return Err(Error::MaskParse {
                    position: bits.len(),
                    reason: format!("mask has {} characters, expected {frames}", bits.len()),
                });
            }
            Ok(FrameMask::from_bits(bits))
        }
        ParseMode::Lenient => {
            let mut bits: Vec<bool> = text
                .chars()
                .filter_map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .take(frames)
                .collect();
            if bits.len() < frames {
                debug!("lenient mask parse padded {} frames", frames - bits.len());
                bits.resize(frames, false);
            }
            Ok(FrameMask::from_bits(bits))
        }
    }
}

pub fn render_mask(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Maximal runs of foreground frames, as time spans.
pub fn mask_to_moments(bits: &[bool], tl: &Timeline) -> Result<Vec<MomentSpan>> {
    check_len(bits.len(), tl)?;
    let mut spans = Vec::new();
    let mut run_start = None;
    for (i, &b) in bits.iter().chain(std::iter::once(&false)).enumerate() {
        match (b, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                spans.push(MomentSpan {
                    start: tl.boundary(s),
                    end: tl.boundary(i),
                    confidence: None,
                });
                run_start = None;
            }
            _ => {}
        }
    }
    Ok(spans)
}

/// Ground-truth labels: a frame is foreground when its centre falls inside
/// any span.
pub fn moments_to_mask(spans: &[MomentSpan], tl: &Timeline) -> Vec<bool> {
    (0..tl.frames())
        .map(|i| {
            let c = tl.center(i);
            spans.iter().any(|s| s.contains(c))
        })
        .collect()
}

/// Attach a confidence to every span (mean foreground probability of the
/// frames centred inside it) and sort by confidence, highest first.
///
/// Ties keep the earlier span first.
pub fn score_spans(spans: &[MomentSpan], probs: &[f64], tl: &Timeline) -> Result<Vec<MomentSpan>> {
    check_len(probs.len(), tl)?;
    let mut scored: Vec<MomentSpan> = spans
        .iter()
        .map(|s| {
            let inside: Vec<f64> = (0..tl.frames())
                .filter(|&i| s.contains(tl.center(i)))
                .map(|i| probs[i])
                .collect();
            let confidence = if inside.is_empty() {
                let mid = 0.5 * (s.start + s.end);
                let nearest = tl.frame_at(mid);
                warn!(
                    "span [{:.3}, {:.3}) holds no frame centre; using frame {nearest}",
                    s.start, s.end
                );
                probs[nearest]
            } else {
                inside.iter().sum::<f64>() / inside.len() as f64
            };
            MomentSpan {
                confidence: Some(confidence),
                ..*s
            }
        })
        .collect();
    scored.sort_by(|a, b| {
        let (ca, cb) = (a.confidence.unwrap_or(0.0), b.confidence.unwrap_or(0.0));
        cb.total_cmp(&ca).then(a.start.total_cmp(&b.start))
    });
    Ok(scored)
}

fn check_len(n: usize, tl: &Timeline) -> Result<()> {
    if n != tl.frames() {
        return Err(Error::invalid(format!(
            "got {n} frames, timeline has {}",
            tl.frames()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ANSWER: &str = "0000000000001111111111010";

    #[test]
    fn strict_parse_answer_example() {
        let m = parse_mask(ANSWER, 25, ParseMode::Strict).unwrap();
        let ones: Vec<usize> = m.bits.iter().enumerate().filter(|(_, b)| **b).map(|(i, _)| i).collect();
        let mut want: Vec<usize> = (12..=21).collect();
        want.push(23);
        assert_eq!(ones, want);
        assert_eq!(parse_mask("111", 3, ParseMode::Strict).unwrap().bits, vec![true; 3]);
    }

    #[test]
    fn strict_parse_errors_name_position() {
        match parse_mask("10x", 3, ParseMode::Strict) {
            Err(Error::MaskParse { position, .. }) => assert_eq!(position, 2),
            other => panic!("{other:?}"),
        }
        match parse_mask("10", 3, ParseMode::Strict) {
            Err(Error::MaskParse { position, .. }) => assert_eq!(position, 2),
            other => panic!("{other:?}"),
        }
        match parse_mask("1010", 3, ParseMode::Strict) {
            Err(Error::MaskParse { position, .. }) => assert_eq!(position, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lenient_parse() {
        assert_eq!(
            parse_mask("10x1", 3, ParseMode::Lenient).unwrap().bits,
            vec![true, false, true]
        );
        assert_eq!(
            parse_mask("1", 3, ParseMode::Lenient).unwrap().bits,
            vec![true, false, false]
        );
        assert_eq!(parse_mask("", 2, ParseMode::Lenient).unwrap().bits, vec![false; 2]);
    }

    #[test]
    fn answer_mask_to_moments() {
        let tl = Timeline::uniform(150.0, 25).unwrap();
        let m = parse_mask(ANSWER, 25, ParseMode::Strict).unwrap();
        let spans = mask_to_moments(&m.bits, &tl).unwrap();
        let pairs: Vec<(f64, f64)> = spans.iter().map(|s| (s.start, s.end)).collect();
        assert_eq!(pairs, vec![(72.0, 132.0), (138.0, 144.0)]);
        assert_eq!(moments_to_mask(&spans, &tl), m.bits);
    }

    #[test]
    fn degenerate_masks() {
        let tl = Timeline::uniform(30.0, 5).unwrap();
        assert!(mask_to_moments(&[false; 5], &tl).unwrap().is_empty());
        let all = mask_to_moments(&[true; 5], &tl).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!((all[0].start, all[0].end), (0.0, 30.0));
        assert_eq!(moments_to_mask(&[], &tl), vec![false; 5]);
        assert_eq!(moments_to_mask(&all, &tl), vec![true; 5]);
        assert!(mask_to_moments(&[true; 4], &tl).is_err());
    }

    #[test]
    fn span_scores() {
        let tl = Timeline::uniform(8.0, 4).unwrap();
        let span = MomentSpan::new(2.0, 6.0).unwrap();
        let s = score_spans(&[span], &[0.2, 0.8, 0.6, 0.1], &tl).unwrap();
        assert!((s[0].confidence.unwrap() - 0.7).abs() < 1e-12);

        let s = score_spans(&[span], &[0.9; 4], &tl).unwrap();
        assert!((s[0].confidence.unwrap() - 0.9).abs() < 1e-12);

        let a = MomentSpan::new(0.0, 2.0).unwrap();
        let b = MomentSpan::new(6.0, 8.0).unwrap();
        let s = score_spans(&[a, b], &[0.4, 0.0, 0.0, 0.9], &tl).unwrap();
        assert_eq!(s[0].start, 6.0);
        assert_eq!(s[1].start, 0.0);
    }

    #[test]
    fn span_without_centre_uses_nearest_frame() {
        let tl = Timeline::uniform(8.0, 4).unwrap();
        // centres at 1, 3, 5, 7
        let span = MomentSpan::new(3.2, 4.8).unwrap();
        let s = score_spans(&[span], &[0.1, 0.2, 0.3, 0.4], &tl).unwrap();
        assert_eq!(s[0].confidence, Some(0.3));
    }

    #[test]
    fn consistency_flag() {
        let m = FrameMask::with_probs(vec![true, false], vec![0.5, 0.49]).unwrap();
        assert!(m.is_consistent());
        let m = FrameMask::with_probs(vec![false, false], vec![0.5, 0.49]).unwrap();
        assert!(!m.is_consistent());
        assert!(FrameMask::with_probs(vec![true], vec![1.5]).is_err());
    }
}
