//! Frame feature container.
//!
//! `<split>.features.bin` holds `f64` little-endian values of shape
//! `[n, 3, frames, dim]` (variant order middle, left, right) and
//! `<split>.features.json` describes it.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::qvh::{load_qvh_jsonl, write_qvh_jsonl, OnRecordError};
use super::{FrameVariants, VideoSample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureHeader {
    pub dtype: String,
    pub shape: [usize; 4],
    pub variants: Vec<String>,
    pub qids: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitPaths {
    pub jsonl: PathBuf,
    pub bin: PathBuf,
    pub header: PathBuf,
}

pub fn split_paths(dir: &Path, split: &str) -> SplitPaths {
    SplitPaths {
        jsonl: dir.join(format!("{split}.jsonl")),
        bin: dir.join(format!("{split}.features.bin")),
        header: dir.join(format!("{split}.features.json")),
    }
}

/// Write the features of `samples`; every sample must carry features of the
/// same shape.
pub fn write_features(bin: &Path, header: &Path, samples: &[VideoSample]) -> Result<()> {
    let (frames, dim) = match samples.first().and_then(|s| s.features.as_ref()) {
        Some(f) => (f.frames, f.dim),
        None if samples.is_empty() => (0, 0),
        None => return Err(Error::invalid("sample has no features")),
    };
    let mut bytes = Vec::with_capacity(samples.len() * 3 * frames * dim * 8);
    for s in samples {
        let f = s
            .features
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("qid {} has no features", s.qid)))?;
        if (f.frames, f.dim) != (frames, dim) {
            return Err(Error::invalid(format!("qid {} has features of a different shape", s.qid)));
        }
        for v in [&f.middle, &f.left, &f.right] {
            if v.len() != frames * dim {
                return Err(Error::invalid(format!("qid {}: feature length mismatch", s.qid)));
            }
            bytes.extend(v.iter().flat_map(|x| x.to_le_bytes()));
        }
    }
    let head = FeatureHeader {
        dtype: "f64-le".into(),
        shape: [samples.len(), 3, frames, dim],
        variants: vec!["middle".into(), "left".into(), "right".into()],
        qids: samples.iter().map(|s| s.qid).collect(),
    };
    std::fs::write(bin, bytes).map_err(|e| Error::io(format!("writing {}", bin.display()), e))?;
    std::fs::write(header, serde_json::to_vec_pretty(&head)?)
        .map_err(|e| Error::io(format!("writing {}", header.display()), e))
}

/// Attach stored features to `samples` by qid.
pub fn read_features(bin: &Path, header: &Path, samples: &mut [VideoSample]) -> Result<()> {
    let text = std::fs::read(header).map_err(|e| Error::io(format!("reading {}", header.display()), e))?;
    let head: FeatureHeader = serde_json::from_slice(&text)?;
    if head.dtype != "f64-le" {
        return Err(Error::invalid(format!("unsupported feature dtype {}", head.dtype)));
    }
    let [n, variants, frames, dim] = head.shape;
    if variants != 3 || head.qids.len() != n {
        return Err(Error::invalid(format!("{}: inconsistent shape", header.display())));
    }
    let bytes = std::fs::read(bin).map_err(|e| Error::io(format!("reading {}", bin.display()), e))?;
    let per = frames * dim;
    if bytes.len() != n * 3 * per * 8 {
        return Err(Error::invalid(format!(
            "{}: {} bytes, expected {}",
            bin.display(),
            bytes.len(),
            n * 3 * per * 8
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let index: HashMap<u64, usize> = head.qids.iter().enumerate().map(|(i, &q)| (q, i)).collect();
    for s in samples.iter_mut() {
        let i = *index
            .get(&s.qid)
            .ok_or_else(|| Error::invalid(format!("no features for qid {}", s.qid)))?;
        let base = i * 3 * per;
        let take = |v: usize| values[base + v * per..base + (v + 1) * per].to_vec();
        s.features = Some(FrameVariants {
            frames,
            dim,
            middle: take(0),
            left: take(1),
            right: take(2),
        });
    }
    Ok(())
}

/// Write `<split>.jsonl` plus its feature container into `dir`.
pub fn write_split(dir: &Path, split: &str, samples: &[VideoSample]) -> Result<SplitPaths> {
    let p = split_paths(dir, split);
    write_qvh_jsonl(&p.jsonl, samples)?;
    write_features(&p.bin, &p.header, samples)?;
    Ok(p)
}

/// Read a split written by [`write_split`].
pub fn load_split(dir: &Path, split: &str, on_error: OnRecordError) -> Result<Vec<VideoSample>> {
    let p = split_paths(dir, split);
    let mut samples = load_qvh_jsonl(&p.jsonl, on_error)?;
    read_features(&p.bin, &p.header, &mut samples)?;
    Ok(samples)
}
