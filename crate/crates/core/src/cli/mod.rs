//! Command implementations behind the `fseg` binary: `synth`, `train`,
//! `predict`, `score`, `stats` and `prompt`.

mod config;
mod predict;
mod train;

pub use config::{parse_override, RunConfig};
pub use predict::{cmd_predict, predict_all, predict_sample};
pub use train::{checkpoint_path, cmd_train, train_model, EpochRow, StepRow, TrainOutcome, EPOCH_CSV, LOSS_CSV};

use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::data::{build_prompt, dataset_stats, load_qvh_jsonl, synth_generate, write_split, DatasetStats, OnRecordError};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, load_predictions, MetricsReport, QueryScores};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub config_hash: String,
    pub seed: u64,
    pub splits: Vec<ManifestSplit>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSplit {
    pub name: String,
    pub samples: usize,
    pub files: Vec<PathBuf>,
}

/// Generate the train and validation splits into `cfg.corpus_dir`.
pub fn cmd_synth(cfg: &RunConfig, force: bool) -> Result<CorpusManifest> {
    let dir = &cfg.corpus_dir;
    let occupied = std::fs::read_dir(dir).map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !force {
        return Err(Error::Usage(format!(
            "{} exists and is not empty; pass --force to overwrite",
            dir.display()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))?;
    if cfg.synth_train + cfg.synth_val == 0 {
        warn!("no samples requested; writing an empty corpus");
    }
    let mut splits = Vec::new();
    for (name, n, first) in [("train", cfg.synth_train, 0), ("val", cfg.synth_val, cfg.synth_train as u64)] {
        let samples = synth_generate(&cfg.synth(n, first))?;
        let p = write_split(dir, name, &samples)?;
        splits.push(ManifestSplit {
            name: name.into(),
            samples: n,
            files: [p.jsonl, p.bin, p.header]
                .iter()
                .map(|f| f.file_name().map(PathBuf::from).unwrap_or_default())
                .collect(),
        });
    }
    let manifest = CorpusManifest {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        splits,
    };
    let path = dir.join("manifest.json");
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    info!("wrote corpus to {}", dir.display());
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreOutput {
    #[serde(flatten)]
    pub report: MetricsReport,
    pub queries: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

/// Score prediction JSONL against ground-truth JSONL. With `out`, writes the
/// report there and the per-query breakdown next to it.
pub fn cmd_score(predictions: &Path, ground_truth: &Path, out: Option<&Path>) -> Result<(ScoreOutput, Vec<QueryScores>)> {
    let (records, provenance) = load_predictions(predictions)?;
    let gt = load_qvh_jsonl(ground_truth, OnRecordError::Abort)?;
    let (report, per_query) = evaluate(&records, &gt)?;
    let output = ScoreOutput {
        report,
        queries: gt.len(),
        config_hash: provenance.as_ref().map(|p| p.config_hash.clone()),
        seed: provenance.map(|p| p.seed),
    };
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&output)?)
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
        let bpath = per_query_path(path);
        let mut text = String::new();
        for q in &per_query {
            text.push_str(&serde_json::to_string(q)?);
            text.push('\n');
        }
        std::fs::write(&bpath, text).map_err(|e| Error::io(format!("writing {}", bpath.display()), e))?;
    }
    Ok((output, per_query))
}

/// `metrics.json` → `metrics.per_query.jsonl`.
pub fn per_query_path(report: &Path) -> PathBuf {
    let stem = report.file_stem().and_then(|s| s.to_str()).unwrap_or("metrics");
    report.with_file_name(format!("{stem}.per_query.jsonl"))
}

/// Plain-text table of a report.
pub fn format_report(r: &MetricsReport) -> String {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.2}"));
    format!(
        "R1@0.5   {:>7.2}\nR1@0.7   {:>7.2}\nmAP@0.5  {:>7.2}\nmAP@0.75 {:>7.2}\nmAP_avg  {:>7.2}\nHL_mAP   {:>7}\nHL_HIT@1 {:>7}",
        r.r1_05,
        r.r1_07,
        r.map_05,
        r.map_075,
        r.map_avg,
        opt(r.hl_map),
        opt(r.hl_hit1)
    )
}

pub fn cmd_stats(jsonl: &Path, frames: usize) -> Result<DatasetStats> {
    let samples = load_qvh_jsonl(jsonl, OnRecordError::Abort)?;
    dataset_stats(&samples, frames)
}

pub fn cmd_prompt(query: &str, frames: usize) -> Result<String> {
    build_prompt(query, frames)
}
