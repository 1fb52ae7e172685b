//! Run configuration: defaults, a flat TOML file, then command-line
//! overrides, later sources winning.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{SynthConfig, Variation};
use crate::error::{Error, Result};
use crate::losses::{LossParams, DEFAULT_BETA, DEFAULT_POS_WEIGHT, EPSILON};
use crate::model::AdamHyper;

/// Every knob of a run. Defaults are the large-model fine-tuning setup; the
/// toy model dimensions are ours.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub lr: f64,
    pub grad_accum: usize,
    pub batch_size: usize,
    pub weight_decay: f64,
    pub tversky_alpha: f64,
    pub tversky_beta: f64,
    pub pos_weight: f64,
    /// Epochs over which loss weights ramp and the learning rate warms up.
    pub warmup_epochs: usize,
    pub epochs: usize,
    pub frames: usize,
    pub beams: usize,
    /// Restrict decoding to `0`/`1` then EOS.
    pub constrained: bool,
    pub variation: Variation,
    /// Run validation every this many epochs (0 disables it); the last epoch
    /// is always validated.
    pub val_every: usize,

    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub init_std: f64,

    pub corpus_dir: PathBuf,
    pub out_dir: PathBuf,

    pub synth_train: usize,
    pub synth_val: usize,
    pub synth_duration: f64,
    pub synth_feature_dim: usize,
    pub synth_min_segments: usize,
    pub synth_max_segments: usize,
    pub synth_noise_std: f64,
    pub synth_activities: usize,
    pub synth_distractors: usize,
    pub synth_grid: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        Self {
            seed: 0,
            lr: 2e-5,
            grad_accum: 4,
            batch_size: 16,
            weight_decay: 0.005,
            tversky_alpha: 1.0 - DEFAULT_BETA,
            tversky_beta: DEFAULT_BETA,
            pos_weight: DEFAULT_POS_WEIGHT,
            warmup_epochs: 6,
            epochs: 11,
            frames: 25,
            beams: 2,
            constrained: true,
            variation: Variation::Random,
            val_every: 1,
            d_model: 64,
            n_layers: 2,
            n_heads: 4,
            init_std: 0.02,
            corpus_dir: PathBuf::from("corpus"),
            out_dir: PathBuf::from("run"),
            synth_train: 500,
            synth_val: 100,
            synth_duration: 150.0,
            synth_feature_dim: synth.feature_dim,
            synth_min_segments: synth.min_segments,
            synth_max_segments: synth.max_segments,
            synth_noise_std: synth.noise_std,
            synth_activities: synth.n_activities,
            synth_distractors: synth.n_distractors,
            synth_grid: synth.grid,
        }
    }
}

impl RunConfig {
    /// Merge defaults, the optional TOML file and `overrides`
    /// (`key=value`, value in TOML syntax or a bare string).
    pub fn resolve(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match toml::Value::try_from(Self::default()) {
            Ok(toml::Value::Table(t)) => t,
            _ => unreachable!("config serializes to a table"),
        };
        if let Some(path) = file {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
            let from_file: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            for (k, v) in from_file {
                let v = coerce(table.get(&k), v);
                info!("config {k} = {v} (file)");
                table.insert(k, v);
            }
        }
        for (k, raw) in overrides {
            let v = match table.get(k) {
                Some(toml::Value::String(_)) => toml::Value::String(raw.clone()),
                default => coerce(default, parse_value(raw)),
            };
            info!("config {k} = {v} (flag)");
            table.insert(k.clone(), v);
        }
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.frames == 0 || self.batch_size == 0 || self.grad_accum == 0 || self.beams == 0 {
            return bad("frames, batch_size, grad_accum and beams must be >= 1");
        }
        if self.epochs == 0 || self.warmup_epochs == 0 {
            return bad("epochs and warmup_epochs must be >= 1");
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad("lr must be > 0");
        }
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model must be a positive multiple of n_heads");
        }
        self.loss_params().validate().map_err(|e| Error::Config(e.to_string()))
    }

    pub fn loss_params(&self) -> LossParams {
        LossParams {
            pos_weight: self.pos_weight,
            alpha: self.tversky_alpha,
            beta: self.tversky_beta,
            epsilon: EPSILON,
        }
    }

    pub fn adam(&self) -> AdamHyper {
        AdamHyper {
            weight_decay: self.weight_decay,
            ..AdamHyper::default()
        }
    }

    /// Synthetic corpus settings for one split.
    pub fn synth(&self, n_samples: usize, first_qid: u64) -> SynthConfig {
        SynthConfig {
            n_samples,
            frames: self.frames,
            duration: self.synth_duration,
            feature_dim: self.synth_feature_dim,
            min_segments: self.synth_min_segments,
            max_segments: self.synth_max_segments,
            noise_std: self.synth_noise_std,
            seed: self.seed,
            n_activities: self.synth_activities,
            n_distractors: self.synth_distractors,
            grid: self.synth_grid,
            first_qid,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the config's JSON form, leaving
    /// out the input and output directories so a moved run keeps its hash.
    pub fn hash(&self) -> String {
        let mut v = self.to_json();
        if let Some(m) = v.as_object_mut() {
            m.remove("corpus_dir");
            m.remove("out_dir");
        }
        let digest = Sha256::digest(v.to_string().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Integers are accepted where the default is a float.
fn coerce(default: Option<&toml::Value>, v: toml::Value) -> toml::Value {
    match (default, v) {
        (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
        (_, v) => v,
    }
}

fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Split `key=value`.
pub fn parse_override(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .filter(|(k, _)| !k.is_empty())
        .ok_or_else(|| format!("expected key=value, got {s:?}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_the_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.lr, 2e-5);
        assert_eq!((c.grad_accum, c.batch_size, c.warmup_epochs, c.epochs), (4, 16, 6, 11));
        assert_eq!((c.frames, c.beams), (25, 2));
        assert_eq!(c.weight_decay, 0.005);
        assert_eq!(c.tversky_beta, 0.7);
        assert_eq!(c.pos_weight, 2.3378);
    }

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "epochs = 3\nlr = 0.001\nout_dir = \"x\"\nsynth_duration = 20\n").unwrap();
        let c = RunConfig::resolve(
            Some(&p),
            &[
                ("epochs".into(), "5".into()),
                ("out_dir".into(), "123".into()),
                ("synth_grid".into(), "1".into()),
            ],
        )
        .unwrap();
        assert_eq!(c.synth_duration, 20.0);
        assert_eq!(c.synth_grid, 1.0);
        assert_eq!(c.epochs, 5);
        assert_eq!(c.lr, 0.001);
        assert_eq!(c.out_dir, PathBuf::from("123"));
        assert_eq!(c.frames, 25);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_config_errors() {
        let e = RunConfig::resolve(None, &[("epoch".into(), "5".into())]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let e = RunConfig::resolve(None, &[("frames".into(), "0".into())]).unwrap_err();
        assert_eq!(e.exit_code(), 1);
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, c.to_toml()).unwrap();
        assert_eq!(RunConfig::resolve(Some(&p), &[]).unwrap(), c);
    }
}
