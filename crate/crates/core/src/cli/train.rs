use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::predict::predict_all;
use crate::data::{corpus_vocab, encode_example, load_split, prompt_slots, OnRecordError, VideoSample};
use crate::error::{Error, Result};
use crate::losses::{lr_schedule, weight_schedule, LossBreakdown, LossWeights};
use crate::metrics::{evaluate, MetricsReport};
use crate::model::{accumulate_gradients, AdamW, Checkpoint, ToyDecoder, ToyModelConfig};

/// Room left in the position table for prompts longer than the training ones.
const SEQ_MARGIN: usize = 32;

/// One optimizer step of the loss curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub epoch: usize,
    pub step: usize,
    pub losses: LossBreakdown,
    pub lr: f64,
    pub weights: LossWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    pub epoch: usize,
    pub frame_accuracy: f64,
    pub metrics: MetricsReport,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub model: ToyDecoder,
    /// Rows written by this invocation.
    pub steps: Vec<StepRow>,
    pub epochs: Vec<EpochRow>,
    pub last_checkpoint: PathBuf,
}

pub const LOSS_CSV: &str = "loss.csv";
pub const EPOCH_CSV: &str = "epochs.csv";

const LOSS_HEADER: &str = "epoch,step,lm,bce,tv,gd,total,lr,w_lm,w_bce,w_tv,w_gd,config_hash,seed";
const EPOCH_HEADER: &str = "epoch,frame_acc,R1@0.5,R1@0.7,mAP@0.5,mAP@0.75,mAP_avg,HL_mAP,HL_HIT@1,config_hash,seed";

pub fn checkpoint_path(out_dir: &Path, epoch: usize) -> PathBuf {
    out_dir.join("checkpoints").join(format!("epoch-{epoch:03}.ckpt"))
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(format!("writing {}", path.display()), e)
}

/// Keep the header and rows of epochs `<= keep_epoch` from an earlier run.
fn prepare_csv(path: &Path, header: &str, keep_epoch: usize) -> Result<String> {
    let mut text = format!("{header}\n");
    if keep_epoch == 0 {
        return Ok(text);
    }
    if let Ok(old) = std::fs::read_to_string(path) {
        for line in old.lines().skip(1) {
            let epoch: usize = line.split(',').next().and_then(|e| e.parse().ok()).unwrap_or(usize::MAX);
            if epoch <= keep_epoch {
                text.push_str(line);
                text.push('\n');
            }
        }
    }
    Ok(text)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:.4}"))
}

/// Load the configured corpus and train.
pub fn cmd_train(cfg: &RunConfig, resume: Option<&Path>) -> Result<TrainOutcome> {
    let train = load_split(&cfg.corpus_dir, "train", OnRecordError::Abort)?;
    let val = match load_split(&cfg.corpus_dir, "val", OnRecordError::Abort) {
        Ok(v) => v,
        Err(Error::Io { .. }) => {
            warn!("no validation split in {}", cfg.corpus_dir.display());
            Vec::new()
        }
        Err(e) => return Err(e),
    };
    train_model(cfg, &train, &val, resume)
}

fn model_config(cfg: &RunConfig, train: &[VideoSample], val: &[VideoSample]) -> Result<ToyModelConfig> {
    let vocab = corpus_vocab(train, cfg.frames)?;
    let dim = train[0]
        .features
        .as_ref()
        .ok_or_else(|| Error::invalid("training samples carry no features"))?
        .dim;
    let mut longest = 0;
    for s in train.iter().chain(val) {
        longest = longest.max(prompt_slots(&s.query, cfg.frames, &vocab)?.len());
    }
    Ok(ToyModelConfig {
        d_model: cfg.d_model,
        n_layers: cfg.n_layers,
        n_heads: cfg.n_heads,
        vocab,
        frame_feature_dim: dim,
        frames: cfg.frames,
        max_seq_len: longest + cfg.frames + 1 + SEQ_MARGIN,
        init_std: cfg.init_std,
    })
}

/// Train on `train`, validating on `val`, writing the loss curve, epoch table
/// and one checkpoint per epoch under `cfg.out_dir`.
///
/// A resumed run continues from the checkpoint's epoch and reproduces the
/// uninterrupted run exactly: shuffling and variant choices are drawn from a
/// generator seeded by `(seed, epoch)`.
pub fn train_model(cfg: &RunConfig, train: &[VideoSample], val: &[VideoSample], resume: Option<&Path>) -> Result<TrainOutcome> {
    if train.is_empty() {
        return Err(Error::invalid("training split is empty"));
    }
    let out = &cfg.out_dir;
    std::fs::create_dir_all(out.join("checkpoints")).map_err(io(out))?;
    let hash = cfg.hash();
    let echo = serde_json::json!({ "config": cfg.to_json(), "config_hash": hash });
    std::fs::write(
        out.join("config.toml"),
        format!("# config_hash = \"{hash}\"\n{}", cfg.to_toml()),
    )
    .map_err(io(out))?;

    let (mut model, mut opt, done_epochs) = match resume {
        Some(path) => {
            let ckpt = Checkpoint::load(path)?;
            if ckpt.run_config.get("config_hash").and_then(|h| h.as_str()) != Some(hash.as_str()) {
                warn!("resuming from a checkpoint written under a different configuration");
            }
            let model = ckpt.model()?;
            let opt = ckpt
                .optimizer
                .clone()
                .ok_or_else(|| Error::Checkpoint("checkpoint holds no optimizer state".into()))?;
            info!("resuming after epoch {}", ckpt.epoch);
            (model, opt, ckpt.epoch)
        }
        None => {
            let model = ToyDecoder::new(model_config(cfg, train, val)?, cfg.seed)?;
            let opt = AdamW::new(model.params(), cfg.adam());
            (model, opt, 0)
        }
    };
    if model.config().frames != cfg.frames {
        return Err(Error::Usage("checkpoint frame count differs from the config".into()));
    }

    let f = cfg.frames;
    let vocab = model.config().vocab.clone();
    let micro_per_epoch = train.len().div_ceil(cfg.batch_size);
    let steps_per_epoch = micro_per_epoch.div_ceil(cfg.grad_accum);
    let total_steps = steps_per_epoch * cfg.epochs;
    let warmup_steps = (steps_per_epoch * cfg.warmup_epochs).min(total_steps);
    let params = cfg.loss_params();

    let loss_path = out.join(LOSS_CSV);
    let epoch_path = out.join(EPOCH_CSV);
    let mut loss_csv = prepare_csv(&loss_path, LOSS_HEADER, done_epochs)?;
    let mut epoch_csv = prepare_csv(&epoch_path, EPOCH_HEADER, done_epochs)?;

    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    let mut last_checkpoint = resume.map(Path::to_path_buf).unwrap_or_default();

    for epoch in done_epochs + 1..=cfg.epochs {
        let started = Instant::now();
        let weights = weight_schedule(epoch, cfg.warmup_epochs, &LossWeights::LM_ONLY, &LossWeights::WARM)?;
        let mut rng = ChaCha8Rng::seed_from_u64(crate::data::derive_seed(cfg.seed, epoch as u64));
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng);
        let examples = order
            .iter()
            .map(|&i| encode_example(&train[i], f, &vocab, cfg.variation, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        let micro: Vec<_> = examples.chunks(cfg.batch_size).collect();

        for (s, group) in micro.chunks(cfg.grad_accum).enumerate() {
            let global = (epoch - 1) * steps_per_epoch + s;
            let mut grads = model.params().zeros_like();
            let scale = 1.0 / group.len() as f64;
            let mut sum = [0.0; 4];
            for batch in group {
                let l = match accumulate_gradients(&model, batch, &weights, &params, &mut grads, scale) {
                    Ok(l) => l,
                    Err(e @ Error::Numeric(_)) => {
                        let path = out.join("checkpoints").join("abort.ckpt");
                        Checkpoint::from_model(&model, Some(&opt), epoch - 1, cfg.seed, echo.clone()).save(&path)?;
                        std::fs::write(&loss_path, &loss_csv).map_err(io(&loss_path))?;
                        warn!("epoch {epoch} step {s}: {e}; state saved to {}", path.display());
                        return Err(e);
                    }
                    Err(e) => return Err(e),
                };
                for (acc, v) in sum.iter_mut().zip([l.lm, l.bce, l.tversky, l.dice]) {
                    *acc += v * scale;
                }
            }
            let [lm, bce, tversky, dice] = sum;
            let losses = LossBreakdown {
                lm,
                bce,
                tversky,
                dice,
                total: crate::losses::combined_loss(lm, bce, tversky, dice, &weights),
            };
            let lr = lr_schedule(global + 1, total_steps, warmup_steps, cfg.lr);
            opt.step(model.params_mut(), &grads, lr);
            let w = weights.as_array();
            writeln!(
                loss_csv,
                "{epoch},{global},{lm:.10e},{bce:.10e},{tversky:.10e},{dice:.10e},{:.10e},{lr:.6e},{},{},{},{},{hash},{}",
                losses.total, w[0], w[1], w[2], w[3], cfg.seed
            )
            .expect("write to string");
            steps.push(StepRow {
                epoch,
                step: global,
                losses,
                lr,
                weights,
            });
        }
        std::fs::write(&loss_path, &loss_csv).map_err(io(&loss_path))?;

        let path = checkpoint_path(out, epoch);
        Checkpoint::from_model(&model, Some(&opt), epoch, cfg.seed, echo.clone()).save(&path)?;
        last_checkpoint = path;

        let due = epoch == cfg.epochs || (cfg.val_every > 0 && epoch % cfg.val_every == 0);
        let mean_total = steps.iter().rev().take(steps_per_epoch).map(|r| r.losses.total).sum::<f64>()
            / steps_per_epoch as f64;
        if due && !val.is_empty() {
            let (records, acc) = predict_all(&model, val, cfg.beams, cfg.constrained)?;
            let (metrics, _) = evaluate(&records, val)?;
            info!(
                "epoch {epoch}: loss {mean_total:.4}, val frame acc {acc:.4}, mAP_avg {:.2}, HIT@1 {} ({:.1}s)",
                metrics.map_avg,
                opt_pct(metrics.hl_hit1),
                started.elapsed().as_secs_f64()
            );
            writeln!(
                epoch_csv,
                "{epoch},{acc:.6},{:.4},{:.4},{:.4},{:.4},{:.4},{},{},{hash},{}",
                metrics.r1_05,
                metrics.r1_07,
                metrics.map_05,
                metrics.map_075,
                metrics.map_avg,
                opt_pct(metrics.hl_map),
                opt_pct(metrics.hl_hit1),
                cfg.seed
            )
            .expect("write to string");
            std::fs::write(&epoch_path, &epoch_csv).map_err(io(&epoch_path))?;
            epochs.push(EpochRow {
                epoch,
                frame_accuracy: acc,
                metrics,
            });
        } else {
            info!(
                "epoch {epoch}: loss {mean_total:.4} ({:.1}s)",
                started.elapsed().as_secs_f64()
            );
        }
    }
    std::fs::write(&epoch_path, &epoch_csv).map_err(io(&epoch_path))?;

    Ok(TrainOutcome {
        model,
        steps,
        epochs,
        last_checkpoint,
    })
}
