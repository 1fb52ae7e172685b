//! Generate a small synthetic corpus and train the toy decoder on it.
//!
//! cargo run --release --example synth_train -- /tmp/fseg-demo

use std::path::PathBuf;

use frameseg::cli::{format_report, train_model, RunConfig};
use frameseg::data::synth_generate;

fn main() -> frameseg::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("fseg-demo"));
    let settings = [
        ("out_dir", out.display().to_string()),
        ("frames", "10".into()),
        ("epochs", "16".into()),
        ("warmup_epochs", "3".into()),
        ("lr", "1e-3".into()),
        ("batch_size", "16".into()),
        ("grad_accum", "1".into()),
        ("val_every", "8".into()),
        ("synth_duration", "20.0".into()),
        ("synth_noise_std", "0.3".into()),
    ];
    let overrides: Vec<(String, String)> = settings.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
    let cfg = RunConfig::resolve(None, &overrides)?;

    let train = synth_generate(&cfg.synth(400, 0))?;
    let val = synth_generate(&cfg.synth(60, 400))?;
    let outcome = train_model(&cfg, &train, &val, None)?;
    for e in &outcome.epochs {
        println!("epoch {:>2}  frame acc {:.4}", e.epoch, e.frame_accuracy);
        println!("{}", format_report(&e.metrics));
    }
    println!("loss curve and checkpoints in {}", out.display());
    Ok(())
}
