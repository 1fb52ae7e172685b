use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use frameseg::cli::{self, parse_override, RunConfig};
use frameseg::data::SYSTEM_PROMPT;
use frameseg::Error;

/// Frame segmentation for moment retrieval and highlight detection.
#[derive(Parser)]
#[command(name = "fseg", version)]
struct Cli {
    /// TOML file of `key = value` settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override one setting, e.g. `--set lr=1e-3`. Repeatable.
    #[arg(long = "set", value_parser = parse_override, global = true)]
    overrides: Vec<(String, String)>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus.
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overwrite a non-empty output directory.
        #[arg(long)]
        force: bool,
    },
    /// Train the toy decoder on a corpus.
    Train {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from a checkpoint written by an earlier run.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Decode a corpus split into prediction JSONL.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long, default_value = "val")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predictions against ground truth.
    Score {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        /// Metrics JSON; the per-query breakdown goes next to it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Foreground/background statistics of a JSONL split.
    Stats {
        input: PathBuf,
        #[arg(long)]
        frames: Option<usize>,
    },
    /// Print the user prompt for a query.
    Prompt {
        query: Option<String>,
        #[arg(long)]
        frames: Option<usize>,
        /// Print the system prompt instead.
        #[arg(long)]
        system: bool,
    },
}

fn path_set(key: &str, v: &Option<PathBuf>) -> Option<(String, String)> {
    v.as_ref().map(|p| (key.to_string(), p.display().to_string()))
}

fn run(cli: Cli) -> frameseg::Result<()> {
    let mut overrides = cli.overrides.clone();
    if let Some(s) = cli.seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    let extra: Vec<Option<(String, String)>> = match &cli.command {
        Command::Synth { out, .. } => vec![path_set("corpus_dir", out)],
        Command::Train {
            corpus, out, epochs, ..
        } => vec![
            path_set("corpus_dir", corpus),
            path_set("out_dir", out),
            epochs.map(|e| ("epochs".into(), e.to_string())),
        ],
        Command::Predict { corpus, .. } => vec![path_set("corpus_dir", corpus)],
        Command::Stats { frames, .. } | Command::Prompt { frames, .. } => {
            vec![frames.map(|f| ("frames".into(), f.to_string()))]
        }
        Command::Score { .. } => vec![],
    };
    overrides.extend(extra.into_iter().flatten());
    let cfg = RunConfig::resolve(cli.config.as_deref(), &overrides)?;

    match cli.command {
        Command::Synth { force, .. } => {
            let m = cli::cmd_synth(&cfg, force)?;
            println!("{}", serde_json::to_string_pretty(&m)?);
        }
        Command::Train { resume, .. } => {
            let out = cli::cmd_train(&cfg, resume.as_deref())?;
            if let Some(last) = out.epochs.last() {
                println!("{}", cli::format_report(&last.metrics));
                println!("frame_acc {:>7.4}", last.frame_accuracy);
            }
            println!("checkpoint {}", out.last_checkpoint.display());
        }
        Command::Predict {
            checkpoint, split, out, ..
        } => {
            let records = cli::cmd_predict(&cfg, &checkpoint, &split, &out)?;
            eprintln!("wrote {} predictions to {}", records.len(), out.display());
        }
        Command::Score {
            predictions,
            ground_truth,
            out,
        } => {
            let (s, _) = cli::cmd_score(&predictions, &ground_truth, out.as_deref())?;
            println!("{}", cli::format_report(&s.report));
        }
        Command::Stats { input, .. } => {
            let s = cli::cmd_stats(&input, cfg.frames)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Prompt { query, system, .. } => {
            if system {
                print!("{SYSTEM_PROMPT}");
            } else {
                let q = query.ok_or_else(|| Error::Usage("prompt needs a query".into()))?;
                print!("{}", cli::cmd_prompt(&q, cfg.frames)?);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
