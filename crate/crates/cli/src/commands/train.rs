//! `train`: run the training loop with periodic checkpoints, then
//! write the loss history CSV and final evaluation metrics.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mimo_seer_core::training::{load_checkpoint, save_checkpoint, Trainer};
use mimo_seer_core::Error;

use crate::commands::{csv_writer, load_or_generate, load_run_config, note, select_split, SplitChoice};
use crate::{Cli, CliError, CliResult};

#[derive(Args)]
pub struct TrainArgs {
    /// VSEQ dataset (overrides the configured path).
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Step budget (overrides the configured one).
    #[arg(long)]
    pub steps: Option<usize>,

    /// Continue from a checkpoint.
    #[arg(long)]
    pub resume: Option<PathBuf>,

    /// Output directory (overrides the configured one).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: &Cli, args: &TrainArgs) -> CliResult<()> {
    let mut cfg = load_run_config(cli)?;
    if let Some(data) = &args.data {
        cfg.data.path = Some(data.clone());
    }
    if let Some(steps) = args.steps {
        cfg.train.steps = steps;
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    cfg.model.validate()?;
    let hash = cfg.hash();
    let out_dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(Error::from)?;

    // resolved configuration is itself an artifact
    let mut config_doc = serde_json::to_value(&cfg).map_err(Error::from)?;
    config_doc["config_hash"] = serde_json::Value::String(hash.clone());
    std::fs::write(
        out_dir.join("config.json"),
        serde_json::to_string_pretty(&config_doc).map_err(Error::from)?,
    )
    .map_err(Error::from)?;

    let dataset = load_or_generate(cli, &cfg, &cfg.model)?;
    let train_split = select_split(&dataset, &cfg, SplitChoice::Train)?;
    let eval_split = select_split(&dataset, &cfg, SplitChoice::Eval)?;
    note(
        cli,
        format!(
            "training on {} sequences, holding out {} [config {hash}]",
            train_split.sequences, eval_split.sequences
        ),
    );

    let mut trainer = match &args.resume {
        Some(ckpt_path) => {
            let ckpt = load_checkpoint(ckpt_path)?;
            if ckpt.config != cfg.model {
                return Err(CliError::Core(Error::format(format!(
                    "checkpoint {} was trained with a different model configuration",
                    ckpt_path.display()
                ))));
            }
            note(cli, format!("resuming from step {}", ckpt.step));
            Trainer::from_checkpoint(ckpt)?
        }
        None => Trainer::new(cfg.model.clone(), cfg.train.clone(), cfg.seed)?,
    };

    let total = cfg.train.steps;
    let every = cfg.checkpoint_every.max(1);
    while trainer.step < total {
        let chunk = every.min(total - trainer.step);
        trainer.run(&train_split, chunk, |_| {})?;
        if trainer.step < total {
            let path = out_dir.join(format!("checkpoint-{}.mvpc", trainer.step));
            save_checkpoint(&path, &trainer.snapshot(&hash))?;
            let last = trainer.history.last().expect("steps ran");
            note(
                cli,
                format!(
                    "step {}: loss {:.6} lr {:.2e} (checkpoint {})",
                    last.step,
                    last.loss,
                    last.lr,
                    path.display()
                ),
            );
        }
    }

    let final_path = out_dir.join("checkpoint.mvpc");
    save_checkpoint(&final_path, &trainer.snapshot(&hash))?;

    // loss history: step,loss,lr
    let mut w = csv_writer(&out_dir.join("loss.csv"), &hash, "step,loss,lr")?;
    for rec in &trainer.history {
        writeln!(w, "{},{},{}", rec.step, rec.loss, rec.lr).map_err(Error::from)?;
    }
    w.flush().map_err(Error::from)?;

    // final evaluation on the held-out split at the native horizon
    if eval_split.sequences > 0 && eval_split.seq_len >= cfg.model.m + cfg.model.n {
        let mut report = super::eval::evaluate_split(
            &trainer.params,
            &cfg.model,
            &eval_split,
            cfg.model.n,
            &cfg.csi_thresholds,
        )?;
        report.config_hash = hash.clone();
        std::fs::write(
            out_dir.join("metrics.json"),
            serde_json::to_string_pretty(&report).map_err(Error::from)?,
        )
        .map_err(Error::from)?;
        note(
            cli,
            format!(
                "finished {} steps: eval per-pixel mse {:.6}, ssim {:.4}",
                trainer.step, report.aggregates.mse_per_pixel, report.aggregates.ssim
            ),
        );
    } else {
        note(cli, format!("finished {} steps (no eval split)", trainer.step));
    }
    Ok(())
}
