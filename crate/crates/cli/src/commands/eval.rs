//! `eval`: deterministic evaluation of a checkpoint, with
//! block-recursive rollout when the horizon exceeds the native one.

use std::path::PathBuf;

use clap::Args;

use mimo_seer_core::baselines::{rollout, RolloutStrategy};
use mimo_seer_core::data::Dataset;
use mimo_seer_core::metrics::{evaluate, MetricsReport};
use mimo_seer_core::model::{model_forward, ModelConfig, Parameters};
use mimo_seer_core::numerics::ops::concat;
use mimo_seer_core::numerics::Tape;
use mimo_seer_core::training::load_checkpoint;
use mimo_seer_core::{Error, Result};

use crate::commands::{load_run_config, note, parse_threshold_list, select_split, SplitChoice};
use crate::{Cli, CliError, CliResult};

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    /// VSEQ dataset; defaults to the configured/generated one.
    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Prediction horizon; beyond the native n this triggers
    /// block-recursive rollout.
    #[arg(long)]
    pub horizon: Option<usize>,

    /// Comma-separated CSI thresholds on the [0,1] pixel scale.
    #[arg(long)]
    pub csi_thresholds: Option<String>,

    #[arg(long, value_enum, default_value_t = SplitChoice::Eval)]
    pub split: SplitChoice,

    /// Output JSON path.
    #[arg(long, default_value = "metrics.json")]
    pub out: PathBuf,
}

/// Batched prediction over every sequence of a dataset split.
/// Sequences are processed in fixed order, in chunks.
pub fn predict_split(
    params: &Parameters,
    config: &ModelConfig,
    data: &Dataset,
    horizon: usize,
) -> Result<(mimo_seer_core::Tensor, mimo_seer_core::Tensor)> {
    let all: Vec<usize> = (0..data.sequences).collect();
    let mut preds = Vec::new();
    let tape = Tape::no_grad();
    for chunk in all.chunks(16) {
        let x = data.conditioning(chunk, config.m)?;
        let pred = if horizon <= config.n {
            let out = model_forward(&tape, &x, params, config, false)?;
            if horizon == config.n {
                out.prediction
            } else {
                mimo_seer_core::numerics::ops::narrow(&tape, &out.prediction, 1, 0, horizon)?
            }
        } else {
            rollout(params, config, &x, horizon, RolloutStrategy::Mimo)?
        };
        preds.push(pred);
    }
    let refs: Vec<&mimo_seer_core::Tensor> = preds.iter().collect();
    let prediction = concat(&tape, &refs, 0)?;
    let truth = data.continuation(&all, config.m, horizon)?;
    Ok((prediction, truth))
}

/// Evaluate one split at a horizon (native forward or block-recursive
/// rollout); aggregates are pooled over all sequences.
pub fn evaluate_split(
    params: &Parameters,
    config: &ModelConfig,
    data: &Dataset,
    horizon: usize,
    thresholds: &[f64],
) -> Result<MetricsReport> {
    if data.seq_len < config.m + horizon {
        return Err(Error::invalid(format!(
            "sequences of length {} cannot supply m + horizon = {} frames",
            data.seq_len,
            config.m + horizon
        )));
    }
    let (prediction, truth) = predict_split(params, config, data, horizon)?;
    let mut report = evaluate(&prediction, &truth, thresholds)?;
    report.native_horizon = config.n;
    report.horizon = horizon;
    report.recursive = horizon > config.n;
    Ok(report)
}

pub fn run(cli: &Cli, args: &EvalArgs) -> CliResult<()> {
    let mut cfg = load_run_config(cli)?;
    if let Some(data) = &args.data {
        cfg.data.path = Some(data.clone());
    }
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let horizon = args.horizon.unwrap_or(ckpt.config.n);
    if horizon < 1 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    let thresholds = match &args.csi_thresholds {
        Some(raw) => parse_threshold_list(raw)?,
        None => cfg.csi_thresholds.clone(),
    };

    let dataset = load_or_generate_for_eval(cli, &cfg, &ckpt.config)?;
    let split = select_split(&dataset, &cfg, args.split)?;
    note(
        cli,
        format!(
            "evaluating {} sequences at horizon {horizon} (native {})",
            split.sequences, ckpt.config.n
        ),
    );

    let mut report = evaluate_split(&ckpt.params, &ckpt.config, &split, horizon, &thresholds)?;
    report.config_hash = ckpt.config_hash.clone();

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(Error::from)?;
        }
    }
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&report).map_err(Error::from)?,
    )
    .map_err(Error::from)?;
    note(
        cli,
        format!(
            "frame-sum mse {:.4}, per-pixel mse {:.6}, ssim {:.4}, psnr {:.2} -> {}",
            report.aggregates.mse,
            report.aggregates.mse_per_pixel,
            report.aggregates.ssim,
            report.aggregates.psnr,
            args.out.display()
        ),
    );
    Ok(())
}

fn load_or_generate_for_eval(
    cli: &Cli,
    cfg: &crate::config::RunConfig,
    model: &ModelConfig,
) -> CliResult<Dataset> {
    crate::commands::load_or_generate(cli, cfg, model)
}
