//! `compare`: frame-wise error curves for the mimo, miso and copy-last
//! strategies from one checkpoint, plus an optional aggregate-MSE
//! sweep over the conditioning length.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mimo_seer_core::baselines::{
    copy_last, framewise_error_curve, rollout, CurveMetric, RolloutCurve, RolloutStrategy,
};
use mimo_seer_core::data::Dataset;
use mimo_seer_core::model::{ModelConfig, Parameters};
use mimo_seer_core::numerics::ops::concat;
use mimo_seer_core::numerics::Tape;
use mimo_seer_core::training::load_checkpoint;
use mimo_seer_core::{Error, Result, Tensor};

use crate::commands::{csv_writer, load_or_generate, load_run_config, note, select_split, SplitChoice};
use crate::{Cli, CliError, CliResult};

#[derive(Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Rollout horizon (default: 4x the native one).
    #[arg(long)]
    pub horizon: Option<usize>,

    #[arg(long, value_enum, default_value_t = SplitChoice::Eval)]
    pub split: SplitChoice,

    /// Report per-pixel mean instead of per-frame sums.
    #[arg(long)]
    pub per_pixel: bool,

    /// Multi-column layout (one column per strategy) instead of
    /// step,strategy,value rows.
    #[arg(long)]
    pub wide: bool,

    /// Also sweep aggregate MSE over conditioning lengths 1..=m
    /// (re-evaluation with a front-padded window).
    #[arg(long)]
    pub sweep_m: bool,

    /// Output CSV path.
    #[arg(long, default_value = "curves.csv")]
    pub out: PathBuf,
}

/// Rollout curves for the three strategies over a whole split.
pub fn strategy_curves(
    params: &Parameters,
    config: &ModelConfig,
    data: &Dataset,
    horizon: usize,
    metric: CurveMetric,
) -> Result<Vec<RolloutCurve>> {
    if data.seq_len < config.m + horizon {
        return Err(Error::invalid(format!(
            "sequences of length {} cannot supply m + horizon = {} frames",
            data.seq_len,
            config.m + horizon
        )));
    }
    let all: Vec<usize> = (0..data.sequences).collect();
    let truth = data.continuation(&all, config.m, horizon)?;
    let tape = Tape::no_grad();

    let mut curves = Vec::new();
    for strategy in [RolloutStrategy::Mimo, RolloutStrategy::Miso] {
        let mut chunks = Vec::new();
        for chunk in all.chunks(16) {
            let x = data.conditioning(chunk, config.m)?;
            chunks.push(rollout(params, config, &x, horizon, strategy)?);
        }
        let refs: Vec<&Tensor> = chunks.iter().collect();
        let pred = concat(&tape, &refs, 0)?;
        curves.push(framewise_error_curve(&pred, &truth, metric, strategy.label())?);
    }

    // copy-last floor
    let mut chunks = Vec::new();
    for &i in &all {
        let x = data.conditioning(&[i], config.m)?;
        let frames = mimo_seer_core::numerics::ops::reshape(
            &tape,
            &x,
            &[config.m, data.channels, data.height, data.width],
        )?;
        let pred = copy_last(&frames, horizon)?;
        chunks.push(mimo_seer_core::numerics::ops::reshape(
            &tape,
            &pred,
            &[1, horizon, data.channels, data.height, data.width],
        )?);
    }
    let refs: Vec<&Tensor> = chunks.iter().collect();
    let pred = concat(&tape, &refs, 0)?;
    curves.push(framewise_error_curve(&pred, &truth, metric, "copy_last")?);
    Ok(curves)
}

/// Aggregate per-pixel MSE at the native horizon when only the last
/// `m_used` conditioning frames carry information (the front of the
/// window is padded by repeating the oldest kept frame).
pub fn input_length_sweep(
    params: &Parameters,
    config: &ModelConfig,
    data: &Dataset,
) -> Result<Vec<(usize, f64)>> {
    let all: Vec<usize> = (0..data.sequences).collect();
    let truth = data.continuation(&all, config.m, config.n)?;
    let tape = Tape::no_grad();
    let mut rows = Vec::new();
    for m_used in 1..=config.m {
        let mut chunks = Vec::new();
        for chunk in all.chunks(16) {
            let x = data.conditioning(chunk, config.m)?;
            let x = pad_front(&x, config.m - m_used)?;
            let out = mimo_seer_core::model::model_forward(&tape, &x, params, config, false)?;
            chunks.push(out.prediction);
        }
        let refs: Vec<&Tensor> = chunks.iter().collect();
        let pred = concat(&tape, &refs, 0)?;
        let mse = mimo_seer_core::metrics::mse_per_pixel(&pred, &truth)?;
        rows.push((m_used, mse));
    }
    Ok(rows)
}

/// Replace the first `pad` frames with copies of frame `pad` (the
/// oldest frame that is kept).
fn pad_front(x: &Tensor, pad: usize) -> Result<Tensor> {
    if pad == 0 {
        return Ok(x.clone());
    }
    let s = x.shape().to_vec();
    let frame: usize = s[2..].iter().product();
    let mut data = x.to_vec();
    let m = s[1];
    for b in 0..s[0] {
        let base = b * m * frame;
        let src = data[base + pad * frame..base + (pad + 1) * frame].to_vec();
        for t in 0..pad {
            data[base + t * frame..base + (t + 1) * frame].copy_from_slice(&src);
        }
    }
    Tensor::from_vec(data, &s)
}

pub fn run(cli: &Cli, args: &CompareArgs) -> CliResult<()> {
    let mut cfg = load_run_config(cli)?;
    if let Some(data) = &args.data {
        cfg.data.path = Some(data.clone());
    }
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let horizon = args.horizon.unwrap_or(4 * ckpt.config.n);
    if horizon < 1 {
        return Err(CliError::Usage("--horizon must be >= 1".into()));
    }
    let metric = if args.per_pixel {
        CurveMetric::MsePerPixel
    } else {
        CurveMetric::MseSum
    };

    let dataset = load_or_generate(cli, &cfg, &ckpt.config)?;
    let split = select_split(&dataset, &cfg, args.split)?;
    note(
        cli,
        format!(
            "comparing strategies over {} sequences, horizon {horizon}",
            split.sequences
        ),
    );

    let curves = strategy_curves(&ckpt.params, &ckpt.config, &split, horizon, metric)?;
    if args.wide {
        let header = {
            let names: Vec<&str> = curves.iter().map(|c| c.strategy.as_str()).collect();
            format!("step,{}", names.join(","))
        };
        let mut w = csv_writer(&args.out, &ckpt.config_hash, &header)?;
        for t in 0..horizon {
            let row: Vec<String> = curves.iter().map(|c| format!("{}", c.values[t])).collect();
            writeln!(w, "{},{}", t + 1, row.join(",")).map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
    } else {
        let mut w = csv_writer(&args.out, &ckpt.config_hash, "step,strategy,value")?;
        for c in &curves {
            for (t, v) in c.values.iter().enumerate() {
                writeln!(w, "{},{},{}", t + 1, c.strategy, v).map_err(Error::from)?;
            }
        }
        w.flush().map_err(Error::from)?;
    }
    note(cli, format!("wrote curves to {}", args.out.display()));

    if args.sweep_m {
        let rows = input_length_sweep(&ckpt.params, &ckpt.config, &split)?;
        let sweep_path = args.out.with_extension("sweep_m.csv");
        let mut w = csv_writer(&sweep_path, &ckpt.config_hash, "m,mse_per_pixel")?;
        for (m, v) in rows {
            writeln!(w, "{m},{v}").map_err(Error::from)?;
        }
        w.flush().map_err(Error::from)?;
        note(cli, format!("wrote input-length sweep to {}", sweep_path.display()));
    }
    Ok(())
}
