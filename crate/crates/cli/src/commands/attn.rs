//! `attn`: dump temporal attention maps from a checkpoint as CSV.

use std::io::Write;
use std::path::PathBuf;

use clap::Args;

use mimo_seer_core::model::{extract_attention, model_forward, AttentionFilter, AttentionKind};
use mimo_seer_core::numerics::Tape;
use mimo_seer_core::training::load_checkpoint;
use mimo_seer_core::Error;

use crate::commands::{csv_writer, load_or_generate, load_run_config, note, select_split, SplitChoice};
use crate::{Cli, CliError, CliResult};

#[derive(Args)]
pub struct AttnArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,

    #[arg(long)]
    pub data: Option<PathBuf>,

    /// Restrict to one decoder/encoder layer index.
    #[arg(long)]
    pub layer: Option<usize>,

    /// Restrict to one map kind (encoder_self, decoder_self,
    /// decoder_cross).
    #[arg(long)]
    pub kind: Option<String>,

    /// Also emit the per-layer sum over heads (head column `sum`).
    #[arg(long)]
    pub sum_heads: bool,

    /// Output CSV path.
    #[arg(long, default_value = "attn.csv")]
    pub out: PathBuf,
}

pub fn run(cli: &Cli, args: &AttnArgs) -> CliResult<()> {
    let mut cfg = load_run_config(cli)?;
    if let Some(data) = &args.data {
        cfg.data.path = Some(data.clone());
    }
    let ckpt = load_checkpoint(&args.checkpoint)?;
    let kind: Option<AttentionKind> = match &args.kind {
        Some(raw) => Some(raw.parse().map_err(|e| CliError::Usage(format!("{e}")))?),
        None => None,
    };
    if let Some(layer) = args.layer {
        let max_layers = ckpt.config.enc_blocks.max(ckpt.config.dec_blocks);
        if layer >= max_layers {
            return Err(CliError::Usage(format!(
                "--layer {layer} out of range (encoder {} / decoder {} blocks)",
                ckpt.config.enc_blocks, ckpt.config.dec_blocks
            )));
        }
    }

    let dataset = load_or_generate(cli, &cfg, &ckpt.config)?;
    let split = select_split(&dataset, &cfg, SplitChoice::Eval)?;
    // probe with the first held-out sequence
    let probe = split.conditioning(&[0], ckpt.config.m)?;
    let tape = Tape::no_grad();
    let out = model_forward(&tape, &probe, &ckpt.params, &ckpt.config, true)?;
    if out.attention.is_empty() {
        return Err(CliError::Core(Error::invalid(
            "this model records no attention (attention disabled by configuration)",
        )));
    }

    let records = extract_attention(
        &out.attention,
        AttentionFilter {
            kind,
            layer: args.layer,
        },
    )?;

    let mut w = csv_writer(&args.out, &ckpt.config_hash, "kind,layer,head,query,key,weight")?;
    let mut rows = 0usize;
    for rec in &records {
        if rec.head.is_none() && !args.sum_heads {
            continue;
        }
        let head = match rec.head {
            Some(h) => h.to_string(),
            None => "sum".to_string(),
        };
        for q in 0..rec.rows {
            for k in 0..rec.cols {
                // 9 significant digits
                writeln!(
                    w,
                    "{},{},{},{},{},{:.8e}",
                    rec.kind,
                    rec.layer,
                    head,
                    q,
                    k,
                    rec.map[q * rec.cols + k]
                )
                .map_err(Error::from)?;
                rows += 1;
            }
        }
    }
    w.flush().map_err(Error::from)?;
    note(cli, format!("wrote {rows} attention entries to {}", args.out.display()));
    Ok(())
}
