//! Subcommand implementations and the helpers they share.

pub mod ar_demo;
pub mod attn;
pub mod compare;
pub mod eval;
pub mod gen_data;
pub mod train;

use std::io::Write;
use std::path::Path;

use mimo_seer_core::data::{read_vseq, split, Dataset, SpriteKind, SpriteWorldConfig};
use mimo_seer_core::model::ModelConfig;
use mimo_seer_core::{Error, Result};

use crate::config::RunConfig;
use crate::{Cli, CliError, CliResult};

/// Print a progress line unless --quiet.
pub fn note(cli: &Cli, msg: impl AsRef<str>) {
    if !cli.quiet {
        println!("{}", msg.as_ref());
    }
}

/// Resolve the run configuration: file (if given) plus CLI overrides.
pub fn load_run_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

/// Load the configured dataset, or deterministically generate the
/// fallback sprite world matching the model extents.
pub fn load_or_generate(cli: &Cli, cfg: &RunConfig, model: &ModelConfig) -> CliResult<Dataset> {
    match &cfg.data.path {
        Some(path) => {
            let r = read_vseq(path)?;
            if r.clamped > 0 {
                note(cli, format!("warning: clamped {} out-of-range values in {}", r.clamped, path.display()));
            }
            let ds = r.dataset;
            if ds.channels != model.c0 || ds.height != model.h0 || ds.width != model.w0 {
                return Err(CliError::Core(Error::format(format!(
                    "dataset {}x{}x{} does not match model frames {}x{}x{}",
                    ds.channels, ds.height, ds.width, model.c0, model.h0, model.w0
                ))));
            }
            Ok(ds)
        }
        None => {
            if model.c0 != 1 {
                return Err(CliError::Core(Error::invalid(
                    "generated sprite data is single-channel; supply --data for multi-channel models",
                )));
            }
            let seq_len = if cfg.data.generated_seq_len == 0 {
                model.m + model.n
            } else {
                cfg.data.generated_seq_len
            };
            let world = SpriteWorldConfig {
                height: model.h0,
                width: model.w0,
                kind: SpriteKind::Disk,
                seq_len,
                num_sequences: cfg.data.generated_sequences,
                seed: cfg.seed,
                ..Default::default()
            };
            note(cli, format!(
                "generating {} sprite sequences of length {seq_len} at {}x{}",
                world.num_sequences, model.h0, model.w0
            ));
            Ok(mimo_seer_core::data::generate_sprites(&world, None)?)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SplitChoice {
    Train,
    Eval,
    All,
}

/// Apply the configured train/eval split and return the selected side.
pub fn select_split(ds: &Dataset, cfg: &RunConfig, which: SplitChoice) -> Result<Dataset> {
    match which {
        SplitChoice::All => Ok(ds.clone()),
        _ => {
            let (train, eval) = split(ds, cfg.data.train_frac, cfg.data.split_seed)?;
            Ok(match which {
                SplitChoice::Train => train,
                SplitChoice::Eval => eval,
                SplitChoice::All => unreachable!(),
            })
        }
    }
}

/// Create a CSV artifact carrying the config hash in a comment line.
pub fn csv_writer(path: &Path, config_hash: &str, header: &str) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# config {config_hash}")?;
    writeln!(w, "{header}")?;
    Ok(w)
}

pub fn parse_threshold_list(raw: &str) -> CliResult<Vec<f64>> {
    let mut out = Vec::new();
    for part in raw.split(',') {
        let t: f64 = part
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("bad threshold `{part}` in --csi-thresholds")))?;
        if !t.is_finite() {
            return Err(CliError::Usage(format!("non-finite threshold `{part}`")));
        }
        out.push(t);
    }
    if out.is_empty() {
        return Err(CliError::Usage("--csi-thresholds needs at least one value".into()));
    }
    Ok(out)
}
