//! `gen-data`: write a moving-sprite VSEQ file plus a JSON provenance
//! sidecar.

use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use mimo_seer_core::data::{generate_sprites, read_idx, write_vseq, SpriteKind, SpriteWorldConfig};

use crate::config::hash_of;
use crate::{commands::note, Cli, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum KindArg {
    Disk,
    Square,
    Cross,
    Digit,
}

#[derive(Args)]
pub struct GenDataArgs {
    /// Sprites per sequence.
    #[arg(long, default_value_t = 2)]
    pub sprites: usize,

    /// Frames per sequence.
    #[arg(long, default_value_t = 10)]
    pub frames: usize,

    /// Canvas edge (square frames).
    #[arg(long, default_value_t = 16)]
    pub size: usize,

    /// Number of sequences.
    #[arg(long, default_value_t = 64)]
    pub count: usize,

    #[arg(long, value_enum, default_value_t = KindArg::Disk)]
    pub kind: KindArg,

    /// Sprite bitmap edge in pixels.
    #[arg(long, default_value_t = 5)]
    pub sprite_size: usize,

    #[arg(long, default_value_t = 1.0)]
    pub speed_min: f64,

    #[arg(long, default_value_t = 2.0)]
    pub speed_max: f64,

    /// Let sprites leave through walls instead of bouncing.
    #[arg(long)]
    pub no_bounce: bool,

    /// IDX image file for digit sprites.
    #[arg(long)]
    pub idx_images: Option<PathBuf>,

    /// IDX label file matching --idx-images.
    #[arg(long)]
    pub idx_labels: Option<PathBuf>,

    /// Output VSEQ path.
    #[arg(long, default_value = "data.vseq")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Provenance<'a> {
    config_hash: String,
    command: &'static str,
    world: &'a SpriteWorldConfig,
    idx_images: Option<String>,
}

pub fn run(cli: &Cli, args: &GenDataArgs) -> CliResult<()> {
    let kind = match args.kind {
        KindArg::Disk => SpriteKind::Disk,
        KindArg::Square => SpriteKind::Square,
        KindArg::Cross => SpriteKind::Cross,
        KindArg::Digit => SpriteKind::DigitFromIdx,
    };
    if kind == SpriteKind::DigitFromIdx && args.idx_images.is_none() {
        return Err(CliError::Usage(
            "--kind digit needs --idx-images (and optionally --idx-labels)".into(),
        ));
    }

    let world = SpriteWorldConfig {
        height: args.size,
        width: args.size,
        num_sprites: args.sprites,
        kind,
        sprite_size: args.sprite_size,
        speed_min: args.speed_min,
        speed_max: args.speed_max,
        seq_len: args.frames,
        num_sequences: args.count,
        seed: cli.seed.unwrap_or(0),
        bounce: !args.no_bounce,
    };

    let bank = match &args.idx_images {
        Some(images) => Some(read_idx(images, args.idx_labels.as_deref())?),
        None => None,
    };

    let mut ds = generate_sprites(&world, bank.as_ref())?;
    let hash = hash_of(&world);
    ds.config_hash = hash.clone();

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(mimo_seer_core::Error::from)?;
        }
    }
    write_vseq(&ds, &args.out)?;

    let sidecar = Provenance {
        config_hash: hash.clone(),
        command: "gen-data",
        world: &world,
        idx_images: args.idx_images.as_ref().map(|p| p.display().to_string()),
    };
    let sidecar_path = args.out.with_extension("vseq.json");
    std::fs::write(
        &sidecar_path,
        serde_json::to_string_pretty(&sidecar).map_err(mimo_seer_core::Error::from)?,
    )
    .map_err(mimo_seer_core::Error::from)?;

    note(
        cli,
        format!(
            "wrote {} sequences ({} frames of {}x{}) to {} [config {hash}]",
            ds.sequences,
            ds.seq_len,
            ds.height,
            ds.width,
            args.out.display()
        ),
    );
    Ok(())
}
