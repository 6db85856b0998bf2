//! Deterministic moving-sprite sequence generation: sprites travel in
//! straight lines, reflect off walls, and composite by per-pixel max.

use serde::{Deserialize, Serialize};

use crate::data::{idx::SpriteBank, Dataset};
use crate::error::{Error, Result};
use crate::numerics::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpriteKind {
    Disk,
    Square,
    Cross,
    DigitFromIdx,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpriteWorldConfig {
    pub height: usize,
    pub width: usize,
    pub num_sprites: usize,
    pub kind: SpriteKind,
    /// Sprite bitmap edge in pixels (ignored for IDX digits).
    pub sprite_size: usize,
    /// Speed range in pixels per frame.
    pub speed_min: f64,
    pub speed_max: f64,
    pub seq_len: usize,
    pub num_sequences: usize,
    pub seed: u64,
    /// Reflective walls.
    pub bounce: bool,
}

impl Default for SpriteWorldConfig {
    fn default() -> Self {
        SpriteWorldConfig {
            height: 16,
            width: 16,
            num_sprites: 2,
            kind: SpriteKind::Disk,
            sprite_size: 5,
            speed_min: 1.0,
            speed_max: 2.0,
            seq_len: 10,
            num_sequences: 64,
            seed: 0,
            bounce: true,
        }
    }
}

impl SpriteWorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sprite_size == 0 || self.sprite_size >= self.height.min(self.width) {
            return Err(Error::invalid(format!(
                "sprite size {} must be positive and smaller than the {}x{} canvas",
                self.sprite_size, self.height, self.width
            )));
        }
        if self.speed_min <= 0.0 || self.speed_max < self.speed_min {
            return Err(Error::invalid("speed range must satisfy 0 < min <= max"));
        }
        if self.seq_len < 2 {
            return Err(Error::invalid("seq_len must be >= 2"));
        }
        if self.num_sequences == 0 || self.num_sprites == 0 {
            return Err(Error::invalid("need at least one sequence and one sprite"));
        }
        Ok(())
    }
}

/// A sprite bitmap, values in [0,1].
struct Bitmap {
    h: usize,
    w: usize,
    pixels: Vec<f64>,
}

fn make_bitmap(kind: SpriteKind, size: usize) -> Bitmap {
    let mut pixels = vec![0.0; size * size];
    let c = (size as f64 - 1.0) / 2.0;
    match kind {
        SpriteKind::Square => pixels.fill(1.0),
        SpriteKind::Disk => {
            let r2 = (size as f64 / 2.0) * (size as f64 / 2.0);
            for i in 0..size {
                for j in 0..size {
                    let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
                    if d2 <= r2 {
                        pixels[i * size + j] = 1.0;
                    }
                }
            }
        }
        SpriteKind::Cross => {
            let arm = (size / 3).max(1);
            let lo = (size - arm) / 2;
            let hi = lo + arm;
            for i in 0..size {
                for j in 0..size {
                    if (lo..hi).contains(&i) || (lo..hi).contains(&j) {
                        pixels[i * size + j] = 1.0;
                    }
                }
            }
        }
        SpriteKind::DigitFromIdx => unreachable!("digit sprites come from the bank"),
    }
    Bitmap {
        h: size,
        w: size,
        pixels,
    }
}

struct Sprite {
    bitmap: usize,
    /// Top-left position, sub-pixel.
    y: f64,
    x: f64,
    vy: f64,
    vx: f64,
}

/// Generate a dataset from the configuration, optionally drawing digit
/// bitmaps from an IDX sprite bank. Fully determined by (config, seed).
pub fn generate_sprites(cfg: &SpriteWorldConfig, bank: Option<&SpriteBank>) -> Result<Dataset> {
    cfg.validate()?;
    let bitmaps: Vec<Bitmap> = match cfg.kind {
        SpriteKind::DigitFromIdx => {
            let bank = bank.ok_or_else(|| {
                Error::invalid("digit_from_idx sprites need an IDX sprite bank")
            })?;
            if bank.images.is_empty() {
                return Err(Error::invalid("IDX sprite bank is empty"));
            }
            if bank.rows >= cfg.height || bank.cols >= cfg.width {
                return Err(Error::invalid(format!(
                    "digit bitmaps {}x{} do not fit the {}x{} canvas",
                    bank.rows, bank.cols, cfg.height, cfg.width
                )));
            }
            bank.images
                .iter()
                .map(|img| Bitmap {
                    h: bank.rows,
                    w: bank.cols,
                    pixels: img.clone(),
                })
                .collect()
        }
        kind => vec![make_bitmap(kind, cfg.sprite_size)],
    };

    let frame_size = cfg.height * cfg.width;
    let mut data = vec![0.0f32; cfg.num_sequences * cfg.seq_len * frame_size];
    for seq in 0..cfg.num_sequences {
        let mut rng = Rng::derive(cfg.seed, seq as u64);
        let mut sprites: Vec<Sprite> = (0..cfg.num_sprites)
            .map(|_| {
                let bitmap = if bitmaps.len() > 1 {
                    rng.below(bitmaps.len())
                } else {
                    0
                };
                let bm = &bitmaps[bitmap];
                let y = rng.uniform_range(0.0, (cfg.height - bm.h) as f64);
                let x = rng.uniform_range(0.0, (cfg.width - bm.w) as f64);
                let speed = rng.uniform_range(cfg.speed_min, cfg.speed_max);
                let angle = rng.uniform_range(0.0, std::f64::consts::TAU);
                Sprite {
                    bitmap,
                    y,
                    x,
                    vy: speed * angle.sin(),
                    vx: speed * angle.cos(),
                }
            })
            .collect();

        for frame in 0..cfg.seq_len {
            let canvas = &mut data[(seq * cfg.seq_len + frame) * frame_size
                ..(seq * cfg.seq_len + frame + 1) * frame_size];
            for s in &sprites {
                let bm = &bitmaps[s.bitmap];
                // nearest-pixel placement of the sub-pixel position
                let py = (s.y.round() as isize).clamp(0, (cfg.height - bm.h) as isize) as usize;
                let px = (s.x.round() as isize).clamp(0, (cfg.width - bm.w) as isize) as usize;
                for i in 0..bm.h {
                    for j in 0..bm.w {
                        let v = bm.pixels[i * bm.w + j] as f32;
                        let c = &mut canvas[(py + i) * cfg.width + px + j];
                        if v > *c {
                            *c = v;
                        }
                    }
                }
            }
            // advance with clamp-and-flip reflection
            for s in &mut sprites {
                let bm = &bitmaps[s.bitmap];
                let (max_y, max_x) = ((cfg.height - bm.h) as f64, (cfg.width - bm.w) as f64);
                s.y += s.vy;
                s.x += s.vx;
                if cfg.bounce {
                    if s.y < 0.0 {
                        s.y = 0.0;
                        s.vy = -s.vy;
                    } else if s.y > max_y {
                        s.y = max_y;
                        s.vy = -s.vy;
                    }
                    if s.x < 0.0 {
                        s.x = 0.0;
                        s.vx = -s.vx;
                    } else if s.x > max_x {
                        s.x = max_x;
                        s.vx = -s.vx;
                    }
                } else {
                    s.y = s.y.clamp(0.0, max_y);
                    s.x = s.x.clamp(0.0, max_x);
                }
            }
        }
    }

    Ok(Dataset {
        sequences: cfg.num_sequences,
        seq_len: cfg.seq_len,
        channels: 1,
        height: cfg.height,
        width: cfg.width,
        data,
        split: "all".to_string(),
        config_hash: String::new(),
        seed: cfg.seed,
    })
}
