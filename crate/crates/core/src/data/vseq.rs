//! VSEQ container: magic "VSEQ", version byte 1, five little-endian
//! u32 extents (N, L, C, H, W), then N*L*C*H*W IEEE-754 32-bit values
//! in [sequence][frame][channel][row][col] order.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VSEQ";
const VERSION: u8 = 1;

pub fn write_vseq(ds: &Dataset, path: &Path) -> Result<()> {
    ds.validate()?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    for extent in [ds.sequences, ds.seq_len, ds.channels, ds.height, ds.width] {
        let v = u32::try_from(extent)
            .map_err(|_| Error::format(format!("extent {extent} exceeds u32")))?;
        w.write_all(&v.to_le_bytes())?;
    }
    for v in &ds.data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub struct VseqRead {
    pub dataset: Dataset,
    /// Values outside [0,1] found on read; they are clamped.
    pub clamped: usize,
}

pub fn read_vseq(path: &Path) -> Result<VseqRead> {
    let mut r = BufReader::new(
        std::fs::File::open(path)
            .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut header = [0u8; 4 + 1 + 5 * 4];
    r.read_exact(&mut header)
        .map_err(|_| Error::format(format!("{}: truncated VSEQ header", path.display())))?;
    if &header[..4] != MAGIC {
        return Err(Error::format(format!(
            "{}: bad VSEQ magic {:?}",
            path.display(),
            &header[..4]
        )));
    }
    if header[4] != VERSION {
        return Err(Error::format(format!(
            "{}: unsupported VSEQ version {}",
            path.display(),
            header[4]
        )));
    }
    let mut extents = [0usize; 5];
    for (i, e) in extents.iter_mut().enumerate() {
        let off = 5 + i * 4;
        *e = u32::from_le_bytes(header[off..off + 4].try_into().unwrap()) as usize;
    }
    let [sequences, seq_len, channels, height, width] = extents;
    let numel = sequences
        .checked_mul(seq_len)
        .and_then(|v| v.checked_mul(channels))
        .and_then(|v| v.checked_mul(height))
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| Error::format("VSEQ header extents overflow".to_string()))?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != numel * 4 {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header promises {}",
            path.display(),
            payload.len(),
            numel * 4
        )));
    }

    let mut clamped = 0usize;
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| {
            let v = f32::from_le_bytes(b.try_into().unwrap());
            if !(0.0..=1.0).contains(&v) {
                clamped += 1;
                v.clamp(0.0, 1.0)
            } else {
                v
            }
        })
        .collect();

    Ok(VseqRead {
        dataset: Dataset {
            sequences,
            seq_len,
            channels,
            height,
            width,
            data,
            split: "all".to_string(),
            config_hash: String::new(),
            seed: 0,
        },
        clamped,
    })
}
