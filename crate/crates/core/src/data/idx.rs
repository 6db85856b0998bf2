//! Reader for the standard IDX image/label containers (big-endian,
//! magic 0x00000803 for u8 image cubes and 0x00000801 for label
//! vectors).

use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Normalized digit bitmaps usable as sprites.
#[derive(Debug, Clone)]
pub struct SpriteBank {
    pub rows: usize,
    pub cols: usize,
    /// Each image is rows*cols values in [0,1].
    pub images: Vec<Vec<f64>>,
    pub labels: Option<Vec<u8>>,
}

fn read_u32_be(bytes: &[u8], off: usize, what: &str) -> Result<u32> {
    let slice = bytes
        .get(off..off + 4)
        .ok_or_else(|| Error::format(format!("IDX file truncated reading {what}")))?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?
        .read_to_end(&mut buf)?;
    Ok(buf)
}

/// Load images (and optionally labels) from IDX files into a sprite
/// bank. Fails loudly on bad magic numbers, truncation, or an
/// image/label count mismatch; no partial data is returned.
pub fn read_idx(images_path: &Path, labels_path: Option<&Path>) -> Result<SpriteBank> {
    let bytes = read_file(images_path)?;
    let magic = read_u32_be(&bytes, 0, "image magic")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::format(format!(
            "{}: bad IDX image magic {magic:#010x}, want {IMAGE_MAGIC:#010x}",
            images_path.display()
        )));
    }
    let count = read_u32_be(&bytes, 4, "image count")? as usize;
    let rows = read_u32_be(&bytes, 8, "row count")? as usize;
    let cols = read_u32_be(&bytes, 12, "column count")? as usize;
    let payload = &bytes[16..];
    let want = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::format("IDX header overflow".to_string()))?;
    if payload.len() != want {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, header promises {want}",
            images_path.display(),
            payload.len()
        )));
    }

    let images: Vec<Vec<f64>> = payload
        .chunks_exact(rows * cols)
        .map(|img| img.iter().map(|&b| b as f64 / 255.0).collect())
        .collect();

    let labels = match labels_path {
        None => None,
        Some(lp) => {
            let lbytes = read_file(lp)?;
            let lmagic = read_u32_be(&lbytes, 0, "label magic")?;
            if lmagic != LABEL_MAGIC {
                return Err(Error::format(format!(
                    "{}: bad IDX label magic {lmagic:#010x}, want {LABEL_MAGIC:#010x}",
                    lp.display()
                )));
            }
            let lcount = read_u32_be(&lbytes, 4, "label count")? as usize;
            if lcount != count {
                return Err(Error::format(format!(
                    "label count {lcount} does not match image count {count}"
                )));
            }
            let lpayload = &lbytes[8..];
            if lpayload.len() != lcount {
                return Err(Error::format(format!(
                    "{}: label payload holds {} bytes, header promises {lcount}",
                    lp.display(),
                    lpayload.len()
                )));
            }
            Some(lpayload.to_vec())
        }
    };

    Ok(SpriteBank {
        rows,
        cols,
        images,
        labels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_idx_images(path: &Path, count: u32, rows: u32, cols: u32, pixels: &[u8]) {
        let mut f = std::fs::File::create(path).unwrap();
        f.write_all(&IMAGE_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&count.to_be_bytes()).unwrap();
        f.write_all(&rows.to_be_bytes()).unwrap();
        f.write_all(&cols.to_be_bytes()).unwrap();
        f.write_all(pixels).unwrap();
    }

    #[test]
    fn reads_well_formed_images_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        let mut pixels = vec![0u8; 2 * 28 * 28];
        pixels[0] = 255;
        pixels[784] = 128;
        write_idx_images(&img_path, 2, 28, 28, &pixels);
        {
            let mut f = std::fs::File::create(&lbl_path).unwrap();
            f.write_all(&LABEL_MAGIC.to_be_bytes()).unwrap();
            f.write_all(&2u32.to_be_bytes()).unwrap();
            f.write_all(&[7u8, 3u8]).unwrap();
        }
        let bank = read_idx(&img_path, Some(&lbl_path)).unwrap();
        assert_eq!(bank.images.len(), 2);
        assert_eq!((bank.rows, bank.cols), (28, 28));
        assert_eq!(bank.images[0][0], 1.0);
        assert_eq!(bank.images[0][1], 0.0);
        assert!((bank.images[1][0] - 128.0 / 255.0).abs() < 1e-12);
        assert_eq!(bank.labels.as_deref(), Some(&[7u8, 3u8][..]));
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("short.idx");
        write_idx_images(&img_path, 2, 28, 28, &vec![0u8; 784]); // half missing
        assert!(read_idx(&img_path, None).is_err());
    }

    #[test]
    fn bad_magic_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("bad.idx");
        let mut f = std::fs::File::create(&img_path).unwrap();
        f.write_all(&0xdeadbeefu32.to_be_bytes()).unwrap();
        f.write_all(&[0u8; 12]).unwrap();
        drop(f);
        assert!(read_idx(&img_path, None).is_err());
    }

    #[test]
    fn count_mismatch_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let img_path = dir.path().join("images.idx");
        let lbl_path = dir.path().join("labels.idx");
        write_idx_images(&img_path, 1, 4, 4, &vec![0u8; 16]);
        let mut f = std::fs::File::create(&lbl_path).unwrap();
        f.write_all(&LABEL_MAGIC.to_be_bytes()).unwrap();
        f.write_all(&3u32.to_be_bytes()).unwrap();
        f.write_all(&[1, 2, 3]).unwrap();
        drop(f);
        assert!(read_idx(&img_path, Some(&lbl_path)).is_err());
    }

    #[test]
    fn empty_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("empty.idx");
        std::fs::File::create(&p).unwrap();
        assert!(read_idx(&p, None).is_err());
    }
}
