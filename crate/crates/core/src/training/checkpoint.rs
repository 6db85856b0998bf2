//! Checkpoint container: magic "MVPC", version byte 1, u32 JSON-header
//! length, JSON header (config, manifest, optimizer scalars, step, rng
//! state, loss history), then IEEE-754 32-bit little-endian tensor
//! payloads in manifest order.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Parameters};
use crate::numerics::tensor::Tensor;
use crate::training::{OptimState, SchedulerState, StepRecord, TrainHyper};

const MAGIC: &[u8; 4] = b"MVPC";
const VERSION: u8 = 1;

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: ModelConfig,
    pub config_hash: String,
    pub hyper: TrainHyper,
    pub seed: u64,
    pub step: usize,
    pub params: Parameters,
    pub optim: OptimState,
    pub scheduler: SchedulerState,
    pub rng_state: [u64; 4],
    pub history: Vec<StepRecord>,
}

#[derive(Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Byte offset into the payload.
    offset: u64,
    /// Element count.
    len: u64,
}

#[derive(Serialize, Deserialize)]
struct OptimScalars {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: u64,
}

#[derive(Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    config_hash: String,
    hyper: TrainHyper,
    seed: u64,
    step: u64,
    optim: OptimScalars,
    scheduler: SchedulerState,
    rng: [u64; 4],
    history: Vec<StepRecord>,
    manifest: Vec<ManifestEntry>,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    // payload order: parameters (path order), then Adam moments
    let mut manifest = Vec::new();
    let mut payload: Vec<u8> = Vec::new();
    let mut push_tensor = |name: String, shape: Vec<usize>, values: &[f64]| {
        manifest.push(ManifestEntry {
            name,
            shape,
            offset: payload.len() as u64,
            len: values.len() as u64,
        });
        for v in values {
            payload.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    };
    for (path, tensor) in ckpt.params.iter() {
        push_tensor(path.clone(), tensor.shape().to_vec(), &tensor.data());
    }
    for (path, m) in &ckpt.optim.m {
        push_tensor(format!("optim.m.{path}"), vec![m.len()], m);
    }
    for (path, v) in &ckpt.optim.v {
        push_tensor(format!("optim.v.{path}"), vec![v.len()], v);
    }

    let header = Header {
        config: ckpt.config.clone(),
        config_hash: ckpt.config_hash.clone(),
        hyper: ckpt.hyper.clone(),
        seed: ckpt.seed,
        step: ckpt.step as u64,
        optim: OptimScalars {
            lr: ckpt.optim.lr,
            beta1: ckpt.optim.beta1,
            beta2: ckpt.optim.beta2,
            eps: ckpt.optim.eps,
            step: ckpt.optim.step as u64,
        },
        scheduler: ckpt.scheduler.clone(),
        rng: ckpt.rng_state,
        history: ckpt.history.clone(),
        manifest,
    };
    let header_json = serde_json::to_vec(&header)?;

    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(
        std::fs::File::open(path)
            .map_err(|e| Error::format(format!("cannot open {}: {e}", path.display())))?,
    );
    let mut head = [0u8; 9];
    r.read_exact(&mut head)
        .map_err(|_| Error::format(format!("{}: truncated checkpoint", path.display())))?;
    if &head[..4] != MAGIC {
        return Err(Error::format(format!(
            "{}: bad checkpoint magic {:?}",
            path.display(),
            &head[..4]
        )));
    }
    if head[4] != VERSION {
        return Err(Error::format(format!(
            "{}: unsupported checkpoint version {}",
            path.display(),
            head[4]
        )));
    }
    let header_len = u32::from_le_bytes(head[5..9].try_into().unwrap()) as usize;
    let mut header_json = vec![0u8; header_len];
    r.read_exact(&mut header_json)
        .map_err(|_| Error::format(format!("{}: truncated header", path.display())))?;
    let header: Header = serde_json::from_slice(&header_json)?;

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;

    let expected: u64 = header.manifest.iter().map(|e| e.len * 4).sum();
    if payload.len() as u64 != expected {
        return Err(Error::format(format!(
            "{}: payload holds {} bytes, manifest promises {expected}",
            path.display(),
            payload.len()
        )));
    }

    let read_values = |entry: &ManifestEntry| -> Result<Vec<f64>> {
        let start = entry.offset as usize;
        let end = start + entry.len as usize * 4;
        let bytes = payload.get(start..end).ok_or_else(|| {
            Error::format(format!(
                "manifest entry `{}` points outside the payload",
                entry.name
            ))
        })?;
        Ok(bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
            .collect())
    };

    let mut params_map = BTreeMap::new();
    let mut moments_m = BTreeMap::new();
    let mut moments_v = BTreeMap::new();
    for entry in &header.manifest {
        let values = read_values(entry)?;
        if let Some(p) = entry.name.strip_prefix("optim.m.") {
            moments_m.insert(p.to_string(), values);
        } else if let Some(p) = entry.name.strip_prefix("optim.v.") {
            moments_v.insert(p.to_string(), values);
        } else {
            let numel: usize = entry.shape.iter().product();
            if numel != entry.len as usize {
                return Err(Error::format(format!(
                    "manifest entry `{}`: shape {:?} does not match {} values",
                    entry.name, entry.shape, entry.len
                )));
            }
            let t = Tensor::from_vec(values, &entry.shape)?.requiring_grad();
            params_map.insert(entry.name.clone(), t);
        }
    }
    let params = Parameters::from_map(params_map);

    // moments must cover exactly the parameter set
    for (p, _) in params.iter() {
        if !moments_m.contains_key(p) || !moments_v.contains_key(p) {
            return Err(Error::format(format!(
                "checkpoint is missing optimizer moments for `{p}`"
            )));
        }
    }

    let optim = OptimState {
        m: moments_m,
        v: moments_v,
        step: header.optim.step as usize,
        lr: header.optim.lr,
        beta1: header.optim.beta1,
        beta2: header.optim.beta2,
        eps: header.optim.eps,
    };

    Ok(Checkpoint {
        config: header.config,
        config_hash: header.config_hash,
        hyper: header.hyper,
        seed: header.seed,
        step: header.step as usize,
        params,
        optim,
        scheduler: header.scheduler,
        rng_state: header.rng,
        history: header.history,
    })
}
