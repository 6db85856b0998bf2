//! Evaluation metrics: MSE/MAE (frame-sum and per-pixel conventions),
//! windowed SSIM, PSNR with a saturation cap, and the critical success
//! index, plus batched report assembly.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

pub const PSNR_CAP_DB: f64 = 100.0;
const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

pub(crate) fn sum_squared_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn sum_absolute_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Frame-sum MSE: mean over frames of the per-frame *sum* of squared
/// pixel error (the convention behind the published benchmark tables).
pub fn mse(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    frame_metric(pred, truth, sum_squared_error)
}

/// Frame-sum MAE (see [`mse`] for the convention).
pub fn mae(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    frame_metric(pred, truth, sum_absolute_error)
}

/// Per-pixel-mean MSE.
pub fn mse_per_pixel(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    let frame: usize = frame_size(pred)?;
    Ok(mse(pred, truth)? / frame as f64)
}

/// Per-pixel-mean MAE.
pub fn mae_per_pixel(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    let frame: usize = frame_size(pred)?;
    Ok(mae(pred, truth)? / frame as f64)
}

fn frame_size(t: &Tensor) -> Result<usize> {
    let s = t.shape();
    if s.len() < 3 {
        return Err(Error::shape(format!(
            "metrics: want [..,C,H,W] frames, got {s:?}"
        )));
    }
    Ok(s[s.len() - 3..].iter().product())
}

fn frame_metric(pred: &Tensor, truth: &Tensor, f: fn(&[f64], &[f64]) -> f64) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "metrics: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let frame = frame_size(pred)?;
    let frames = pred.numel() / frame;
    let (pd, td) = (pred.data(), truth.data());
    let mut acc = 0.0;
    for t in 0..frames {
        acc += f(&pd[t * frame..(t + 1) * frame], &td[t * frame..(t + 1) * frame]);
    }
    Ok(acc / frames as f64)
}

fn gaussian_window() -> [f64; SSIM_WINDOW * SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW * SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for i in 0..SSIM_WINDOW {
        for j in 0..SSIM_WINDOW {
            let d2 = (i as f64 - c).powi(2) + (j as f64 - c).powi(2);
            let v = (-d2 / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[i * SSIM_WINDOW + j] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Windowed structural similarity of one single-channel frame pair:
/// 11x11 Gaussian window (sigma 1.5), mean over valid positions. For
/// multi-channel frames use [`ssim`], which averages per-channel
/// scores.
pub fn ssim_plane(pred: &[f64], truth: &[f64], h: usize, w: usize, dynamic_range: f64) -> Result<f64> {
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "ssim: frame {h}x{w} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"
        )));
    }
    if pred.len() != h * w || truth.len() != h * w {
        return Err(Error::shape("ssim: plane size mismatch".to_string()));
    }
    let win = gaussian_window();
    let c1 = (SSIM_K1 * dynamic_range) * (SSIM_K1 * dynamic_range);
    let c2 = (SSIM_K2 * dynamic_range) * (SSIM_K2 * dynamic_range);

    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=(h - SSIM_WINDOW) {
        for x0 in 0..=(w - SSIM_WINDOW) {
            let (mut mx, mut my, mut mxx, mut myy, mut mxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..SSIM_WINDOW {
                for j in 0..SSIM_WINDOW {
                    let wt = win[i * SSIM_WINDOW + j];
                    let a = pred[(y0 + i) * w + x0 + j];
                    let b = truth[(y0 + i) * w + x0 + j];
                    mx += wt * a;
                    my += wt * b;
                    mxx += wt * a * a;
                    myy += wt * b * b;
                    mxy += wt * a * b;
                }
            }
            let vx = mxx - mx * mx;
            let vy = myy - my * my;
            let cxy = mxy - mx * my;
            let num = (2.0 * mx * my + c1) * (2.0 * cxy + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// SSIM of a [C,H,W] frame (mean over channels), dynamic range 1.
pub fn ssim(pred: &Tensor, truth: &Tensor) -> Result<f64> {
    ssim_with_range(pred, truth, 1.0)
}

pub fn ssim_with_range(pred: &Tensor, truth: &Tensor, dynamic_range: f64) -> Result<f64> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "ssim: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let s = pred.shape().to_vec();
    if s.len() != 3 {
        return Err(Error::shape(format!("ssim: want [C,H,W], got {s:?}")));
    }
    let (c, h, w) = (s[0], s[1], s[2]);
    let (pd, td) = (pred.data(), truth.data());
    let mut total = 0.0;
    for ci in 0..c {
        total += ssim_plane(
            &pd[ci * h * w..(ci + 1) * h * w],
            &td[ci * h * w..(ci + 1) * h * w],
            h,
            w,
            dynamic_range,
        )?;
    }
    Ok(total / c as f64)
}

/// Peak signal-to-noise ratio in dB; zero error returns the 100 dB cap
/// with the saturation flag set.
pub fn psnr(pred: &Tensor, truth: &Tensor, max_val: f64) -> Result<(f64, bool)> {
    if max_val <= 0.0 {
        return Err(Error::invalid("psnr: max_val must be positive"));
    }
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "psnr: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let (pd, td) = (pred.data(), truth.data());
    let mse = sum_squared_error(&pd, &td) / pred.numel() as f64;
    if mse == 0.0 {
        return Ok((PSNR_CAP_DB, true));
    }
    let db = 10.0 * (max_val * max_val / mse).log10();
    Ok((db.min(PSNR_CAP_DB), db >= PSNR_CAP_DB))
}

/// Binary detection counts at a threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CsiCounts {
    pub hits: u64,
    pub misses: u64,
    pub false_alarms: u64,
}

impl CsiCounts {
    pub fn add(&mut self, other: CsiCounts) {
        self.hits += other.hits;
        self.misses += other.misses;
        self.false_alarms += other.false_alarms;
    }

    /// hits / (hits + misses + false alarms); defined as 1 when there
    /// is nothing to detect and nothing falsely detected.
    pub fn score(&self) -> f64 {
        let denom = self.hits + self.misses + self.false_alarms;
        if denom == 0 {
            1.0
        } else {
            self.hits as f64 / denom as f64
        }
    }
}

pub fn csi_counts(pred: &Tensor, truth: &Tensor, threshold: f64) -> Result<CsiCounts> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "csi: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let (pd, td) = (pred.data(), truth.data());
    let mut c = CsiCounts::default();
    for (&p, &t) in pd.iter().zip(td.iter()) {
        let (dp, dt) = (p >= threshold, t >= threshold);
        match (dp, dt) {
            (true, true) => c.hits += 1,
            (false, true) => c.misses += 1,
            (true, false) => c.false_alarms += 1,
            (false, false) => {}
        }
    }
    Ok(c)
}

/// Critical success index after thresholding both fields.
pub fn csi(pred: &Tensor, truth: &Tensor, threshold: f64) -> Result<f64> {
    Ok(csi_counts(pred, truth, threshold)?.score())
}

/// Per-frame metric values for one (sequence, frame) pair.
#[derive(Debug, Clone, Serialize)]
pub struct FrameMetrics {
    pub sequence: usize,
    pub frame: usize,
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregates {
    pub mse: f64,
    pub mae: f64,
    pub ssim: f64,
    pub psnr: f64,
    pub mse_per_pixel: f64,
    pub mae_per_pixel: f64,
    pub psnr_saturated: usize,
}

/// Full evaluation report. Serializes with a stable key order.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    pub config_hash: String,
    pub frames: usize,
    pub sequences: usize,
    pub horizon: usize,
    pub native_horizon: usize,
    pub recursive: bool,
    pub aggregates: Aggregates,
    pub per_frame: Vec<FrameMetrics>,
    pub csi: BTreeMap<String, f64>,
}

/// Format a CSI threshold as a stable JSON map key.
pub fn threshold_key(t: f64) -> String {
    let mut s = format!("{t}");
    if !s.contains('.') {
        s.push_str(".0");
    }
    s
}

/// Evaluate aligned [S,n,C,H,W] prediction/truth batches: per-frame
/// metrics, their means, and pooled CSI per threshold.
pub fn evaluate(pred: &Tensor, truth: &Tensor, thresholds: &[f64]) -> Result<MetricsReport> {
    if pred.shape() != truth.shape() {
        return Err(Error::shape(format!(
            "evaluate: {:?} vs {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    let s = pred.shape().to_vec();
    if s.len() != 5 {
        return Err(Error::shape(format!(
            "evaluate: want [S,n,C,H,W], got {s:?}"
        )));
    }
    let (seqs, horizon) = (s[0], s[1]);
    let frame_shape = &s[2..];
    let frame: usize = frame_shape.iter().product();

    let mut per_frame = Vec::with_capacity(seqs * horizon);
    let mut csi_acc: Vec<CsiCounts> = vec![CsiCounts::default(); thresholds.len()];
    let mut saturated = 0usize;
    {
        let (pd, td) = (pred.data(), truth.data());
        for si in 0..seqs {
            for t in 0..horizon {
                let base = (si * horizon + t) * frame;
                let p = Tensor::from_vec(pd[base..base + frame].to_vec(), frame_shape)?;
                let y = Tensor::from_vec(td[base..base + frame].to_vec(), frame_shape)?;
                let fm_mse = sum_squared_error(&p.data(), &y.data());
                let fm_mae = sum_absolute_error(&p.data(), &y.data());
                let fm_ssim = ssim(&p, &y)?;
                let (fm_psnr, sat) = psnr(&p, &y, 1.0)?;
                if sat {
                    saturated += 1;
                }
                for (acc, &th) in csi_acc.iter_mut().zip(thresholds) {
                    acc.add(csi_counts(&p, &y, th)?);
                }
                per_frame.push(FrameMetrics {
                    sequence: si,
                    frame: t,
                    mse: fm_mse,
                    mae: fm_mae,
                    ssim: fm_ssim,
                    psnr: fm_psnr,
                });
            }
        }
    }

    let count = per_frame.len() as f64;
    let mean = |f: fn(&FrameMetrics) -> f64| per_frame.iter().map(f).sum::<f64>() / count;
    let aggregates = Aggregates {
        mse: mean(|m| m.mse),
        mae: mean(|m| m.mae),
        ssim: mean(|m| m.ssim),
        psnr: mean(|m| m.psnr),
        mse_per_pixel: mean(|m| m.mse) / frame as f64,
        mae_per_pixel: mean(|m| m.mae) / frame as f64,
        psnr_saturated: saturated,
    };
    let csi = thresholds
        .iter()
        .zip(&csi_acc)
        .map(|(&t, c)| (threshold_key(t), c.score()))
        .collect();

    Ok(MetricsReport {
        config_hash: String::new(),
        frames: per_frame.len(),
        sequences: seqs,
        horizon,
        native_horizon: horizon,
        recursive: false,
        aggregates,
        per_frame,
        csi,
    })
}
