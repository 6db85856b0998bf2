//! Prediction-strategy baselines: the AR(1) error-accumulation oracle,
//! the copy-last floor, recursive rollout beyond the native horizon,
//! and frame-wise error curves.

use crate::error::{Error, Result};
use crate::metrics;
use crate::model::{model_forward, DecodeMode, ModelConfig, Parameters};
use crate::numerics::ops::{concat, narrow};
use crate::numerics::rng::Rng;
use crate::numerics::tape::Tape;
use crate::numerics::tensor::Tensor;

/// AR(1) coefficient: scalar, or a dense square matrix acting on a
/// state vector.
#[derive(Debug, Clone)]
pub enum Ar1Coefficient {
    Scalar(f64),
    Matrix { dim: usize, data: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct Ar1Params {
    pub coefficient: Ar1Coefficient,
    pub noise_std: f64,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
}

/// Per-step variance of the accumulated residual, estimated over
/// independent trials.
#[derive(Debug, Clone)]
pub struct Ar1Rollout {
    /// Index k holds the sample variance of the step-(k+1) residual.
    pub residual_variance: Vec<f64>,
}

/// Simulate x_{j+1} = A x_j + noise and measure the variance of the
/// residual x_k - A^k x_0 at every step.
pub fn ar1_rollout(p: &Ar1Params) -> Result<Ar1Rollout> {
    if p.noise_std < 0.0 || !p.noise_std.is_finite() {
        return Err(Error::invalid("ar1_rollout: noise std must be finite and >= 0"));
    }
    if p.trials < 1 || p.horizon < 1 {
        return Err(Error::invalid("ar1_rollout: trials and horizon must be >= 1"));
    }
    let dim = match &p.coefficient {
        Ar1Coefficient::Scalar(_) => 1,
        Ar1Coefficient::Matrix { dim, data } => {
            if *dim == 0 || data.len() != dim * dim {
                return Err(Error::invalid("ar1_rollout: bad matrix coefficient"));
            }
            *dim
        }
    };

    let apply = |state: &[f64], out: &mut [f64]| match &p.coefficient {
        Ar1Coefficient::Scalar(a) => {
            for (o, s) in out.iter_mut().zip(state) {
                *o = a * s;
            }
        }
        Ar1Coefficient::Matrix { dim, data } => {
            for i in 0..*dim {
                let row = &data[i * dim..(i + 1) * dim];
                out[i] = row.iter().zip(state).map(|(a, s)| a * s).sum();
            }
        }
    };

    // Accumulate sums and squared sums per step over trials, in trial
    // order (deterministic).
    let mut sum = vec![0.0; p.horizon * dim];
    let mut sum_sq = vec![0.0; p.horizon * dim];
    let mut noisy = vec![0.0; dim];
    let mut clean = vec![0.0; dim];
    let mut next = vec![0.0; dim];
    for trial in 0..p.trials {
        let mut rng = Rng::derive(p.seed, trial as u64);
        for i in 0..dim {
            let x0 = rng.normal(0.0, 1.0);
            noisy[i] = x0;
            clean[i] = x0;
        }
        for k in 0..p.horizon {
            apply(&noisy, &mut next);
            for i in 0..dim {
                noisy[i] = next[i] + rng.normal(0.0, p.noise_std);
            }
            apply(&clean, &mut next);
            clean.copy_from_slice(&next);
            for i in 0..dim {
                let r = noisy[i] - clean[i];
                sum[k * dim + i] += r;
                sum_sq[k * dim + i] += r * r;
            }
        }
    }

    let nt = p.trials as f64;
    let mut residual_variance = Vec::with_capacity(p.horizon);
    for k in 0..p.horizon {
        // unbiased sample variance, averaged over vector components
        let mut acc = 0.0;
        for i in 0..dim {
            let mean = sum[k * dim + i] / nt;
            let var = if p.trials > 1 {
                (sum_sq[k * dim + i] - nt * mean * mean) / (nt - 1.0)
            } else {
                0.0
            };
            acc += var.max(0.0);
        }
        residual_variance.push(acc / dim as f64);
    }
    Ok(Ar1Rollout { residual_variance })
}

/// Closed-form residual variance after k steps for a scalar
/// coefficient: sigma^2 (1 - a^{2k}) / (1 - a^2), and k sigma^2 on the
/// unit circle.
pub fn ar1_variance_closed_form(a: f64, sigma: f64, k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    let s2 = sigma * sigma;
    if (a.abs() - 1.0).abs() < 1e-12 {
        k as f64 * s2
    } else {
        let a2 = a * a;
        s2 * (1.0 - a2.powi(k as i32)) / (1.0 - a2)
    }
}

/// Repeat the last observed frame n times: [m,C,H,W] -> [n,C,H,W].
pub fn copy_last(frames: &Tensor, n: usize) -> Result<Tensor> {
    let s = frames.shape().to_vec();
    if s.len() != 4 || s[0] < 1 {
        return Err(Error::shape(format!(
            "copy_last: want [m,C,H,W] with m >= 1, got {s:?}"
        )));
    }
    let frame = s[1] * s[2] * s[3];
    let data = frames.data();
    let last = &data[(s[0] - 1) * frame..];
    let mut out = Vec::with_capacity(n * frame);
    for _ in 0..n {
        out.extend_from_slice(last);
    }
    Tensor::from_vec(out, &[n, s[1], s[2], s[3]])
}

/// How rollout extends prediction beyond one forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutStrategy {
    /// Feed back whole predicted n-blocks (block recursion).
    Mimo,
    /// Keep only the first predicted frame each round (single-step
    /// recursion).
    Miso,
}

impl RolloutStrategy {
    pub fn for_config(config: &ModelConfig) -> Self {
        match config.decode_mode {
            DecodeMode::Mimo => RolloutStrategy::Mimo,
            DecodeMode::Miso => RolloutStrategy::Miso,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            RolloutStrategy::Mimo => "mimo",
            RolloutStrategy::Miso => "miso",
        }
    }
}

/// Predict `total_n` frames from [B,m,...] conditioning frames,
/// feeding predictions back through a sliding length-m window once the
/// native horizon is exhausted.
pub fn rollout(
    params: &Parameters,
    config: &ModelConfig,
    frames: &Tensor,
    total_n: usize,
    strategy: RolloutStrategy,
) -> Result<Tensor> {
    if total_n < 1 {
        return Err(Error::invalid("rollout: total_n must be >= 1"));
    }
    let s = frames.shape().to_vec();
    if s.len() != 5 || s[1] != config.m {
        return Err(Error::shape(format!(
            "rollout: conditioning frames {s:?} do not match m = {}",
            config.m
        )));
    }

    let tape = Tape::no_grad();
    let mut window = frames.clone();
    let mut collected: Vec<Tensor> = Vec::new();
    let mut have = 0;
    while have < total_n {
        let out = model_forward(&tape, &window, params, config, false)?;
        let keep = match strategy {
            RolloutStrategy::Mimo => config.n.min(total_n - have),
            RolloutStrategy::Miso => 1,
        };
        let block = if keep == config.n {
            out.prediction.clone()
        } else {
            narrow(&tape, &out.prediction, 1, 0, keep)?
        };
        collected.push(block.clone());
        have += keep;
        if have >= total_n {
            break;
        }
        // slide the conditioning window forward by `keep`
        window = if keep >= config.m {
            narrow(&tape, &block, 1, keep - config.m, config.m)?
        } else {
            let tail = narrow(&tape, &window, 1, keep, config.m - keep)?;
            concat(&tape, &[&tail, &block], 1)?
        };
    }
    let refs: Vec<&Tensor> = collected.iter().collect();
    let all = concat(&tape, &refs, 1)?;
    if all.shape()[1] == total_n {
        Ok(all)
    } else {
        narrow(&tape, &all, 1, 0, total_n)
    }
}

/// Frame-wise error metric for rollout curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CurveMetric {
    /// Per-frame sum of squared error (paper-table convention).
    MseSum,
    /// Per-frame per-pixel mean squared error.
    MsePerPixel,
    /// Per-frame sum of absolute error.
    MaeSum,
}

/// A horizon-indexed error curve for one prediction strategy.
#[derive(Debug, Clone)]
pub struct RolloutCurve {
    pub strategy: String,
    pub values: Vec<f64>,
}

/// Per-frame error between aligned [n,...] prediction and truth
/// tensors (or batched [S,n,...], averaged over S).
pub fn framewise_error_curve(
    prediction: &Tensor,
    truth: &Tensor,
    metric: CurveMetric,
    strategy: &str,
) -> Result<RolloutCurve> {
    let (ps, ts) = (prediction.shape().to_vec(), truth.shape().to_vec());
    if ps != ts {
        return Err(Error::shape(format!(
            "framewise_error_curve: {ps:?} vs {ts:?}"
        )));
    }
    let (seqs, horizon) = match ps.len() {
        4 => (1, ps[0]),
        5 => (ps[0], ps[1]),
        _ => {
            return Err(Error::shape(format!(
                "framewise_error_curve: want [n,...] or [S,n,...], got {ps:?}"
            )))
        }
    };
    let frame: usize = ps[ps.len() - 3..].iter().product();
    let (pd, td) = (prediction.data(), truth.data());
    let mut values = vec![0.0; horizon];
    for s in 0..seqs {
        for t in 0..horizon {
            let base = (s * horizon + t) * frame;
            let p = &pd[base..base + frame];
            let y = &td[base..base + frame];
            let v = match metric {
                CurveMetric::MseSum => metrics::sum_squared_error(p, y),
                CurveMetric::MsePerPixel => metrics::sum_squared_error(p, y) / frame as f64,
                CurveMetric::MaeSum => metrics::sum_absolute_error(p, y),
            };
            values[t] += v;
        }
    }
    for v in &mut values {
        *v /= seqs as f64;
    }
    Ok(RolloutCurve {
        strategy: strategy.to_string(),
        values,
    })
}
