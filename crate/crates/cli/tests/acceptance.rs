//! Acceptance suite: one test per criterion, each printing a PASS/FAIL
//! line (run with `--nocapture` to see them all).
//!
//! The desk-scale criteria (05-07) share one set of trained models;
//! whichever of those tests runs first pays the training cost.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;
use std::time::Instant;

use mimo_seer_core::baselines::{
    ar1_rollout, ar1_variance_closed_form, copy_last, framewise_error_curve, rollout,
    Ar1Coefficient, Ar1Params, CurveMetric, RolloutStrategy,
};
use mimo_seer_core::data::{generate_sprites, split, Dataset, SpriteKind, SpriteWorldConfig};
use mimo_seer_core::metrics;
use mimo_seer_core::model::{mha2d, model_forward, ModelConfig, Parameters};
use mimo_seer_core::numerics::ops::{self, ReduceKind};
use mimo_seer_core::numerics::rng::Rng;
use mimo_seer_core::numerics::tensor::{Fill, Tensor};
use mimo_seer_core::numerics::{grad_check, Tape};
use mimo_seer_core::training::{self, TrainHyper};
use mimo_seer_core::Result;

fn report(criterion: u32, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    println!("criterion {criterion:02} {verdict}: {detail}");
    assert!(pass, "criterion {criterion:02} failed: {detail}");
}

// ---------------------------------------------------------------- 01

fn gradcheck_model_cfg() -> ModelConfig {
    let mut cfg = ModelConfig::toy();
    cfg.m = 2;
    cfg.n = 2;
    cfg.h0 = 8;
    cfg.w0 = 8;
    cfg.patch = 2;
    cfg.channels = 8;
    cfg.heads = 2;
    cfg.enc_blocks = 1;
    cfg.dec_blocks = 1;
    cfg
}

#[test]
fn criterion_01_gradient_correctness() {
    let start = Instant::now();
    const TOL: f64 = 1e-4;
    let mut worst: f64 = 0.0;
    let mut track = |name: &str, err: f64| {
        assert!(err < TOL, "{name}: relative error {err}");
        if err > worst {
            worst = err;
        }
    };

    for seed in [11u64, 22, 33, 44, 55] {
        let mut rng = Rng::new(seed);
        let randn = |shape: &[usize], rng: &mut Rng| {
            Tensor::build(shape, Fill::Normal(0.0, 1.0), Some(rng))
                .unwrap()
                .requiring_grad()
        };

        // every differentiable op, randomized small shapes
        let x = randn(&[2, 5], &mut rng);
        let other = Tensor::build(&[2, 5], Fill::Normal(0.0, 1.0), Some(&mut rng)).unwrap();
        track("silu", grad_check(|t, x| {
            let y = ops::silu(t, x)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("sigmoid", grad_check(|t, x| {
            let y = ops::sigmoid(t, x)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("add", grad_check(|t, x| {
            let y = ops::add(t, x, &other)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("sub", grad_check(|t, x| {
            let y = ops::sub(t, &other, x)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("mul", grad_check(|t, x| {
            let y = ops::mul(t, x, &other)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("scale", grad_check(|t, x| {
            let y = ops::scale(t, x, -0.37)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("softmax", grad_check(|t, x| {
            let y = ops::softmax(t, x, 1)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());
        track("reduce_mean", grad_check(|t, x| {
            let y = ops::reduce(t, x, ReduceKind::Mean, Some(&[1]))?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &x, 1e-5).unwrap());

        let a = randn(&[2, 3, 4], &mut rng);
        let b = Tensor::build(&[2, 4, 5], Fill::Normal(0.0, 1.0), Some(&mut rng)).unwrap();
        track("matmul", grad_check(|t, a| {
            let y = ops::matmul(t, a, &b)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &a, 1e-5).unwrap());

        let img = randn(&[1, 2, 5, 5], &mut rng);
        let w2 = Tensor::build(&[3, 2, 3, 3], Fill::Normal(0.0, 0.5), Some(&mut rng)).unwrap();
        track("conv2d", grad_check(|t, x| {
            let y = ops::conv2d(t, x, &w2, None, 1, 1)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &img, 1e-5).unwrap());

        let vol = randn(&[1, 2, 3, 4, 4], &mut rng);
        let w3 = Tensor::build(&[2, 2, 3, 3, 3], Fill::Normal(0.0, 0.5), Some(&mut rng)).unwrap();
        track("conv3d", grad_check(|t, x| {
            let y = ops::conv3d(t, x, &w3, None, 1)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &vol, 1e-5).unwrap());

        let gain = Tensor::build(&[6], Fill::Uniform(0.5, 1.5), Some(&mut rng)).unwrap();
        let offset = Tensor::build(&[6], Fill::Normal(0.0, 0.2), Some(&mut rng)).unwrap();
        let xn = randn(&[4, 6], &mut rng);
        track("layer_norm", grad_check(|t, x| {
            let y = ops::layer_norm(t, x, 1, &gain, &offset, 1e-5)?;
            ops::reduce(t, &y, ReduceKind::SumOfSquares, None)
        }, &xn, 1e-5).unwrap());

        // full toy model: gradient w.r.t. input frames and parameters
        let cfg = gradcheck_model_cfg();
        let params = Parameters::init(&cfg, &mut rng).unwrap();
        let frames = Tensor::build(&[1, 2, 1, 8, 8], Fill::Uniform(0.1, 0.9), Some(&mut rng))
            .unwrap()
            .requiring_grad();
        track("model_input", grad_check(|t, x| {
            let out = model_forward(t, x, &params, &cfg, false)?;
            ops::reduce(t, &out.prediction, ReduceKind::Mean, None)
        }, &frames, 1e-5).unwrap());
        for path in ["stem.conv1.weight", "time_embed.weight"] {
            let probe = params.get(path).unwrap().clone();
            track(path, grad_check(|t, _| {
                let out = model_forward(t, &frames, &params, &cfg, false)?;
                ops::reduce(t, &out.prediction, ReduceKind::Mean, None)
            }, &probe, 1e-5).unwrap());
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    report(
        1,
        elapsed < 120.0,
        &format!("all ops + full toy model pass finite differences, worst rel err {worst:.2e}, {elapsed:.1}s (< 120s)"),
    );
}

// ---------------------------------------------------------------- 02

#[test]
fn criterion_02_error_accumulation_oracle() {
    let start = Instant::now();
    let mut worst_rel: f64 = 0.0;
    for (i, &a) in [0.0f64, 0.5, 0.9, 1.0].iter().enumerate() {
        let p = Ar1Params {
            coefficient: Ar1Coefficient::Scalar(a),
            noise_std: 1.0,
            horizon: 20,
            trials: 100_000,
            seed: 40 + i as u64,
        };
        let rollout = ar1_rollout(&p).unwrap();
        let mut prev = 0.0;
        for (k0, &emp) in rollout.residual_variance.iter().enumerate() {
            let k = k0 + 1;
            let want = ar1_variance_closed_form(a, 1.0, k);
            let rel = (emp - want).abs() / want;
            assert!(rel < 0.05, "A = {a}, k = {k}: empirical {emp} vs {want}");
            worst_rel = worst_rel.max(rel);
            if a >= 1.0 {
                assert!(emp > prev, "A = {a}: variance must strictly increase at k = {k}");
            } else if a > 0.0 {
                let bound = 1.0 / (1.0 - a * a);
                assert!(emp < bound * 1.05, "A = {a}, k = {k}: {emp} above bound {bound}");
            }
            prev = emp;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    report(
        2,
        elapsed < 60.0,
        &format!("AR(1) empirical variance matches closed form within 5% (worst {worst_rel:.3}), {elapsed:.1}s (< 60s)"),
    );
}

// ---------------------------------------------------------------- 03

#[test]
fn criterion_03_future_frame_dependency() {
    let start = Instant::now();
    // n = 4, probe (j = 0 -> i = 3) is outside the feed-forward
    // temporal receptive field, so self-attention is the only path.
    let mut cfg = gradcheck_model_cfg();
    cfg.n = 4;

    let probe = |cfg: &ModelConfig, seed: u64| -> f64 {
        let mut rng = Rng::new(seed);
        let params = Parameters::init(cfg, &mut rng).unwrap();
        let frames = Tensor::build(
            &[1, cfg.m, 1, cfg.h0, cfg.w0],
            Fill::Uniform(0.0, 1.0),
            Some(&mut rng),
        )
        .unwrap();
        let base = model_forward(&Tape::no_grad(), &frames, &params, cfg, false)
            .unwrap()
            .prediction
            .to_vec();
        {
            let table = params.get("time_embed.weight").unwrap();
            let mut d = table.data_mut();
            for c in 0..cfg.channels {
                d[cfg.m * cfg.channels + c] += 1e-3; // query row j = 0
            }
        }
        let moved = model_forward(&Tape::no_grad(), &frames, &params, cfg, false)
            .unwrap()
            .prediction
            .to_vec();
        let frame = cfg.h0 * cfg.w0;
        let i = 3;
        base[i * frame..(i + 1) * frame]
            .iter()
            .zip(&moved[i * frame..(i + 1) * frame])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };

    cfg.use_decoder_self_attn = true;
    let with_attn = probe(&cfg, 7);
    assert!(
        with_attn > 1e-8,
        "self-attention should carry query 0 into frame 3 (delta {with_attn:.3e})"
    );
    cfg.use_decoder_self_attn = false;
    let without = probe(&cfg, 7);
    assert_eq!(without, 0.0, "fixed variant must show exactly zero");

    let elapsed = start.elapsed().as_secs_f64();
    report(
        3,
        elapsed < 60.0,
        &format!("query perturbation: {with_attn:.3e} with self-attention, exactly 0 without, {elapsed:.1}s (< 60s)"),
    );
}

// ---------------------------------------------------------------- 04

#[test]
fn criterion_04_attention_structural_invariants() {
    let mut cfg = gradcheck_model_cfg();
    cfg.m = 4;
    cfg.n = 4;
    let mut worst_row: f64 = 0.0;
    let mut worst_perm: f64 = 0.0;
    for seed in [1u64, 2, 3, 4, 5] {
        let mut rng = Rng::new(seed);
        let params = Parameters::init(&cfg, &mut rng).unwrap();
        let attn = params.attn("enc.0.attn").unwrap();
        let q = Tensor::build(&[2, 4, 8, 4, 4], Fill::Normal(0.0, 1.0), Some(&mut rng)).unwrap();
        let kv = Tensor::build(&[2, 4, 8, 4, 4], Fill::Normal(0.0, 1.0), Some(&mut rng)).unwrap();
        let tape = Tape::no_grad();
        let (out, maps) = mha2d(&tape, &q, &kv, &attn, &cfg).unwrap();

        for m in &maps {
            for row in m.to_vec().chunks_exact(4) {
                let s: f64 = row.iter().sum();
                worst_row = worst_row.max((s - 1.0).abs());
                assert!((s - 1.0).abs() < 1e-6, "attention row sums to {s}");
                assert!(row.iter().all(|&v| v >= 0.0));
            }
        }

        // key permutation leaves every output frame unchanged
        let perm = [2usize, 0, 3, 1];
        let permute = |x: &Tensor| {
            let parts: Vec<Tensor> = perm
                .iter()
                .map(|&i| ops::narrow(&tape, x, 1, i, 1).unwrap())
                .collect();
            let refs: Vec<&Tensor> = parts.iter().collect();
            ops::concat(&tape, &refs, 1).unwrap()
        };
        let (out_kperm, _) = mha2d(&tape, &q, &permute(&kv), &attn, &cfg).unwrap();
        for (a, b) in out.to_vec().iter().zip(out_kperm.to_vec()) {
            worst_perm = worst_perm.max((a - b).abs());
            assert!((a - b).abs() < 1e-9, "key permutation moved an output");
        }

        // query permutation permutes outputs identically
        let (out_qperm, _) = mha2d(&tape, &permute(&q), &kv, &attn, &cfg).unwrap();
        let frame = 8 * 4 * 4;
        let (base, permuted) = (out.to_vec(), out_qperm.to_vec());
        for batch in 0..2 {
            for (j, &pj) in perm.iter().enumerate() {
                let x = &permuted[(batch * 4 + j) * frame..(batch * 4 + j + 1) * frame];
                let y = &base[(batch * 4 + pj) * frame..(batch * 4 + pj + 1) * frame];
                for (u, v) in x.iter().zip(y) {
                    worst_perm = worst_perm.max((u - v).abs());
                    assert!((u - v).abs() < 1e-9, "query permutation not equivariant");
                }
            }
        }
    }
    report(
        4,
        true,
        &format!("rows stochastic (worst |sum-1| {worst_row:.1e}), permutation laws hold (worst dev {worst_perm:.1e})"),
    );
}

// ------------------------------------------------- desk-scale shared

const TRAIN_SEEDS: [u64; 3] = [1, 2, 3];

/// Thread-safe snapshot of a trained parameter set (tensors are
/// thread-local, so the shared cache stores raw values).
struct SavedModel {
    seed: u64,
    tensors: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl SavedModel {
    fn from_params(seed: u64, params: &Parameters) -> SavedModel {
        SavedModel {
            seed,
            tensors: params
                .iter()
                .map(|(p, t)| (p.clone(), t.shape().to_vec(), t.to_vec()))
                .collect(),
        }
    }

    fn params(&self) -> Parameters {
        let map = self
            .tensors
            .iter()
            .map(|(p, shape, data)| {
                (
                    p.clone(),
                    Tensor::from_vec(data.clone(), shape).unwrap().requiring_grad(),
                )
            })
            .collect();
        Parameters::from_map(map)
    }
}

struct TrainedArtifacts {
    eval_split: Dataset,
    config: ModelConfig,
    full: Vec<SavedModel>,
    nolsb: Vec<SavedModel>,
    noattn: Vec<SavedModel>,
    train_secs: f64,
}

fn desk_config() -> ModelConfig {
    let mut cfg = ModelConfig::toy(); // 16x16, m=n=5, C=32, h=4, 2/2 blocks
    cfg.patch = 4;
    cfg
}

fn desk_hyper() -> TrainHyper {
    TrainHyper {
        steps: 2000,
        batch_size: 16,
        lr: 5e-4,
        ..Default::default()
    }
}

fn trained() -> &'static TrainedArtifacts {
    static ARTIFACTS: OnceLock<TrainedArtifacts> = OnceLock::new();
    ARTIFACTS.get_or_init(|| {
        let world = SpriteWorldConfig {
            height: 16,
            width: 16,
            num_sprites: 2,
            kind: SpriteKind::Disk,
            sprite_size: 5,
            speed_min: 1.0,
            speed_max: 2.0,
            seq_len: 25, // native window 10 + horizon-20 rollout room
            num_sequences: 160,
            seed: 100,
            bounce: true,
        };
        let dataset = generate_sprites(&world, None).unwrap();
        let (train_split, eval_split) = split(&dataset, 0.8, 0).unwrap();

        let config = desk_config();
        let hyper = desk_hyper();
        let start = Instant::now();
        let train_variant = |mutate: fn(&mut ModelConfig)| -> Vec<SavedModel> {
            TRAIN_SEEDS
                .iter()
                .map(|&seed| {
                    let mut cfg = desk_config();
                    mutate(&mut cfg);
                    let (params, _) = training::train(&cfg, &train_split, &hyper, seed).unwrap();
                    SavedModel::from_params(seed, &params)
                })
                .collect()
        };
        let full = train_variant(|_| {});
        let nolsb = train_variant(|c| c.use_lsb = false);
        let noattn = train_variant(|c| c.use_2dmha = false);
        let train_secs = start.elapsed().as_secs_f64();
        eprintln!("[acceptance] trained 9 desk-scale models in {train_secs:.0}s");

        TrainedArtifacts {
            eval_split,
            config,
            full,
            nolsb,
            noattn,
            train_secs,
        }
    })
}

/// Per-pixel eval MSE of one parameter set at the native horizon.
fn eval_mse_per_pixel(params: &Parameters, cfg: &ModelConfig, data: &Dataset) -> Result<f64> {
    let all: Vec<usize> = (0..data.sequences).collect();
    let truth = data.continuation(&all, cfg.m, cfg.n)?;
    let tape = Tape::no_grad();
    let mut preds = Vec::new();
    for chunk in all.chunks(16) {
        let x = data.conditioning(chunk, cfg.m)?;
        preds.push(model_forward(&tape, &x, params, cfg, false)?.prediction);
    }
    let refs: Vec<&Tensor> = preds.iter().collect();
    let pred = ops::concat(&tape, &refs, 0)?;
    metrics::mse_per_pixel(&pred, &truth)
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    values[values.len() / 2]
}

// ---------------------------------------------------------------- 05

#[test]
fn criterion_05_desk_scale_learning_beats_copy_last() {
    let art = trained();
    let cfg = &art.config;
    let data = &art.eval_split;

    // copy-last floor on the same held-out split
    let all: Vec<usize> = (0..data.sequences).collect();
    let truth = data.continuation(&all, cfg.m, cfg.n).unwrap();
    let tape = Tape::no_grad();
    let mut preds = Vec::new();
    for &i in &all {
        let x = data.conditioning(&[i], cfg.m).unwrap();
        let frames = ops::reshape(&tape, &x, &[cfg.m, 1, 16, 16]).unwrap();
        let p = copy_last(&frames, cfg.n).unwrap();
        preds.push(ops::reshape(&tape, &p, &[1, cfg.n, 1, 16, 16]).unwrap());
    }
    let refs: Vec<&Tensor> = preds.iter().collect();
    let baseline_pred = ops::concat(&tape, &refs, 0).unwrap();
    let baseline = metrics::mse_per_pixel(&baseline_pred, &truth).unwrap();

    let mut wins = 0;
    let mut detail = String::new();
    for saved in &art.full {
        let params = saved.params();
        let model_mse = eval_mse_per_pixel(&params, cfg, data).unwrap();
        let win = model_mse < baseline;
        if win {
            wins += 1;
        }
        detail.push_str(&format!(
            "seed {}: {model_mse:.5} {} ",
            saved.seed,
            if win { "<" } else { ">=" }
        ));
    }
    detail.push_str(&format!("copy_last {baseline:.5}"));

    // The 30-minute budget is stated for 8 CPU threads; scale it by
    // the cores actually available.
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    let budget = 30.0 * 60.0 * 8.0 / cores as f64;
    // training time covers 9 models; the 3 criterion-5 runs are ~45%
    let crit5_secs = art.train_secs * 0.45;
    assert!(
        crit5_secs < budget,
        "criterion-5 training took {crit5_secs:.0}s, budget {budget:.0}s at {cores} cores"
    );

    report(
        5,
        wins >= 2,
        &format!("{wins}/3 seeds beat copy_last ({detail}); ~{crit5_secs:.0}s on {cores} cores"),
    );
}

// ---------------------------------------------------------------- 06

#[test]
fn criterion_06_long_horizon_miso_vs_mimo() {
    let art = trained();
    let cfg = &art.config;
    let data = &art.eval_split;
    let horizon = 20;

    let all: Vec<usize> = (0..data.sequences).collect();
    let truth = data.continuation(&all, cfg.m, horizon).unwrap();
    let tape = Tape::no_grad();

    let mut miso_last5: Vec<Vec<f64>> = Vec::new();
    let mut mimo_last5: Vec<Vec<f64>> = Vec::new();
    let mut inversions = Vec::new();
    for saved in &art.full {
        let params = saved.params();
        let mut curves = Vec::new();
        for strategy in [RolloutStrategy::Mimo, RolloutStrategy::Miso] {
            let mut preds = Vec::new();
            for chunk in all.chunks(16) {
                let x = data.conditioning(chunk, cfg.m).unwrap();
                preds.push(rollout(&params, cfg, &x, horizon, strategy).unwrap());
            }
            let refs: Vec<&Tensor> = preds.iter().collect();
            let pred = ops::concat(&tape, &refs, 0).unwrap();
            curves.push(
                framewise_error_curve(&pred, &truth, CurveMetric::MsePerPixel, strategy.label())
                    .unwrap(),
            );
        }
        let (mimo, miso) = (&curves[0].values, &curves[1].values);
        mimo_last5.push(mimo[horizon - 5..].to_vec());
        miso_last5.push(miso[horizon - 5..].to_vec());
        for t in horizon - 5..horizon {
            if miso[t] < mimo[t] {
                inversions.push(format!("seed {} step {}", saved.seed, t + 1));
            }
        }
    }

    // median over seeds, per horizon step
    let mut ok = true;
    let mut detail = String::new();
    for t in 0..5 {
        let mut miso: Vec<f64> = miso_last5.iter().map(|c| c[t]).collect();
        let mut mimo: Vec<f64> = mimo_last5.iter().map(|c| c[t]).collect();
        let (miso_med, mimo_med) = (median(&mut miso), median(&mut mimo));
        if miso_med < mimo_med {
            ok = false;
        }
        detail.push_str(&format!("h{}: miso {miso_med:.5} vs mimo {mimo_med:.5}; ", 16 + t));
    }
    if !inversions.is_empty() {
        println!(
            "criterion 06 note: per-seed inversions recorded (not failures): {}",
            inversions.join(", ")
        );
    }
    report(6, ok, &format!("median single-step >= block-recursive at final 5 horizons ({detail})"));
}

// ---------------------------------------------------------------- 07

#[test]
fn criterion_07_ablation_direction() {
    let art = trained();
    let data = &art.eval_split;

    let median_mse = |set: &[SavedModel], mutate: fn(&mut ModelConfig)| -> f64 {
        let mut cfg = desk_config();
        mutate(&mut cfg);
        let mut values: Vec<f64> = set
            .iter()
            .map(|saved| eval_mse_per_pixel(&saved.params(), &cfg, data).unwrap())
            .collect();
        median(&mut values)
    };

    let full = median_mse(&art.full, |_| {});
    let nolsb = median_mse(&art.nolsb, |c| c.use_lsb = false);
    let noattn = median_mse(&art.noattn, |c| c.use_2dmha = false);

    let ok = full <= nolsb && full <= noattn;
    report(
        7,
        ok,
        &format!("median eval per-pixel MSE: full {full:.5} <= no-LSB {nolsb:.5} and <= no-2DMHA {noattn:.5}"),
    );
}

// ---------------------------------------------------------------- 08

#[test]
fn criterion_08_metric_oracles() {
    // ssim(x, x) = 1 exactly
    let mut rng = Rng::new(8);
    let x = Tensor::build(&[1, 16, 16], Fill::Uniform(0.0, 1.0), Some(&mut rng)).unwrap();
    assert_eq!(metrics::ssim(&x, &x).unwrap(), 1.0);

    // PSNR at per-pixel MSE 0.01 is 20 dB
    let p = Tensor::from_vec(vec![0.1; 256], &[1, 16, 16]).unwrap();
    let z = Tensor::from_vec(vec![0.0; 256], &[1, 16, 16]).unwrap();
    let (db, _) = metrics::psnr(&p, &z, 1.0).unwrap();
    assert!((db - 20.0).abs() < 1e-9, "psnr {db}");

    // CSI with 3 hits, 1 miss, 1 false alarm is exactly 0.6
    let pred = Tensor::from_vec(vec![1.0, 1.0, 1.0, 0.0, 1.0, 0.0], &[1, 2, 3]).unwrap();
    let truth = Tensor::from_vec(vec![1.0, 1.0, 1.0, 1.0, 0.0, 0.0], &[1, 2, 3]).unwrap();
    assert_eq!(metrics::csi(&pred, &truth, 0.5).unwrap(), 0.6);

    // frame-sum mse/mae against an independent loop on random 8x8
    let mut worst: f64 = 0.0;
    for seed in 0..5u64 {
        let mut rng = Rng::new(100 + seed);
        let a = Tensor::build(&[3, 1, 8, 8], Fill::Uniform(0.0, 1.0), Some(&mut rng)).unwrap();
        let b = Tensor::build(&[3, 1, 8, 8], Fill::Uniform(0.0, 1.0), Some(&mut rng)).unwrap();
        let (av, bv) = (a.to_vec(), b.to_vec());
        let mut per_frame_sq = [0.0f64; 3];
        let mut per_frame_ab = [0.0f64; 3];
        for t in 0..3 {
            for i in 0..64 {
                let d = av[t * 64 + i] - bv[t * 64 + i];
                per_frame_sq[t] += d * d;
                per_frame_ab[t] += d.abs();
            }
        }
        let brute_mse = per_frame_sq.iter().sum::<f64>() / 3.0;
        let brute_mae = per_frame_ab.iter().sum::<f64>() / 3.0;
        let dm = (metrics::mse(&a, &b).unwrap() - brute_mse).abs();
        let da = (metrics::mae(&a, &b).unwrap() - brute_mae).abs();
        assert!(dm < 1e-12 && da < 1e-12, "brute-force disagreement {dm} / {da}");
        worst = worst.max(dm).max(da);
    }
    report(8, true, &format!("ssim/psnr/csi oracles exact, mse/mae vs brute force within {worst:.1e}"));
}

// ---------------------------------------------------------------- 09

#[test]
fn criterion_09_format_round_trips() {
    let dir = tempfile::tempdir().unwrap();

    // VSEQ round trip preserves every 32-bit value
    let world = SpriteWorldConfig {
        num_sequences: 10,
        ..Default::default()
    };
    let ds = generate_sprites(&world, None).unwrap();
    let vpath = dir.path().join("rt.vseq");
    mimo_seer_core::data::write_vseq(&ds, &vpath).unwrap();
    let back = mimo_seer_core::data::read_vseq(&vpath).unwrap().dataset;
    assert!(ds
        .data
        .iter()
        .zip(&back.data)
        .all(|(a, b)| a.to_bits() == b.to_bits()));

    // checkpoint round trip: second save of the loaded state is
    // byte-identical (f32 is a fixed point of save/load)
    let cfg = gradcheck_model_cfg();
    let hyper = TrainHyper {
        steps: 4,
        batch_size: 4,
        ..Default::default()
    };
    let train_world = SpriteWorldConfig {
        height: 8,
        width: 8,
        sprite_size: 3,
        num_sprites: 1,
        seq_len: 4,
        num_sequences: 8,
        seed: 9,
        ..Default::default()
    };
    let data = generate_sprites(&train_world, None).unwrap();
    let mut trainer = training::Trainer::new(cfg.clone(), hyper, 13).unwrap();
    trainer.run(&data, 4, |_| {}).unwrap();
    let cpath1 = dir.path().join("a.mvpc");
    let cpath2 = dir.path().join("b.mvpc");
    training::save_checkpoint(&cpath1, &trainer.snapshot("h")).unwrap();
    let loaded = training::load_checkpoint(&cpath1).unwrap();
    training::save_checkpoint(&cpath2, &loaded).unwrap();
    let reloaded = training::load_checkpoint(&cpath2).unwrap();
    for ((pa, ta), (pb, tb)) in loaded.params.iter().zip(reloaded.params.iter()) {
        assert_eq!(pa, pb);
        let (va, vb) = (ta.to_vec(), tb.to_vec());
        assert!(va.iter().zip(&vb).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    // a reloaded checkpoint reproduces eval JSON byte-identically
    let eval_report = |params: &Parameters, cfg: &ModelConfig| -> Vec<u8> {
        let all: Vec<usize> = (0..data.sequences).collect();
        let x = data.conditioning(&all, cfg.m).unwrap();
        let truth = data.continuation(&all, cfg.m, cfg.n).unwrap();
        let tape = Tape::no_grad();
        let pred = model_forward(&tape, &x, params, cfg, false).unwrap().prediction;
        // frames are 8x8 (below the ssim window), so compare the raw
        // per-frame mse/mae lists instead of the full report
        let mse = metrics::mse(&pred, &truth).unwrap();
        let mae = metrics::mae(&pred, &truth).unwrap();
        format!("{{\"mse\":{mse},\"mae\":{mae}}}").into_bytes()
    };
    let j1 = eval_report(&loaded.params, &loaded.config);
    let j2 = eval_report(&reloaded.params, &reloaded.config);
    assert_eq!(j1, j2);

    report(9, true, "VSEQ and checkpoint round trips preserve all values; reloaded eval bytes identical");
}

// ---------------------------------------------------------------- 10

fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_mimo-seer"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn mimo-seer")
}

#[test]
fn criterion_10_cli_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["--seed", "21", "gen-data", "--frames", "12", "--size", "16", "--count", "24", "--out", "w.vseq"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let cfg = r#"{"model": {"m": 3, "n": 3, "h0": 16, "w0": 16, "patch": 4, "channels": 16, "heads": 2, "enc_blocks": 1, "dec_blocks": 1},
 "train": {"steps": 40, "batch_size": 8},
 "data": {"path": "w.vseq", "train_frac": 0.75},
 "checkpoint_every": 1000, "seed": 17, "out_dir": "run"}"#;
    let cfg_path = dir.path().join("cfg.json");
    std::fs::write(&cfg_path, cfg).unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let mut outputs: Vec<(Vec<u8>, Vec<u8>)> = Vec::new();
    for _ in 0..2 {
        let out = run_in(dir.path(), &["--config", cfg, "--quiet", "train"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((
            std::fs::read(dir.path().join("run/loss.csv")).unwrap(),
            std::fs::read(dir.path().join("run/metrics.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "loss CSV must be bitwise identical");
    assert_eq!(outputs[0].1, outputs[1].1, "metrics JSON must be bitwise identical");

    let mut evals = Vec::new();
    for name in ["e1.json", "e2.json"] {
        let out = run_in(
            dir.path(),
            &["--config", cfg, "--quiet", "eval", "--checkpoint", "run/checkpoint.mvpc", "--out", name],
        );
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        evals.push(std::fs::read(dir.path().join(name)).unwrap());
    }
    assert_eq!(evals[0], evals[1], "eval JSON must be bitwise identical");

    report(10, true, "train and eval artifacts bitwise identical across consecutive runs");
}
