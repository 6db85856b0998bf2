use mimo_seer_core::numerics::ops::conv3d;
use mimo_seer_core::numerics::tape::Tape;
use mimo_seer_core::numerics::tensor::{Fill, Tensor};
use mimo_seer_core::numerics::rng::Rng;
use mimo_seer_core::numerics::ops::{reduce, ReduceKind};
use std::time::Instant;

fn main() {
    let mut rng = Rng::new(1);
    // toy training conv3d: B=16, C=32, D=5, H=W=4, k=3x3x3 pad 1
    let x = Tensor::build(&[16, 32, 5, 4, 4], Fill::Normal(0.0, 1.0), Some(&mut rng)).unwrap().requiring_grad();
    let w = Tensor::build(&[32, 32, 3, 3, 3], Fill::Normal(0.0, 0.05), Some(&mut rng)).unwrap().requiring_grad();
    let b = Tensor::build(&[32], Fill::Zeros, None).unwrap().requiring_grad();

    // forward only
    let iters = 30;
    let t0 = Instant::now();
    for _ in 0..iters {
        let tape = Tape::no_grad();
        let y = conv3d(&tape, &x, &w, Some(&b), 1).unwrap();
        std::hint::black_box(y.data()[0]);
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    let macs = 16.0 * 32.0 * 80.0 * (32.0 * 27.0);
    println!("conv3d fwd: {:.3} ms  {:.2} GFLOP/s", dt * 1e3, 2.0 * macs / dt / 1e9);

    // fwd + bwd
    let t0 = Instant::now();
    for _ in 0..iters {
        let tape = Tape::new();
        let y = conv3d(&tape, &x, &w, Some(&b), 1).unwrap();
        let loss = reduce(&tape, &y, ReduceKind::SumOfSquares, None).unwrap();
        tape.backward(&loss).unwrap();
        x.clear_grad(); w.clear_grad(); b.clear_grad();
    }
    let dt = t0.elapsed().as_secs_f64() / iters as f64;
    println!("conv3d fwd+bwd: {:.3} ms  {:.2} GFLOP/s equiv", dt * 1e3, 3.0 * 2.0 * macs / dt / 1e9);
}
