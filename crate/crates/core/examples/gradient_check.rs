//! Checks reverse-mode gradients against central differences for a dense
//! layer, a convolution with max-pooling and a bidirectional LSTM.

use mmsb::autodiff::{bilstm_sequence, grad_check, init_lstm, LstmVars, ParamSet, Tensor};
use mmsb::seed;
use rand_distr::{Distribution, StandardNormal};

fn randn(shape: &[usize], stream: u64) -> Tensor {
    let mut rng = seed::rng(7, stream);
    let n = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.5 * z
        })
        .collect();
    Tensor::new(shape.to_vec(), v).unwrap()
}

fn main() -> mmsb::Result<()> {
    let h = 1e-5;

    let dense = grad_check(
        |g, p| {
            let z = g.dense(p[0], p[1], Some(p[2]))?;
            let t = g.tanh(z);
            g.softmax_cross_entropy(t, 1)
        },
        &[randn(&[5], 0), randn(&[5, 3], 1), randn(&[3], 2)],
        h,
    )?;
    println!("dense + tanh + cross-entropy   max rel err {dense:.2e}");

    let conv = grad_check(
        |g, p| {
            let c = g.conv1d(p[0], p[1], p[2])?;
            let r = g.relu(c);
            let m = g.max_pool_time(r)?;
            g.softmax_cross_entropy(m, 0)
        },
        &[randn(&[7, 4], 3), randn(&[3, 4, 2], 4), randn(&[2], 5)],
        h,
    )?;
    println!("conv1d + relu + max-pool       max rel err {conv:.2e}");

    let mut params = ParamSet::new();
    let mut rng = seed::rng(7, 6);
    init_lstm(&mut params, "f", 3, 4, &mut rng);
    init_lstm(&mut params, "b", 3, 4, &mut rng);
    // parameter order: f.w_x, f.w_h, f.b, b.w_x, b.w_h, b.b, then 4 inputs
    let mut tensors = params.tensors().to_vec();
    tensors.extend((0..4).map(|t| randn(&[3], 10 + t)));
    let lstm = grad_check(
        |g, p| {
            let fwd = LstmVars { w_x: p[0], w_h: p[1], b: p[2] };
            let bwd = LstmVars { w_x: p[3], w_h: p[4], b: p[5] };
            let hs = bilstm_sequence(g, &p[6..], &fwd, &bwd)?;
            let pooled = g.sum(&hs)?;
            g.softmax_cross_entropy(pooled, 2)
        },
        &tensors,
        h,
    )?;
    println!("bidirectional LSTM (4 steps)   max rel err {lstm:.2e}");
    Ok(())
}
