//! LSTM cell and bidirectional sequence encoder on the tape.
//!
//! Gate layout along the `4H` axis is `[input, forget, candidate, output]`:
//!
//! ```text
//! z = x·W_x + h·W_h + b
//! i = σ(z_i)   f = σ(z_f)   g = tanh(z_g)   o = σ(z_o)
//! c' = f ⊙ c + i ⊙ g        h' = o ⊙ tanh(c')
//! ```

use rand_chacha::ChaCha8Rng;

use super::{Bound, Graph, ParamSet, Tensor, Var};
use crate::error::{Error, Result};

/// Bound parameters of one LSTM direction.
#[derive(Clone, Copy, Debug)]
pub struct LstmVars {
    pub w_x: Var,
    pub w_h: Var,
    pub b: Var,
}

impl LstmVars {
    pub fn from_bound(bound: &Bound, prefix: &str) -> Self {
        LstmVars {
            w_x: bound.get(&format!("{prefix}.w_x")),
            w_h: bound.get(&format!("{prefix}.w_h")),
            b: bound.get(&format!("{prefix}.b")),
        }
    }
}

/// Adds `{prefix}.w_x [d, 4H]`, `{prefix}.w_h [H, 4H]` and `{prefix}.b [4H]`
/// with Glorot-uniform weights and the forget-gate bias set to 1.
pub fn init_lstm(params: &mut ParamSet, prefix: &str, input: usize, hidden: usize, rng: &mut ChaCha8Rng) {
    let sx = (6.0 / (input + 4 * hidden) as f64).sqrt();
    let sh = (6.0 / (5 * hidden) as f64).sqrt();
    params.insert_uniform(format!("{prefix}.w_x"), &[input, 4 * hidden], sx, rng);
    params.insert_uniform(format!("{prefix}.w_h"), &[hidden, 4 * hidden], sh, rng);
    let mut b = vec![0.0; 4 * hidden];
    b[hidden..2 * hidden].iter_mut().for_each(|x| *x = 1.0);
    params.insert(format!("{prefix}.b"), Tensor::vector(b));
}

fn hidden_size(g: &Graph, p: &LstmVars) -> Result<usize> {
    match g.value(p.w_h).shape() {
        [h, four_h] if *four_h == 4 * h => Ok(*h),
        s => Err(Error::ShapeMismatch {
            op: "lstm_cell",
            detail: format!("recurrent weight shape {s:?} is not [H, 4H]"),
        }),
    }
}

/// One LSTM step; returns `(h, c)`.
pub fn lstm_cell(g: &mut Graph, x: Var, h_prev: Var, c_prev: Var, p: &LstmVars) -> Result<(Var, Var)> {
    let hs = hidden_size(g, p)?;
    for (name, v) in [("h_prev", h_prev), ("c_prev", c_prev)] {
        if g.value(v).shape() != [hs] {
            return Err(Error::ShapeMismatch {
                op: "lstm_cell",
                detail: format!("{name} shape {:?} vs hidden {hs}", g.value(v).shape()),
            });
        }
    }
    let zx = g.dense(x, p.w_x, Some(p.b))?;
    let zh = g.dense(h_prev, p.w_h, None)?;
    let z = g.add(zx, zh)?;
    let zi = g.slice(z, 0, hs)?;
    let zf = g.slice(z, hs, hs)?;
    let zg = g.slice(z, 2 * hs, hs)?;
    let zo = g.slice(z, 3 * hs, hs)?;
    let i = g.sigmoid(zi);
    let f = g.sigmoid(zf);
    let cand = g.tanh(zg);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, c_prev)?;
    let write = g.mul(i, cand)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok((h, c))
}

/// Runs `p` over `inputs` from zero state; returns the hidden state at
/// every step in input order.
pub fn lstm_sequence(g: &mut Graph, inputs: &[Var], p: &LstmVars, reverse: bool) -> Result<Vec<Var>> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("lstm_sequence"));
    }
    let hs = hidden_size(g, p)?;
    let mut h = g.constant(Tensor::zeros(&[hs]));
    let mut c = g.constant(Tensor::zeros(&[hs]));
    let mut out = vec![h; inputs.len()];
    let order: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..inputs.len()).rev())
    } else {
        Box::new(0..inputs.len())
    };
    for t in order {
        (h, c) = lstm_cell(g, inputs[t], h, c, p)?;
        out[t] = h;
    }
    Ok(out)
}

/// Bidirectional LSTM: output `t` is `[h_fwd[t]; h_bwd[t]]` of width `2H`.
pub fn bilstm_sequence(g: &mut Graph, inputs: &[Var], fwd: &LstmVars, bwd: &LstmVars) -> Result<Vec<Var>> {
    let f = lstm_sequence(g, inputs, fwd, false)?;
    let b = lstm_sequence(g, inputs, bwd, true)?;
    f.into_iter()
        .zip(b)
        .map(|(hf, hb)| g.concat(&[hf, hb]))
        .collect()
}
