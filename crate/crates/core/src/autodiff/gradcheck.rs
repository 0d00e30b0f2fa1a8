use rand::seq::index::sample;

use super::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::seed;

/// Tensors with more coordinates than this are checked on a sample.
pub const FULL_CHECK_LIMIT: usize = 400;
/// Sample size used above [`FULL_CHECK_LIMIT`].
pub const SAMPLED_COORDS: usize = 200;

fn evaluate<F>(f: &F, params: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|t| g.constant(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    let v = g.value(loss);
    if v.len() != 1 {
        return Err(Error::NonScalarLoss(v.shape().to_vec()));
    }
    let x = v.item();
    if !x.is_finite() {
        return Err(Error::NonFinite("grad_check loss".into()));
    }
    Ok(x)
}

/// Largest relative error `|a - n| / max(|a|, |n|, 1e-8)` between the
/// analytic gradient of `f` and central differences with step `h`.
///
/// `f` builds a scalar loss from the parameter nodes it is handed.
pub fn grad_check<F>(f: F, params: &[Tensor], h: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = params.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&mut g, &vars)?;
    if !g.value(loss).item().is_finite() {
        return Err(Error::NonFinite("grad_check loss".into()));
    }
    g.backward(loss)?;

    let mut worst = 0.0f64;
    let mut probe = params.to_vec();
    for (pi, t) in params.iter().enumerate() {
        let analytic = g
            .grad(vars[pi])
            .map(<[f64]>::to_vec)
            .unwrap_or_else(|| vec![0.0; t.len()]);
        let coords: Vec<usize> = if t.len() > FULL_CHECK_LIMIT {
            let mut rng = seed::rng(0x6772_6164, pi as u64);
            let mut idx = sample(&mut rng, t.len(), SAMPLED_COORDS).into_vec();
            idx.sort_unstable();
            idx
        } else {
            (0..t.len()).collect()
        };
        for k in coords {
            let orig = t.values()[k];
            probe[pi].values_mut()[k] = orig + h;
            let up = evaluate(&f, &probe)?;
            probe[pi].values_mut()[k] = orig - h;
            let down = evaluate(&f, &probe)?;
            probe[pi].values_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let err = grad_check(
            |g, v| g.dot(v[0], v[0]),
            &[Tensor::vector(vec![3.0, -1.0, 0.25])],
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let err = grad_check(
            |g, v| {
                let s = g.scale(v[0], f64::INFINITY);
                g.dot(s, s)
            },
            &[Tensor::vector(vec![1.0])],
            1e-5,
        );
        assert!(matches!(err, Err(Error::NonFinite(_))));
    }
}
