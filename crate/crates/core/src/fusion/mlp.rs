//! Context-free reference classifier: one ReLU hidden layer over a single
//! fused utterance vector.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{argmax, softmax, Adam, Bound, Graph, ParamSet, Tensor, Var};
use crate::encoders::{EarlyStopping, TrainConfig};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpParams {
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: 64,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MlpModel {
    input_dim: usize,
    params: ParamSet,
}

impl MlpModel {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, seed_value: u64) -> Self {
        let mut rng = seed::rng(seed_value, 0x6d6c_70);
        let mut params = ParamSet::new();
        let s1 = (6.0 / (input_dim + hidden) as f64).sqrt();
        let s2 = (6.0 / (hidden + classes) as f64).sqrt();
        params.insert_uniform("l1.w", &[input_dim, hidden], s1, &mut rng);
        params.insert("l1.b", Tensor::zeros(&[hidden]));
        params.insert_uniform("l2.w", &[hidden, classes], s2, &mut rng);
        params.insert("l2.b", Tensor::zeros(&[classes]));
        MlpModel { input_dim, params }
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    fn forward(&self, g: &mut Graph, b: &Bound, x: &[f64]) -> Result<Var> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                what: "MLP input".into(),
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let x = g.constant(Tensor::vector(x.to_vec()));
        let h = g.dense(x, b.get("l1.w"), Some(b.get("l1.b")))?;
        let h = g.relu(h);
        g.dense(h, b.get("l2.w"), Some(b.get("l2.b")))
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let b = self.params.bind_frozen(&mut g);
        let z = self.forward(&mut g, &b, x)?;
        Ok(g.value(z).values().to_vec())
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.logits(x)?))
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    /// Accuracy and mean cross-entropy on `(xs, ys)`.
    fn evaluate(&self, xs: &[Vec<f64>], ys: &[usize]) -> Result<(f64, f64)> {
        let (mut hits, mut loss) = (0usize, 0.0);
        for (x, &y) in xs.iter().zip(ys) {
            let z = self.logits(x)?;
            hits += usize::from(argmax(&z) == y);
            loss -= softmax(&z)[y].max(f64::MIN_POSITIVE).ln();
        }
        let n = ys.len().max(1) as f64;
        Ok((hits as f64 / n, loss / n))
    }
}

/// Mini-batch Adam with early stopping on `val` (skipped when empty).
pub fn mlp_train(
    xs: &[Vec<f64>],
    ys: &[usize],
    val_xs: &[Vec<f64>],
    val_ys: &[usize],
    classes: usize,
    params: &MlpParams,
    seed_value: u64,
) -> Result<MlpModel> {
    if xs.len() != ys.len() || val_xs.len() != val_ys.len() {
        return Err(Error::ShapeMismatch {
            op: "mlp_train",
            detail: "inputs and labels differ in length".into(),
        });
    }
    let dim = xs.first().ok_or(Error::EmptyInput("mlp_train"))?.len();
    if let Some(&l) = ys.iter().chain(val_ys).find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: l, classes });
    }
    if ys.iter().all(|&l| l == ys[0]) {
        return Err(Error::ClassDegenerate);
    }
    let mut model = MlpModel::new(dim, params.hidden, classes, seed_value);
    let mut adam = Adam::new(&model.params, params.train.adam);
    let mut rng = seed::rng(seed_value, 0x6f72_6465);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut stopper = EarlyStopping::new(params.train.patience);
    for epoch in 0..params.train.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(params.train.batch_size.max(1)) {
            let mut g = Graph::new();
            let bound = model.params.bind(&mut g);
            let losses = chunk
                .iter()
                .map(|&i| {
                    let z = model.forward(&mut g, &bound, &xs[i])?;
                    g.softmax_cross_entropy(z, ys[i])
                })
                .collect::<Result<Vec<_>>>()?;
            let loss = g.mean(&losses)?;
            if !g.value(loss).item().is_finite() {
                return Err(Error::NonFinite(format!("MLP loss at epoch {epoch}")));
            }
            g.backward(loss)?;
            let grads = model.params.gradients(&bound, &g);
            adam.step(&mut model.params, &grads);
        }
        if val_xs.is_empty() {
            continue;
        }
        let (acc, val_loss) = model.evaluate(val_xs, val_ys)?;
        if stopper.observe(epoch, acc, val_loss, || model.params.clone()) {
            break;
        }
    }
    if let Some(best) = stopper.into_best() {
        model.params = best.state;
    }
    Ok(model)
}
