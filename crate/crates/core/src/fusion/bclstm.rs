//! Bidirectional contextual LSTM over the fused utterance vectors of one
//! video, with a per-utterance softmax head on `[h_fwd; h_bwd]`.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{argmax, bilstm_sequence, softmax, init_lstm, Adam, Bound, Graph, LstmVars, ParamSet, Tensor, Var};
use crate::encoders::{EarlyStopping, TrainConfig};
use crate::error::{Error, Result};
use crate::seed;

/// One video: fused utterance vectors in position order and their labels.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSequence {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl LabeledSequence {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcLstmParams {
    pub hidden: usize,
    pub train: TrainConfig,
}

impl Default for BcLstmParams {
    fn default() -> Self {
        BcLstmParams {
            hidden: 64,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceTrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub final_loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcLstmModel {
    input_dim: usize,
    hidden: usize,
    classes: usize,
    params: ParamSet,
}

impl BcLstmModel {
    pub fn new(input_dim: usize, hidden: usize, classes: usize, seed_value: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || classes < 2 {
            return Err(Error::InvalidArgument(format!(
                "bc-LSTM needs positive input and hidden sizes and at least 2 classes \
                 (got {input_dim}, {hidden}, {classes})"
            )));
        }
        let mut rng = seed::rng(seed_value, 0x6263_6c73);
        let mut params = ParamSet::new();
        init_lstm(&mut params, "fwd", input_dim, hidden, &mut rng);
        init_lstm(&mut params, "bwd", input_dim, hidden, &mut rng);
        let s = (6.0 / (2 * hidden + classes) as f64).sqrt();
        params.insert_uniform("head.w", &[2 * hidden, classes], s, &mut rng);
        params.insert("head.b", Tensor::zeros(&[classes]));
        Ok(BcLstmModel {
            input_dim,
            hidden,
            classes,
            params,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Builds the network for one sequence; returns one logit node per
    /// utterance.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, inputs: &[Vec<f64>]) -> Result<Vec<Var>> {
        if inputs.is_empty() {
            return Err(Error::EmptyInput("bclstm_predict"));
        }
        if let Some(x) = inputs.iter().find(|x| x.len() != self.input_dim) {
            return Err(Error::DimensionMismatch {
                what: "bc-LSTM input".into(),
                expected: self.input_dim,
                found: x.len(),
            });
        }
        let xs: Vec<Var> = inputs
            .iter()
            .map(|x| g.constant(Tensor::vector(x.clone())))
            .collect();
        let fwd = LstmVars::from_bound(bound, "fwd");
        let bwd = LstmVars::from_bound(bound, "bwd");
        let states = bilstm_sequence(g, &xs, &fwd, &bwd)?;
        let (w, b) = (bound.get("head.w"), bound.get("head.b"));
        states.into_iter().map(|h| g.dense(h, w, Some(b))).collect()
    }

    pub fn logits(&self, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let out = self.forward(&mut g, &bound, inputs)?;
        Ok(out.iter().map(|&v| g.value(v).values().to_vec()).collect())
    }

    /// Argmax per utterance; ties go to the lowest class id.
    pub fn predict(&self, inputs: &[Vec<f64>]) -> Result<Vec<usize>> {
        Ok(self.logits(inputs)?.iter().map(|l| argmax(l)).collect())
    }

    /// Accuracy and mean per-utterance cross-entropy over `data`.
    fn evaluate(&self, data: &[LabeledSequence]) -> Result<(f64, f64)> {
        let (mut correct, mut total, mut loss) = (0usize, 0usize, 0.0);
        for s in data {
            for (z, &l) in self.logits(&s.inputs)?.iter().zip(&s.labels) {
                if argmax(z) == l {
                    correct += 1;
                }
                loss -= softmax(z)[l].max(f64::MIN_POSITIVE).ln();
                total += 1;
            }
        }
        if total == 0 {
            return Ok((0.0, 0.0));
        }
        Ok((correct as f64 / total as f64, loss / total as f64))
    }

    fn meta(&self) -> serde_json::Value {
        serde_json::json!({
            "model": "bc_lstm",
            "input_dim": self.input_dim,
            "hidden": self.hidden,
            "classes": self.classes,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.params.save(path, &self.meta())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (params, meta) = ParamSet::load(path)?;
        let field = |k: &str| {
            meta[k]
                .as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| Error::Checkpoint(format!("bc-LSTM checkpoint lacks '{k}'")))
        };
        let mut model = BcLstmModel::new(field("input_dim")?, field("hidden")?, field("classes")?, 0)?;
        for name in model.params.names().to_vec() {
            let want = model.params.get(&name).map(|t| t.shape().to_vec());
            match params.get(&name) {
                Some(t) if Some(t.shape().to_vec()) == want => model.params.insert(name, t.clone()),
                _ => return Err(Error::Checkpoint(format!("parameter '{name}' missing or misshapen"))),
            }
        }
        Ok(model)
    }
}

fn check_sequences(data: &[LabeledSequence], classes: usize) -> Result<()> {
    for s in data {
        if s.inputs.len() != s.labels.len() {
            return Err(Error::ShapeMismatch {
                op: "bclstm_train",
                detail: format!("{} inputs vs {} labels", s.inputs.len(), s.labels.len()),
            });
        }
        if s.is_empty() {
            return Err(Error::EmptyInput("bclstm_train sequence"));
        }
        if let Some(&l) = s.labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label: l, classes });
        }
    }
    Ok(())
}

/// Trains on one video per optimizer step with the mean per-utterance
/// cross-entropy. Early stopping keeps the best validation epoch; with an
/// empty `val` every epoch runs.
pub fn bclstm_train(
    train: &[LabeledSequence],
    val: &[LabeledSequence],
    classes: usize,
    params: &BcLstmParams,
    seed_value: u64,
) -> Result<(BcLstmModel, SequenceTrainReport)> {
    let first = train.first().ok_or(Error::EmptyInput("bclstm_train"))?;
    let input_dim = first
        .inputs
        .first()
        .ok_or(Error::EmptyInput("bclstm_train sequence"))?
        .len();
    check_sequences(train, classes)?;
    check_sequences(val, classes)?;
    let l0 = first.labels[0];
    if train.iter().all(|s| s.labels.iter().all(|&l| l == l0)) {
        return Err(Error::ClassDegenerate);
    }

    let mut model = BcLstmModel::new(input_dim, params.hidden, classes, seed_value)?;
    let mut adam = Adam::new(&model.params, params.train.adam);
    let mut rng = seed::rng(seed_value, 0x6f72_6465);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let total: usize = train.iter().map(LabeledSequence::len).sum();

    let mut stopper = EarlyStopping::new(params.train.patience);
    let mut epochs_run = 0;
    let mut final_loss = f64::NAN;
    for epoch in 0..params.train.epochs {
        epochs_run = epoch + 1;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for &i in &order {
            let s = &train[i];
            let mut g = Graph::new();
            let bound = model.params.bind(&mut g);
            let logits = model.forward(&mut g, &bound, &s.inputs)?;
            let losses = logits
                .iter()
                .zip(&s.labels)
                .map(|(&z, &l)| g.softmax_cross_entropy(z, l))
                .collect::<Result<Vec<_>>>()?;
            let loss = g.mean(&losses)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("bc-LSTM loss at epoch {epoch}")));
            }
            epoch_loss += lv * s.len() as f64;
            g.backward(loss)?;
            let grads = model.params.gradients(&bound, &g);
            adam.step(&mut model.params, &grads);
        }
        final_loss = epoch_loss / total as f64;
        if val.is_empty() {
            continue;
        }
        let (acc, val_loss) = model.evaluate(val)?;
        log::debug!("bc-LSTM epoch {epoch}: loss {final_loss:.4} val {acc:.4}");
        if stopper.observe(epoch, acc, val_loss, || model.params.clone()) {
            break;
        }
    }
    let mut best_epoch = epochs_run.saturating_sub(1);
    let mut val_accuracy = None;
    if let Some(best) = stopper.into_best() {
        model.params = best.state;
        best_epoch = best.epoch;
        val_accuracy = Some(best.accuracy);
    }
    let (train_accuracy, _) = model.evaluate(train)?;
    Ok((
        model,
        SequenceTrainReport {
            epochs_run,
            best_epoch,
            train_accuracy,
            val_accuracy,
            final_loss,
        },
    ))
}
