//! Kim-style text CNN: token embeddings → parallel valid convolutions of
//! several widths → max-over-time pooling → ReLU → concatenation → dense
//! projection → ReLU.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{EarlyStopping, TrainConfig};
use crate::autodiff::{argmax, Adam, Bound, Graph, ParamSet, Tensor, Var};
use crate::corpus::{UtteranceRecord, Vocab, PAD_ID, UNK_ID};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TextEncoderConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    pub filter_widths: Vec<usize>,
    pub maps_per_width: usize,
    pub dense_dim: usize,
    pub max_len: usize,
    /// Optional pretrained embeddings: one token per line followed by
    /// `embed_dim` decimals.
    pub embedding_file: Option<PathBuf>,
}

impl Default for TextEncoderConfig {
    fn default() -> Self {
        TextEncoderConfig {
            vocab_size: 2,
            embed_dim: 300,
            filter_widths: vec![3, 4, 5],
            maps_per_width: 50,
            dense_dim: 100,
            max_len: 50,
            embedding_file: None,
        }
    }
}

impl TextEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("text encoder: {m}")));
        if self.filter_widths.is_empty() {
            return bad("filter_widths is empty");
        }
        if self.filter_widths.iter().any(|&w| w == 0 || w > self.max_len) {
            return bad("every filter width must be in 1..=max_len");
        }
        if self.dense_dim == 0 || self.maps_per_width == 0 || self.embed_dim == 0 {
            return bad("dense_dim, maps_per_width and embed_dim must be positive");
        }
        if self.vocab_size < 2 {
            return bad("vocab_size must include the UNK and PAD ids");
        }
        Ok(())
    }

    fn pooled_dim(&self) -> usize {
        self.filter_widths.len() * self.maps_per_width
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TextEncoder {
    config: TextEncoderConfig,
    params: ParamSet,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TextTrainReport {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub train_accuracy: f64,
    pub val_accuracy: Option<f64>,
    pub final_loss: f64,
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

impl TextEncoder {
    /// Random initialization: embeddings uniform in ±0.1, Glorot-uniform
    /// filters and projection, zero biases.
    pub fn new(config: TextEncoderConfig, seed_value: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = seed::rng(seed_value, 0x7465_7874);
        let mut params = ParamSet::new();
        params.insert_uniform(
            "embedding",
            &[config.vocab_size, config.embed_dim],
            0.1,
            &mut rng,
        );
        for &k in &config.filter_widths {
            params.insert_uniform(
                format!("conv{k}.w"),
                &[k, config.embed_dim, config.maps_per_width],
                glorot(k * config.embed_dim, config.maps_per_width),
                &mut rng,
            );
            params.insert(format!("conv{k}.b"), Tensor::zeros(&[config.maps_per_width]));
        }
        params.insert_uniform(
            "dense.w",
            &[config.pooled_dim(), config.dense_dim],
            glorot(config.pooled_dim(), config.dense_dim),
            &mut rng,
        );
        params.insert("dense.b", Tensor::zeros(&[config.dense_dim]));
        Ok(TextEncoder { config, params })
    }

    pub fn from_params(config: TextEncoderConfig, params: ParamSet) -> Result<Self> {
        config.validate()?;
        let expected = TextEncoder::new(config.clone(), 0)?;
        for name in expected.params.names() {
            let want = expected.params.get(name).map(Tensor::shape);
            let got = params.get(name).map(Tensor::shape);
            if want != got {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' has shape {got:?}, expected {want:?}"
                )));
            }
        }
        Ok(TextEncoder { config, params })
    }

    pub fn config(&self) -> &TextEncoderConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    pub fn output_dim(&self) -> usize {
        self.config.dense_dim
    }

    /// Overwrites embedding rows for tokens found in `vocab`; returns how
    /// many rows were replaced.
    pub fn load_pretrained(&mut self, path: &Path, vocab: &Vocab) -> Result<usize> {
        let d = self.config.embed_dim;
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let table = self.params.get_mut("embedding").expect("embedding exists");
        let mut replaced = 0;
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let mut parts = line.split_whitespace();
            let Some(token) = parts.next() else { continue };
            let values = parts
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Malformed {
                    location: format!("{}:{}", path.display(), n + 1),
                    message: e.to_string(),
                })?;
            if values.len() != d {
                return Err(Error::DimensionMismatch {
                    what: format!("embedding for '{token}'"),
                    expected: d,
                    found: values.len(),
                });
            }
            let id = vocab.lookup(token);
            if id == UNK_ID && token != "<unk>" {
                continue;
            }
            let id = id as usize;
            if id < self.config.vocab_size {
                table.values_mut()[id * d..(id + 1) * d].copy_from_slice(&values);
                replaced += 1;
            }
        }
        Ok(replaced)
    }

    /// Maps out-of-range ids to UNK, truncates to `max_len` and right-pads
    /// with PAD up to the widest filter.
    pub fn prepare_tokens(&self, tokens: &[u32]) -> Result<Vec<u32>> {
        if tokens.is_empty() {
            return Err(Error::EmptyInput("encode_text"));
        }
        let widest = *self.config.filter_widths.iter().max().expect("validated");
        let mut ids: Vec<u32> = tokens
            .iter()
            .take(self.config.max_len)
            .map(|&t| {
                if (t as usize) < self.config.vocab_size {
                    t
                } else {
                    UNK_ID
                }
            })
            .collect();
        while ids.len() < widest {
            ids.push(PAD_ID);
        }
        Ok(ids)
    }

    /// Builds the encoder on `g` with parameters `bound`; returns the
    /// `dense_dim` representation node.
    pub fn forward(&self, g: &mut Graph, bound: &Bound, tokens: &[u32]) -> Result<Var> {
        let ids = self.prepare_tokens(tokens)?;
        let emb = g.embed(bound.get("embedding"), &ids)?;
        let mut pooled = Vec::with_capacity(self.config.filter_widths.len());
        for &k in &self.config.filter_widths {
            let conv = g.conv1d(
                emb,
                bound.get(&format!("conv{k}.w")),
                bound.get(&format!("conv{k}.b")),
            )?;
            let pool = g.max_pool_time(conv)?;
            pooled.push(g.relu(pool));
        }
        let joined = g.concat(&pooled)?;
        let dense = g.dense(joined, bound.get("dense.w"), Some(bound.get("dense.b")))?;
        Ok(g.relu(dense))
    }

    /// Frozen-encoder inference.
    pub fn encode(&self, tokens: &[u32]) -> Result<Vec<f64>> {
        let mut g = Graph::new();
        let bound = self.params.bind_frozen(&mut g);
        let out = self.forward(&mut g, &bound, tokens)?;
        Ok(g.value(out).values().to_vec())
    }

    pub fn checkpoint_meta(&self) -> serde_json::Value {
        serde_json::json!({ "model": "text_cnn", "config": self.config })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        self.params.save(path, &self.checkpoint_meta())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let (params, meta) = ParamSet::load(path)?;
        let config: TextEncoderConfig = serde_json::from_value(meta["config"].clone())?;
        Self::from_params(config, params)
    }
}

fn head_logits(g: &mut Graph, head: &Bound, rep: Var) -> Result<Var> {
    g.dense(rep, head.get("head.w"), Some(head.get("head.b")))
}

/// Accuracy and mean cross-entropy of encoder + head on `data`.
fn evaluate(encoder: &TextEncoder, head: &ParamSet, data: &[&UtteranceRecord]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Ok((0.0, 0.0));
    }
    let mut correct = 0usize;
    let mut loss = 0.0;
    for u in data {
        let mut g = Graph::new();
        let enc = encoder.params.bind_frozen(&mut g);
        let hb = head.bind_frozen(&mut g);
        let rep = encoder.forward(&mut g, &enc, &u.tokens)?;
        let logits = head_logits(&mut g, &hb, rep)?;
        if argmax(g.value(logits).values()) == u.label {
            correct += 1;
        }
        let ce = g.softmax_cross_entropy(logits, u.label)?;
        loss += g.value(ce).item();
    }
    let n = data.len() as f64;
    Ok((correct as f64 / n, loss / n))
}

/// Trains the text CNN with a temporary softmax head over `classes`
/// classes, then discards the head. Early stopping keeps the parameters
/// of the best validation epoch; with an empty `val` set every epoch runs
/// and the final parameters are kept.
pub fn train_text_encoder(
    train: &[&UtteranceRecord],
    val: &[&UtteranceRecord],
    classes: usize,
    config: &TextEncoderConfig,
    train_cfg: &TrainConfig,
    seed_value: u64,
) -> Result<(TextEncoder, TextTrainReport)> {
    let encoder = TextEncoder::new(config.clone(), seed_value)?;
    if let Some(path) = &config.embedding_file {
        log::warn!(
            "embedding file {} ignored without a vocabulary; use train_text_encoder_from",
            path.display()
        );
    }
    train_text_encoder_from(encoder, train, val, classes, train_cfg, seed_value)
}

/// As [`train_text_encoder`], starting from a prepared encoder (for
/// example one with pretrained embedding rows).
pub fn train_text_encoder_from(
    mut encoder: TextEncoder,
    train: &[&UtteranceRecord],
    val: &[&UtteranceRecord],
    classes: usize,
    train_cfg: &TrainConfig,
    seed_value: u64,
) -> Result<(TextEncoder, TextTrainReport)> {
    if train.is_empty() {
        return Err(Error::EmptyInput("train_text_encoder"));
    }
    let first = train[0].label;
    if train.iter().all(|u| u.label == first) {
        return Err(Error::ClassDegenerate);
    }
    let config = encoder.config.clone();
    let mut rng = seed::rng(seed_value, 0x6865_6164);
    let mut head = ParamSet::new();
    head.insert_uniform(
        "head.w",
        &[config.dense_dim, classes],
        glorot(config.dense_dim, classes),
        &mut rng,
    );
    head.insert("head.b", Tensor::zeros(&[classes]));

    let n_enc = encoder.params.len();
    let mut joint = encoder.params.clone();
    for (name, t) in head.names().iter().zip(head.tensors()) {
        joint.insert(name.clone(), t.clone());
    }
    let mut adam = Adam::new(&joint, train_cfg.adam);

    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut stopper = EarlyStopping::new(train_cfg.patience);
    let mut epochs_run = 0;
    let mut final_loss = f64::NAN;
    let batch = train_cfg.batch_size.max(1);

    for epoch in 0..train_cfg.epochs {
        epochs_run = epoch + 1;
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(batch) {
            let mut g = Graph::new();
            let bound = joint.bind(&mut g);
            let mut losses = Vec::with_capacity(chunk.len());
            for &i in chunk {
                let u = train[i];
                let rep = encoder.forward(&mut g, &bound, &u.tokens)?;
                let logits = head_logits(&mut g, &bound, rep)?;
                losses.push(g.softmax_cross_entropy(logits, u.label)?);
            }
            let loss = g.mean(&losses)?;
            let lv = g.value(loss).item();
            if !lv.is_finite() {
                return Err(Error::NonFinite(format!("text encoder loss at epoch {epoch}")));
            }
            epoch_loss += lv * chunk.len() as f64;
            g.backward(loss)?;
            let grads = joint.gradients(&bound, &g);
            adam.step(&mut joint, &grads);
        }
        final_loss = epoch_loss / train.len() as f64;
        split_joint(&joint, n_enc, &mut encoder.params, &mut head);

        if val.is_empty() {
            continue;
        }
        let (acc, val_loss) = evaluate(&encoder, &head, val)?;
        log::debug!("text cnn epoch {epoch}: loss {final_loss:.4} val {acc:.4}");
        if stopper.observe(epoch, acc, val_loss, || joint.clone()) {
            break;
        }
    }

    let mut best_epoch = epochs_run.saturating_sub(1);
    let mut val_accuracy = None;
    if let Some(best) = stopper.into_best() {
        split_joint(&best.state, n_enc, &mut encoder.params, &mut head);
        best_epoch = best.epoch;
        val_accuracy = Some(best.accuracy);
    }
    let (train_accuracy, _) = evaluate(&encoder, &head, train)?;
    Ok((
        encoder,
        TextTrainReport {
            epochs_run,
            best_epoch,
            train_accuracy,
            val_accuracy,
            final_loss,
        },
    ))
}

fn split_joint(joint: &ParamSet, n_enc: usize, enc: &mut ParamSet, head: &mut ParamSet) {
    for (i, (name, t)) in joint.names().iter().zip(joint.tensors()).enumerate() {
        if i < n_enc {
            enc.insert(name.clone(), t.clone());
        } else {
            head.insert(name.clone(), t.clone());
        }
    }
}
