//! Per-utterance feature extraction: a trainable text CNN over token
//! embeddings and identity adapters for precomputed audio/visual rows.

mod text_cnn;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use text_cnn::{train_text_encoder, train_text_encoder_from, TextEncoder, TextEncoderConfig, TextTrainReport};

/// Training-loop settings shared by the neural models.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub adam: crate::autodiff::AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 32,
            patience: 5,
            adam: Default::default(),
        }
    }
}

/// Best validation epoch seen so far.
pub(crate) struct Best<P> {
    pub accuracy: f64,
    pub epoch: usize,
    pub state: P,
}

/// Early stopping on validation accuracy. An epoch improves on the best
/// one when its accuracy is higher, or equal with a lower validation loss,
/// so flat accuracy during the first epochs does not end training.
pub(crate) struct EarlyStopping<P> {
    patience: usize,
    best: Option<(Best<P>, f64)>,
    since_best: usize,
}

impl<P> EarlyStopping<P> {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: None,
            since_best: 0,
        }
    }

    /// Records an epoch; returns `true` when training should stop.
    pub fn observe(&mut self, epoch: usize, accuracy: f64, loss: f64, state: impl FnOnce() -> P) -> bool {
        let better = match &self.best {
            None => true,
            Some((b, best_loss)) => accuracy > b.accuracy || (accuracy == b.accuracy && loss < *best_loss),
        };
        if better {
            self.best = Some((
                Best {
                    accuracy,
                    epoch,
                    state: state(),
                },
                loss,
            ));
            self.since_best = 0;
            false
        } else {
            self.since_best += 1;
            self.since_best >= self.patience
        }
    }

    pub fn into_best(self) -> Option<Best<P>> {
        self.best.map(|(b, _)| b)
    }
}

/// Encoded modalities of one utterance; absent modalities are `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct UtteranceFeatures {
    pub text: Option<Vec<f64>>,
    pub audio: Option<Vec<f64>>,
    pub visual: Option<Vec<f64>>,
}

/// Passes a precomputed feature row through unchanged. No scaling or
/// normalization is applied; non-finite rows are rejected.
pub fn adapt_precomputed(vec: &[f64]) -> Result<Vec<f64>> {
    if let Some(i) = vec.iter().position(|x| !x.is_finite()) {
        return Err(Error::RejectNonFinite(format!(
            "component {i} of a precomputed feature row"
        )));
    }
    Ok(vec.to_vec())
}
