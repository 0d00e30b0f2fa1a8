//! Shared per-partition pipeline: train the text encoder on the training
//! side, encode and fuse every utterance, then train and score each
//! (modality set, model) cell.

use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{metrics, MetricsReport};
use super::splits::Partition;
use crate::corpus::Corpus;
use crate::encoders::{adapt_precomputed, train_text_encoder_from, TextEncoder, TextEncoderConfig, TextTrainReport, TrainConfig, UtteranceFeatures};
use crate::error::{Error, Result};
use crate::fusion::{bclstm_train, fuse, mlp_train, svm_train, BcLstmParams, LabeledSequence, MlpParams, ModalitySet, SvmParams};
use crate::seed;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Svm,
    BcLstm,
    /// Context-free dense network on single utterances.
    Mlp,
}

impl ModelKind {
    pub fn label(&self) -> &'static str {
        match self {
            ModelKind::Svm => "SVM",
            ModelKind::BcLstm => "bc-LSTM",
            ModelKind::Mlp => "MLP",
        }
    }

    fn stream(&self) -> u64 {
        match self {
            ModelKind::Svm => 1,
            ModelKind::BcLstm => 2,
            ModelKind::Mlp => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub modalities: Vec<ModalitySet>,
    pub models: Vec<ModelKind>,
    /// `vocab_size` is taken from the training corpus.
    pub text_encoder: TextEncoderConfig,
    pub text_train: TrainConfig,
    pub svm: SvmParams,
    pub bclstm: BcLstmParams,
    pub mlp: MlpParams,
    /// Share of training videos held out for early stopping.
    pub val_fraction: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            modalities: ModalitySet::ALL.to_vec(),
            models: vec![ModelKind::Svm, ModelKind::BcLstm],
            text_encoder: TextEncoderConfig::default(),
            text_train: TrainConfig::default(),
            svm: SvmParams::default(),
            bclstm: BcLstmParams::default(),
            mlp: MlpParams::default(),
            val_fraction: 0.2,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.modalities.is_empty() || self.models.is_empty() {
            return Err(Error::Config("at least one modality set and one model are required".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::Config(format!("val_fraction {} is outside (0, 1)", self.val_fraction)));
        }
        if !(self.svm.c > 0.0) || self.svm.gamma.is_some_and(|g| !(g > 0.0)) {
            return Err(Error::Config("svm C and gamma must be positive".into()));
        }
        if self.bclstm.hidden == 0 || self.mlp.hidden == 0 {
            return Err(Error::Config("hidden sizes must be positive".into()));
        }
        let mut enc = self.text_encoder.clone();
        enc.vocab_size = enc.vocab_size.max(2);
        enc.validate()
    }

    fn needs_text(&self) -> bool {
        self.modalities.iter().any(|m| m.text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub modality: ModalitySet,
    pub model: ModelKind,
    pub metrics: MetricsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    pub train_utterances: usize,
    pub val_utterances: usize,
    pub test_utterances: usize,
    pub text_encoder: Option<TextTrainReport>,
    pub cells: Vec<CellResult>,
}

impl PartitionReport {
    pub fn cell(&self, modality: ModalitySet, model: ModelKind) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.modality == modality && c.model == model)
    }

    pub fn accuracy(&self, modality: ModalitySet, model: ModelKind) -> Option<f64> {
        self.cell(modality, model).map(|c| c.metrics.accuracy)
    }
}

/// Where trained models are written; file names start with `prefix`.
#[derive(Clone, Debug)]
pub struct CheckpointSink {
    pub dir: PathBuf,
    pub prefix: String,
}

impl CheckpointSink {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{}{name}.json", self.prefix))
    }
}

fn modality_slug(m: ModalitySet) -> String {
    m.to_string().replace(" + ", "").to_lowercase()
}

struct VideoFeatures {
    features: Vec<UtteranceFeatures>,
    labels: Vec<usize>,
}

fn extract(corpus: &Corpus, encoder: Option<&TextEncoder>) -> Result<Vec<VideoFeatures>> {
    corpus
        .videos()
        .iter()
        .map(|v| {
            let features = v
                .utterances
                .iter()
                .map(|u| {
                    Ok(UtteranceFeatures {
                        text: encoder.map(|e| e.encode(&u.tokens)).transpose()?,
                        audio: Some(adapt_precomputed(&u.audio)?),
                        visual: Some(adapt_precomputed(&u.visual)?),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(VideoFeatures {
                features,
                labels: v.utterances.iter().map(|u| u.label).collect(),
            })
        })
        .collect()
}

fn sequences(videos: &[VideoFeatures], m: ModalitySet) -> Result<Vec<LabeledSequence>> {
    videos
        .iter()
        .map(|v| {
            Ok(LabeledSequence {
                inputs: v.features.iter().map(|f| fuse(f, m)).collect::<Result<_>>()?,
                labels: v.labels.clone(),
            })
        })
        .collect()
}

fn flatten(seqs: &[LabeledSequence]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let xs = seqs.iter().flat_map(|s| s.inputs.iter().cloned()).collect();
    let ys = seqs.iter().flat_map(|s| s.labels.iter().copied()).collect();
    (xs, ys)
}

/// Trains and scores every configured cell on one partition. Cells run in
/// parallel on the current rayon pool; results keep configuration order.
pub fn evaluate_partition(
    part: &Partition,
    cfg: &ModelConfig,
    seed_value: u64,
    sink: Option<&CheckpointSink>,
) -> Result<PartitionReport> {
    let scheme = part.train.scheme();
    if part.test.scheme() != scheme {
        return Err(Error::SchemeIncompatible(format!(
            "train scheme {:?} vs test scheme {:?}",
            scheme.kind,
            part.test.scheme().kind
        )));
    }
    let classes = scheme.num_classes();
    let train_utts: Vec<_> = part.train.utterances().collect();
    let val_utts: Vec<_> = part.val.iter().flat_map(|v| v.utterances()).collect();
    if train_utts.iter().all(|u| u.label == train_utts[0].label) {
        return Err(Error::ClassDegenerate);
    }

    let (encoder, text_report) = if cfg.needs_text() {
        let mut enc_cfg = cfg.text_encoder.clone();
        enc_cfg.vocab_size = part.train.vocab().len();
        let enc_seed = seed::derive(seed_value, 0);
        let mut initial = TextEncoder::new(enc_cfg.clone(), enc_seed)?;
        if let Some(path) = &enc_cfg.embedding_file {
            let rows = initial.load_pretrained(path, part.train.vocab())?;
            log::info!("loaded {rows} pretrained embedding rows from {}", path.display());
        }
        let (enc, report) =
            train_text_encoder_from(initial, &train_utts, &val_utts, classes, &cfg.text_train, enc_seed)?;
        if let Some(s) = sink {
            enc.save(s.path("text_cnn"))?;
        }
        (Some(enc), Some(report))
    } else {
        (None, None)
    };

    let train_f = extract(&part.train, encoder.as_ref())?;
    let val_f = match &part.val {
        Some(v) => extract(v, encoder.as_ref())?,
        None => Vec::new(),
    };
    let test_f = extract(&part.test, encoder.as_ref())?;

    let jobs: Vec<(ModalitySet, ModelKind)> = cfg
        .modalities
        .iter()
        .flat_map(|&m| cfg.models.iter().map(move |&k| (m, k)))
        .collect();
    let cells = jobs
        .par_iter()
        .map(|&(m, kind)| {
            let train = sequences(&train_f, m)?;
            let val = sequences(&val_f, m)?;
            let test = sequences(&test_f, m)?;
            let (test_x, test_y) = flatten(&test);
            let cell_seed = seed::derive(seed_value, kind.stream());
            let name = format!("{}_{}", modality_slug(m), kind.label().to_lowercase().replace('-', ""));
            let predictions = match kind {
                ModelKind::Svm => {
                    let mut all = train.clone();
                    all.extend(val.iter().cloned());
                    let (x, y) = flatten(&all);
                    let model = svm_train(&x, &y, classes, &cfg.svm, cell_seed)?;
                    if let Some(s) = sink {
                        model.save(s.path(&name))?;
                    }
                    model.predict_all(&test_x)?
                }
                ModelKind::BcLstm => {
                    let (model, _) = bclstm_train(&train, &val, classes, &cfg.bclstm, cell_seed)?;
                    if let Some(s) = sink {
                        model.save(s.path(&name))?;
                    }
                    let mut out = Vec::with_capacity(test_y.len());
                    for s in &test {
                        out.extend(model.predict(&s.inputs)?);
                    }
                    out
                }
                ModelKind::Mlp => {
                    let (x, y) = flatten(&train);
                    let (vx, vy) = flatten(&val);
                    let model = mlp_train(&x, &y, &vx, &vy, classes, &cfg.mlp, cell_seed)?;
                    model.predict_all(&test_x)?
                }
            };
            Ok(CellResult {
                modality: m,
                model: kind,
                metrics: metrics(&predictions, &test_y, scheme)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(PartitionReport {
        train_utterances: train_utts.len(),
        val_utterances: val_utts.len(),
        test_utterances: part.test.num_utterances(),
        text_encoder: text_report,
        cells,
    })
}
