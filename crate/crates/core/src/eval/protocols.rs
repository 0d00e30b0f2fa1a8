use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pipeline::{evaluate_partition, CheckpointSink, ModelConfig, ModelKind, PartitionReport};
use super::splits::{carve_validation, fold_partition, make_speaker_inclusive_split, FoldPlan, Partition};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::fusion::ModalitySet;
use crate::seed;

/// Random utterance-level split ignoring speakers.
pub fn run_speaker_inclusive(
    corpus: &Corpus,
    test_fraction: f64,
    split_seed: u64,
    cfg: &ModelConfig,
    model_seed: u64,
    sink: Option<&CheckpointSink>,
) -> Result<PartitionReport> {
    let part = make_speaker_inclusive_split(corpus, test_fraction, cfg.val_fraction, split_seed)?;
    evaluate_partition(&part, cfg, model_seed, sink)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub index: usize,
    pub test_speakers: Vec<String>,
    pub report: Option<PartitionReport>,
    /// Reason the fold was not evaluated.
    pub skipped: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellMean {
    pub modality: ModalitySet,
    pub model: ModelKind,
    /// Mean of the per-fold accuracies over evaluated folds.
    pub accuracy: f64,
    pub rmse: f64,
    pub folds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusiveReport {
    pub k: usize,
    pub folds: Vec<FoldOutcome>,
    pub mean: Vec<CellMean>,
    pub effective_folds: usize,
}

impl ExclusiveReport {
    pub fn mean_accuracy(&self, modality: ModalitySet, model: ModelKind) -> Option<f64> {
        self.mean
            .iter()
            .find(|c| c.modality == modality && c.model == model)
            .map(|c| c.accuracy)
    }
}

fn aggregate(folds: &[FoldOutcome], cfg: &ModelConfig) -> Vec<CellMean> {
    let mut out = Vec::new();
    for &m in &cfg.modalities {
        for &k in &cfg.models {
            let per_fold: Vec<(f64, f64)> = folds
                .iter()
                .filter_map(|f| f.report.as_ref()?.cell(m, k))
                .map(|c| (c.metrics.accuracy, c.metrics.rmse))
                .collect();
            if per_fold.is_empty() {
                continue;
            }
            let n = per_fold.len() as f64;
            out.push(CellMean {
                modality: m,
                model: k,
                accuracy: per_fold.iter().map(|p| p.0).sum::<f64>() / n,
                rmse: per_fold.iter().map(|p| p.1).sum::<f64>() / n,
                folds: per_fold.len(),
            });
        }
    }
    out
}

/// Trains a fresh pipeline per fold (folds run in parallel) and averages
/// per-fold accuracies. Folds whose training side has a single class are
/// skipped with a warning.
pub fn run_speaker_exclusive(
    corpus: &Corpus,
    plan: &FoldPlan,
    cfg: &ModelConfig,
    model_seed: u64,
    sink: Option<&CheckpointSink>,
) -> Result<ExclusiveReport> {
    plan.check(&corpus.speakers().into_iter().collect())?;
    let folds = (0..plan.folds.len())
        .into_par_iter()
        .map(|i| {
            let test_speakers = plan.folds[i].test_speakers.iter().cloned().collect();
            let fold_sink = sink.map(|s| CheckpointSink {
                dir: s.dir.clone(),
                prefix: format!("{}fold{i:02}_", s.prefix),
            });
            let outcome = fold_partition(corpus, plan, i, cfg.val_fraction).and_then(|part| {
                evaluate_partition(&part, cfg, seed::derive(model_seed, i as u64), fold_sink.as_ref())
            });
            match outcome {
                Ok(report) => Ok(FoldOutcome {
                    index: i,
                    test_speakers,
                    report: Some(report),
                    skipped: None,
                }),
                Err(Error::ClassDegenerate) => {
                    log::warn!("fold {i}: single-class training data, skipped");
                    Ok(FoldOutcome {
                        index: i,
                        test_speakers,
                        report: None,
                        skipped: Some("single-class training data".into()),
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let effective_folds = folds.iter().filter(|f| f.report.is_some()).count();
    Ok(ExclusiveReport {
        k: plan.k,
        mean: aggregate(&folds, cfg),
        folds,
        effective_folds,
    })
}

/// Trains on all of `train` (less a validation carve) and tests on `test`,
/// whose tokens are re-expressed in the training vocabulary.
pub fn run_cross_dataset(
    train: &Corpus,
    test: &Corpus,
    split_seed: u64,
    cfg: &ModelConfig,
    model_seed: u64,
    sink: Option<&CheckpointSink>,
) -> Result<PartitionReport> {
    if train.scheme() != test.scheme() {
        return Err(Error::SchemeIncompatible(format!(
            "'{}' is {:?} but '{}' is {:?}",
            train.name(),
            train.scheme().kind,
            test.name(),
            test.scheme().kind
        )));
    }
    let (a, b) = (train.dims(), test.dims());
    for (what, x, y) in [("audio", a.audio, b.audio), ("visual", a.visual, b.visual)] {
        if x != y {
            return Err(Error::DimensionMismatch {
                what: format!("{what} features of '{}'", test.name()),
                expected: x,
                found: y,
            });
        }
    }
    let (fit, val) = carve_validation(train, cfg.val_fraction, split_seed)?;
    let part = Partition {
        train: fit,
        val: Some(val),
        test: test.remap_tokens(train.vocab()),
    };
    evaluate_partition(&part, cfg, model_seed, sink)
}

/// The 7 × {SVM, bc-LSTM} speaker-exclusive accuracy grid; every cell is
/// evaluated on the same folds.
pub fn run_modality_grid(
    corpus: &Corpus,
    plan: &FoldPlan,
    cfg: &ModelConfig,
    model_seed: u64,
    sink: Option<&CheckpointSink>,
) -> Result<(super::ResultTable, ExclusiveReport)> {
    let cfg = ModelConfig {
        modalities: ModalitySet::ALL.to_vec(),
        models: vec![ModelKind::Svm, ModelKind::BcLstm],
        ..cfg.clone()
    };
    let report = run_speaker_exclusive(corpus, plan, &cfg, model_seed, sink)?;
    let mut table = super::ResultTable::new(vec!["SVM".into(), "bc-LSTM".into()]);
    for c in &report.mean {
        table.set(c.modality, c.model.label(), c.accuracy);
    }
    Ok((table, report))
}
