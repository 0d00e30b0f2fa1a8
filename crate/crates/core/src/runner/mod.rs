//! Config-driven experiment runner behind the `mmsb` binary.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "name": "quickstart",
//!   "data": { "synthetic": { "videos": 24, "speakers": 8 } },
//!   "models": { "models": ["svm", "bc_lstm"] },
//!   "protocol": { "kind": "speaker_exclusive", "k": 4 },
//!   "seeds": { "data_seed": 1, "model_seed": 2, "split_seed": 3 },
//!   "output_dir": "out/quickstart"
//! }
//! ```
//!
//! `data` (and `test_data` for cross-dataset runs) is either
//! `{"synthetic": SynthSpec}` or `{"manifest": {"path": ..., "drop_neutral": bool}}`;
//! manifest paths are relative to the config file.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{drop_neutral, generate_synthetic, load_corpus, Corpus, SynthSpec};
use crate::encoders::{adapt_precomputed, train_text_encoder_from, TextEncoder, UtteranceFeatures};
use crate::error::{Error, Result};
use crate::eval::{
    carve_validation, evaluate_partition, make_fixed_split, make_speaker_exclusive_folds, render_table,
    run_cross_dataset, run_speaker_exclusive, run_speaker_inclusive, CheckpointSink, ModelConfig,
    PartitionReport, ResultTable, TableStyle,
};
use crate::fusion::{fuse, ModalitySet};
use crate::projection::{tsne_2d, write_projection_csv, ProjectionConfig, ProjectionRow};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    Synthetic(SynthSpec),
    Manifest {
        path: PathBuf,
        #[serde(default)]
        drop_neutral: bool,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    Fixed {
        train_videos: Vec<String>,
        test_videos: Vec<String>,
    },
    SpeakerInclusive {
        #[serde(default = "default_test_fraction")]
        test_fraction: f64,
    },
    SpeakerExclusive {
        k: usize,
    },
    /// Train on `data`, test on `test_data`.
    CrossDataset,
}

fn default_test_fraction() -> f64 {
    0.3
}

impl ProtocolSpec {
    fn label(&self) -> &'static str {
        match self {
            ProtocolSpec::Fixed { .. } => "fixed",
            ProtocolSpec::SpeakerInclusive { .. } => "speaker_inclusive",
            ProtocolSpec::SpeakerExclusive { .. } => "speaker_exclusive",
            ProtocolSpec::CrossDataset => "cross_dataset",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Seeds {
    pub data_seed: u64,
    pub model_seed: u64,
    pub split_seed: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds {
            data_seed: 0,
            model_seed: 1,
            split_seed: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionSpec {
    /// `tsne.seed` is replaced by a value derived from `model_seed`.
    pub tsne: ProjectionConfig,
    pub modalities: Vec<ModalitySet>,
    /// Projects only the first `max_points` utterances in corpus order.
    pub max_points: Option<usize>,
}

impl Default for ProjectionSpec {
    fn default() -> Self {
        ProjectionSpec {
            tsne: ProjectionConfig::default(),
            modalities: vec![ModalitySet::T, ModalitySet::A, ModalitySet::V, ModalitySet::TAV],
            max_points: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSource,
    #[serde(default)]
    pub test_data: Option<DataSource>,
    #[serde(default)]
    pub models: ModelConfig,
    pub protocol: ProtocolSpec,
    #[serde(default)]
    pub seeds: Seeds,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub projection: Option<ProjectionSpec>,
}

fn default_name() -> String {
    "experiment".into()
}

impl ExperimentConfig {
    /// Parses and validates a config; relative manifest paths are resolved
    /// against the config's directory. Returns the raw text as well.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| match Error::io(path, e) {
            Error::MissingFile(p) => Error::Config(format!("config file {} not found", p.display())),
            other => other,
        })?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for src in std::iter::once(&mut cfg.data).chain(cfg.test_data.as_mut()) {
            if let DataSource::Manifest { path: p, .. } = src {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        Ok((cfg, text))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.models.validate()?;
        match &self.protocol {
            ProtocolSpec::SpeakerExclusive { k } if *k < 2 => {
                return Err(Error::Config(format!("speaker_exclusive k = {k} must be >= 2")))
            }
            ProtocolSpec::SpeakerInclusive { test_fraction } if !(*test_fraction > 0.0 && *test_fraction < 1.0) => {
                return Err(Error::Config(format!("test_fraction {test_fraction} is outside (0, 1)")))
            }
            ProtocolSpec::CrossDataset if self.test_data.is_none() => {
                return Err(Error::Config("cross_dataset needs test_data".into()))
            }
            _ => {}
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be positive".into()));
        }
        if let Some(p) = &self.projection {
            p.tsne.validate()?;
            if p.modalities.is_empty() {
                return Err(Error::Config("projection.modalities is empty".into()));
            }
        }
        Ok(())
    }
}

pub fn load_data(src: &DataSource, data_seed: u64) -> Result<Corpus> {
    match src {
        DataSource::Synthetic(spec) => generate_synthetic(spec, data_seed),
        DataSource::Manifest { path, drop_neutral: dn } => {
            let c = load_corpus(path)?;
            if *dn {
                drop_neutral(&c)
            } else {
                Ok(c)
            }
        }
    }
}

fn load_all(cfg: &ExperimentConfig) -> Result<(Corpus, Option<Corpus>)> {
    let train = load_data(&cfg.data, cfg.seeds.data_seed)?;
    let test = cfg
        .test_data
        .as_ref()
        .map(|s| load_data(s, seed::derive(cfg.seeds.data_seed, 1)))
        .transpose()?;
    Ok((train, test))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub overwrite: bool,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub table: ResultTable,
    /// Files written, relative to `out_dir`, sorted.
    pub files: Vec<String>,
}

fn prepare_out_dir(dir: &Path, overwrite: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?.next().is_some();
        if non_empty {
            if !overwrite {
                return Err(Error::OutputExists(dir.to_path_buf()));
            }
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            list_files(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(())
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(0) => Err(Error::Config("workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(f),
        None => f(),
    }
}

fn partition_table(report: &PartitionReport) -> ResultTable {
    let mut t = ResultTable::new(Vec::new());
    for c in &report.cells {
        t.set(c.modality, c.model.label(), c.metrics.accuracy);
    }
    t
}

fn resolve_out(cfg: &ExperimentConfig, opts: &RunOptions) -> PathBuf {
    opts.out
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name))
}

/// Runs the configured protocol and writes `results.{csv,txt,md}`,
/// `metrics.json`, `checkpoints/`, optional `projection.csv` and
/// `manifest.json` into the output directory.
pub fn run_experiment(config_path: impl AsRef<Path>, opts: &RunOptions) -> Result<RunSummary> {
    let (cfg, raw) = ExperimentConfig::load(config_path)?;
    let out_dir = resolve_out(&cfg, opts);
    let workers = opts.workers.or(cfg.workers);
    let (corpus, test_corpus) = load_all(&cfg)?;
    prepare_out_dir(&out_dir, opts.overwrite)?;
    let ckpt_dir = out_dir.join("checkpoints");
    fs::create_dir_all(&ckpt_dir).map_err(|e| Error::io(&ckpt_dir, e))?;
    let sink = CheckpointSink {
        dir: ckpt_dir,
        prefix: String::new(),
    };
    let Seeds {
        data_seed: _,
        model_seed,
        split_seed,
    } = cfg.seeds;

    let (table, report_json) = with_pool(workers, || {
        Ok(match &cfg.protocol {
            ProtocolSpec::Fixed {
                train_videos,
                test_videos,
            } => {
                let part = make_fixed_split(&corpus, train_videos, test_videos, cfg.models.val_fraction, split_seed)?;
                let r = evaluate_partition(&part, &cfg.models, model_seed, Some(&sink))?;
                (partition_table(&r), serde_json::to_value(&r)?)
            }
            ProtocolSpec::SpeakerInclusive { test_fraction } => {
                let r = run_speaker_inclusive(&corpus, *test_fraction, split_seed, &cfg.models, model_seed, Some(&sink))?;
                (partition_table(&r), serde_json::to_value(&r)?)
            }
            ProtocolSpec::SpeakerExclusive { k } => {
                let plan = make_speaker_exclusive_folds(&corpus, *k, split_seed)?;
                let r = run_speaker_exclusive(&corpus, &plan, &cfg.models, model_seed, Some(&sink))?;
                let mut t = ResultTable::new(Vec::new());
                for c in &r.mean {
                    t.set(c.modality, c.model.label(), c.accuracy);
                }
                (t, serde_json::to_value(&r)?)
            }
            ProtocolSpec::CrossDataset => {
                let test = test_corpus.as_ref().expect("validated");
                let r = run_cross_dataset(&corpus, test, split_seed, &cfg.models, model_seed, Some(&sink))?;
                (partition_table(&r), serde_json::to_value(&r)?)
            }
        })
    })?;
    if table.rows.is_empty() {
        return Err(Error::InvalidCorpus("no fold could be evaluated".into()));
    }

    write(&out_dir.join("results.csv"), &render_table(&table, TableStyle::Csv))?;
    write(&out_dir.join("results.txt"), &render_table(&table, TableStyle::Text))?;
    write(&out_dir.join("results.md"), &render_table(&table, TableStyle::Markdown))?;
    let metrics = serde_json::json!({
        "protocol": cfg.protocol.label(),
        "corpus": corpus.name(),
        "report": report_json,
    });
    write(&out_dir.join("metrics.json"), &serde_json::to_string_pretty(&metrics)?)?;
    if let Some(spec) = &cfg.projection {
        let rows = with_pool(workers, || project_corpus(&corpus, &cfg.models, spec, model_seed, split_seed))?;
        write_projection_csv(out_dir.join("projection.csv"), &rows)?;
    }
    let files = finish_manifest(&out_dir, &cfg, &raw)?;
    Ok(RunSummary {
        out_dir,
        table,
        files,
    })
}

fn finish_manifest(out_dir: &Path, cfg: &ExperimentConfig, raw: &str) -> Result<Vec<String>> {
    let mut files = Vec::new();
    list_files(out_dir, out_dir, &mut files)?;
    files.sort();
    let manifest = serde_json::json!({
        "name": cfg.name,
        "config_sha256": format!("{:x}", Sha256::digest(raw.as_bytes())),
        "seeds": cfg.seeds,
        "version": env!("CARGO_PKG_VERSION"),
        "files": files,
    });
    write(&out_dir.join("manifest.json"), &serde_json::to_string_pretty(&manifest)?)?;
    files.push("manifest.json".into());
    files.sort();
    Ok(files)
}

/// Parses the config, loads the data and checks protocol constraints
/// without training. Returns a one-line description.
pub fn validate_experiment(config_path: impl AsRef<Path>) -> Result<String> {
    let (cfg, _) = ExperimentConfig::load(config_path)?;
    let (corpus, test) = load_all(&cfg)?;
    match &cfg.protocol {
        ProtocolSpec::SpeakerExclusive { k } => {
            make_speaker_exclusive_folds(&corpus, *k, cfg.seeds.split_seed)?;
        }
        ProtocolSpec::Fixed {
            train_videos,
            test_videos,
        } => {
            make_fixed_split(&corpus, train_videos, test_videos, cfg.models.val_fraction, cfg.seeds.split_seed)?;
        }
        ProtocolSpec::CrossDataset => {
            let t = test.as_ref().expect("validated");
            if t.scheme() != corpus.scheme() {
                return Err(Error::SchemeIncompatible(format!(
                    "'{}' and '{}' use different label schemes",
                    corpus.name(),
                    t.name()
                )));
            }
        }
        ProtocolSpec::SpeakerInclusive { .. } => {
            if corpus.num_videos() < 2 {
                return Err(Error::Split("speaker-inclusive split needs at least 2 videos".into()));
            }
        }
    }
    Ok(format!(
        "config '{}' is valid: corpus '{}' with {} videos, {} utterances, {} speakers; protocol {}",
        cfg.name,
        corpus.name(),
        corpus.num_videos(),
        corpus.num_utterances(),
        corpus.speakers().len(),
        cfg.protocol.label()
    ))
}

/// t-SNE coordinates of every configured modality set. Text features come
/// from an encoder trained on the corpus (less a validation carve).
pub fn project_corpus(
    corpus: &Corpus,
    models: &ModelConfig,
    spec: &ProjectionSpec,
    model_seed: u64,
    split_seed: u64,
) -> Result<Vec<ProjectionRow>> {
    let limit = spec.max_points.unwrap_or(usize::MAX);
    let utts: Vec<_> = corpus.utterances().take(limit).collect();
    let encoder = if spec.modalities.iter().any(|m| m.text) {
        let (fit, val) = carve_validation(corpus, models.val_fraction, split_seed)?;
        let fit_u: Vec<_> = fit.utterances().collect();
        let val_u: Vec<_> = val.utterances().collect();
        let mut enc_cfg = models.text_encoder.clone();
        enc_cfg.vocab_size = corpus.vocab().len();
        let enc_seed = seed::derive(model_seed, 0);
        let mut initial = TextEncoder::new(enc_cfg.clone(), enc_seed)?;
        if let Some(path) = &enc_cfg.embedding_file {
            initial.load_pretrained(path, corpus.vocab())?;
        }
        let classes = corpus.scheme().num_classes();
        Some(train_text_encoder_from(initial, &fit_u, &val_u, classes, &models.text_train, enc_seed)?.0)
    } else {
        None
    };
    let features = utts
        .iter()
        .map(|u| {
            Ok(UtteranceFeatures {
                text: encoder.as_ref().map(|e| e.encode(&u.tokens)).transpose()?,
                audio: Some(adapt_precomputed(&u.audio)?),
                visual: Some(adapt_precomputed(&u.visual)?),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut tsne = spec.tsne.clone();
    tsne.seed = seed::derive(model_seed, 0x7473);
    let mut seen = BTreeSet::new();
    let mut rows = Vec::new();
    for &m in &spec.modalities {
        if !seen.insert(m) {
            continue;
        }
        let x = features.iter().map(|f| fuse(f, m)).collect::<Result<Vec<_>>>()?;
        let p = tsne_2d(&x, &tsne)?;
        for (u, pt) in utts.iter().zip(&p.points) {
            rows.push(ProjectionRow {
                utterance_id: u.utterance_id.clone(),
                x: pt[0],
                y: pt[1],
                label: corpus.scheme().class_name(u.label).unwrap_or("?").to_string(),
                modality_set: m.to_string(),
            });
        }
    }
    Ok(rows)
}

/// `project` command: t-SNE export only, into `projection.csv`.
pub fn run_projection(config_path: impl AsRef<Path>, opts: &RunOptions) -> Result<PathBuf> {
    let (cfg, raw) = ExperimentConfig::load(config_path)?;
    let spec = cfg.projection.clone().unwrap_or_default();
    let out_dir = resolve_out(&cfg, opts);
    let corpus = load_data(&cfg.data, cfg.seeds.data_seed)?;
    prepare_out_dir(&out_dir, opts.overwrite)?;
    let rows = with_pool(opts.workers.or(cfg.workers), || {
        project_corpus(&corpus, &cfg.models, &spec, cfg.seeds.model_seed, cfg.seeds.split_seed)
    })?;
    let path = out_dir.join("projection.csv");
    write_projection_csv(&path, &rows)?;
    finish_manifest(&out_dir, &cfg, &raw)?;
    Ok(path)
}
