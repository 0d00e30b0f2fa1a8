//! JSON-lines manifest plus companion feature CSVs.
//!
//! Layout of a corpus directory:
//!
//! ```text
//! manifest.jsonl   one utterance record per line
//! audio.csv        header `id,a0,a1,...`, one row per audio_ref
//! visual.csv       header `id,v0,v1,...`, one row per visual_ref
//! ```
//!
//! Each record carries exactly one label source: `label` (a class name),
//! `raw_scores` (per-annotator sentiment scores in [-3, 3]) or `annotations`
//! (per-annotator emotion tags). Records whose derived label is rejected are
//! dropped and the surviving positions are renumbered.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{
    derive_iemocap_label, derive_mosi_label, Corpus, LabelScheme, SchemeKind, UtteranceRecord,
    VideoSequence, Vocab,
};
use crate::error::{Error, Result};

pub const AUDIO_CSV: &str = "audio.csv";
pub const VISUAL_CSV: &str = "visual.csv";
const MANIFEST: &str = "manifest.jsonl";

#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Corpus name; defaults to the manifest's parent directory name.
    pub name: Option<String>,
    /// Metadata only; defaults to "und".
    pub language_tag: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRecord {
    utterance_id: String,
    video_id: String,
    speaker_id: String,
    position: usize,
    tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    raw_scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    annotations: Option<Vec<String>>,
    audio_ref: String,
    visual_ref: String,
}

fn read_features(path: &Path) -> Result<(usize, HashMap<String, Vec<f64>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let width = reader
        .headers()?
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::Malformed {
            location: path.display().to_string(),
            message: "empty header".into(),
        })?;
    let mut rows = HashMap::new();
    for (line, row) in reader.records().enumerate() {
        let row = row?;
        let location = || format!("{}:{}", path.display(), line + 2);
        let id = row.get(0).ok_or_else(|| Error::Malformed {
            location: location(),
            message: "missing id".into(),
        })?;
        if row.len() - 1 != width {
            return Err(Error::DimensionMismatch {
                what: format!("feature row '{id}' in {}", path.display()),
                expected: width,
                found: row.len() - 1,
            });
        }
        let values = row
            .iter()
            .skip(1)
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Malformed {
                    location: location(),
                    message: format!("'{s}' is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if rows.insert(id.to_string(), values).is_some() {
            return Err(Error::Malformed {
                location: location(),
                message: format!("duplicate feature row '{id}'"),
            });
        }
    }
    Ok((width, rows))
}

fn infer_scheme(records: &[ManifestRecord]) -> LabelScheme {
    let emotion = records.iter().any(|r| {
        r.annotations.is_some()
            || r.label.as_deref().is_some_and(|l| {
                matches!(l.trim().to_ascii_lowercase().as_str(), "angry" | "happy" | "sad")
            })
    });
    if emotion {
        return LabelScheme::EMOTION4;
    }
    let neutral = records.iter().any(|r| {
        r.label
            .as_deref()
            .is_some_and(|l| l.trim().eq_ignore_ascii_case("neutral"))
    });
    if neutral {
        LabelScheme::SENTIMENT3
    } else {
        LabelScheme::BINARY
    }
}

fn resolve_label(record: &ManifestRecord, scheme: LabelScheme) -> Result<Option<usize>> {
    if let Some(label) = &record.label {
        return scheme
            .class_id(label)
            .map(Some)
            .ok_or_else(|| Error::UnknownLabel(label.clone()));
    }
    if let Some(scores) = &record.raw_scores {
        if scheme.kind == SchemeKind::Emotion4 {
            return Err(Error::UnknownLabel(format!(
                "sentiment scores on '{}' in an emotion corpus",
                record.utterance_id
            )));
        }
        return derive_mosi_label(scores);
    }
    if let Some(annotations) = &record.annotations {
        return derive_iemocap_label(annotations);
    }
    Err(Error::Malformed {
        location: record.utterance_id.clone(),
        message: "record has no label, raw_scores or annotations".into(),
    })
}

pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus> {
    load_corpus_with(manifest_path, &LoadOptions::default())
}

pub fn load_corpus_with(manifest_path: impl AsRef<Path>, options: &LoadOptions) -> Result<Corpus> {
    let manifest_path = manifest_path.as_ref();
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let file = File::open(manifest_path).map_err(|e| Error::io(manifest_path, e))?;

    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(manifest_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| Error::Malformed {
                location: format!("{}:{}", manifest_path.display(), i + 1),
                message: e.to_string(),
            })?;
        records.push(record);
    }

    let (audio_dim, audio) = read_features(&dir.join(AUDIO_CSV))?;
    let (visual_dim, visual) = read_features(&dir.join(VISUAL_CSV))?;
    let scheme = infer_scheme(&records);

    let mut ids = HashSet::new();
    let mut vocab = Vocab::new();
    let mut order: Vec<String> = Vec::new();
    let mut videos: BTreeMap<String, Vec<(usize, UtteranceRecord)>> = BTreeMap::new();
    let mut dropped = 0usize;
    for r in &records {
        if !ids.insert(r.utterance_id.clone()) {
            return Err(Error::DuplicateUtterance(r.utterance_id.clone()));
        }
        let fetch = |table: &HashMap<String, Vec<f64>>, key: &str, what: &str| {
            table.get(key).cloned().ok_or_else(|| Error::Malformed {
                location: r.utterance_id.clone(),
                message: format!("{what} row '{key}' not found"),
            })
        };
        let a = fetch(&audio, &r.audio_ref, "audio")?;
        let v = fetch(&visual, &r.visual_ref, "visual")?;
        debug_assert_eq!((a.len(), v.len()), (audio_dim, visual_dim));
        let tokens = r.tokens.iter().map(|t| vocab.intern(t)).collect();
        let Some(label) = resolve_label(r, scheme)? else {
            dropped += 1;
            continue;
        };
        if !videos.contains_key(&r.video_id) {
            order.push(r.video_id.clone());
        }
        videos.entry(r.video_id.clone()).or_default().push((
            r.position,
            UtteranceRecord {
                utterance_id: r.utterance_id.clone(),
                video_id: r.video_id.clone(),
                speaker_id: r.speaker_id.clone(),
                position: r.position,
                tokens,
                audio: a,
                visual: v,
                label,
                raw_scores: r.raw_scores.clone(),
            },
        ));
    }
    if dropped > 0 {
        log::info!(
            "{}: {dropped} utterances rejected by label derivation",
            manifest_path.display()
        );
    }

    let mut sequences = Vec::with_capacity(order.len());
    for video_id in order {
        let mut items = videos.remove(&video_id).expect("video recorded in order");
        items.sort_by_key(|(p, _)| *p);
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::Malformed {
                location: w[1].1.utterance_id.clone(),
                message: format!("duplicate position {} in video '{video_id}'", w[1].0),
            });
        }
        let speaker_id = items[0].1.speaker_id.clone();
        let mut seq = VideoSequence {
            video_id,
            speaker_id,
            utterances: items.into_iter().map(|(_, u)| u).collect(),
        };
        seq.recompact();
        sequences.push(seq);
    }

    let name = options.name.clone().unwrap_or_else(|| {
        dir.file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".into())
    });
    let language = options.language_tag.clone().unwrap_or_else(|| "und".into());
    Corpus::new(name, scheme, sequences, language, vocab)
}

fn write_features<'a>(
    path: &Path,
    prefix: char,
    width: usize,
    rows: impl Iterator<Item = (&'a str, &'a [f64])>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let mut header = vec!["id".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}{i}")));
    w.write_record(&header)?;
    for (id, values) in rows {
        let mut row = vec![id.to_string()];
        row.extend(values.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Writes `corpus` into `dir` as `manifest.jsonl`, `audio.csv` and
/// `visual.csv`; returns the manifest path.
pub fn write_corpus(corpus: &Corpus, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = dir.join(MANIFEST);
    let file = File::create(&manifest).map_err(|e| Error::io(&manifest, e))?;
    let mut out = BufWriter::new(file);
    let scheme = corpus.scheme();
    for u in corpus.utterances() {
        let record = ManifestRecord {
            utterance_id: u.utterance_id.clone(),
            video_id: u.video_id.clone(),
            speaker_id: u.speaker_id.clone(),
            position: u.position,
            tokens: corpus.token_strings(u),
            label: scheme.class_name(u.label).map(str::to_string),
            raw_scores: u.raw_scores.clone(),
            annotations: None,
            audio_ref: u.utterance_id.clone(),
            visual_ref: u.utterance_id.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(&manifest, e))?;
    }
    out.flush().map_err(|e| Error::io(&manifest, e))?;
    let dims = corpus.dims();
    write_features(
        &dir.join(AUDIO_CSV),
        'a',
        dims.audio,
        corpus
            .utterances()
            .map(|u| (u.utterance_id.as_str(), u.audio.as_slice())),
    )?;
    write_features(
        &dir.join(VISUAL_CSV),
        'v',
        dims.visual,
        corpus
            .utterances()
            .map(|u| (u.utterance_id.as_str(), u.visual.as_slice())),
    )?;
    Ok(manifest)
}
