//! Utterance corpora: data model, label derivation, manifest I/O and
//! synthetic generation.
//!
//! A [`Corpus`] is immutable once built. Every constructor validates the
//! record invariants (contiguous positions, constant feature widths, labels
//! inside the scheme), so downstream code can index without re-checking.

mod labels;
mod manifest;
mod synth;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use labels::{derive_iemocap_label, derive_mosi_label, drop_neutral};
pub use manifest::{load_corpus, load_corpus_with, write_corpus, LoadOptions, AUDIO_CSV, VISUAL_CSV};
pub use synth::{generate_synthetic, SynthSpec};

/// Reserved token id for out-of-vocabulary tokens.
pub const UNK_ID: u32 = 0;
/// Reserved token id used to right-pad short utterances.
pub const PAD_ID: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceRecord {
    pub utterance_id: String,
    pub video_id: String,
    pub speaker_id: String,
    /// 0-based index within the video.
    pub position: usize,
    pub tokens: Vec<u32>,
    pub audio: Vec<f64>,
    pub visual: Vec<f64>,
    pub label: usize,
    pub raw_scores: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VideoSequence {
    pub video_id: String,
    pub speaker_id: String,
    pub utterances: Vec<UtteranceRecord>,
}

impl VideoSequence {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Renumbers positions to 0..n-1 in current order.
    pub fn recompact(&mut self) {
        for (i, u) in self.utterances.iter_mut().enumerate() {
            u.position = i;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeKind {
    /// negative = 0, positive = 1
    BinarySentiment,
    /// angry = 0, happy = 1, sad = 2, neutral = 3
    Emotion4,
    /// Ingestion-only form before neutral removal:
    /// negative = 0, positive = 1, neutral = 2
    SentimentWithNeutral,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabelScheme {
    pub kind: SchemeKind,
}

impl LabelScheme {
    pub const BINARY: LabelScheme = LabelScheme {
        kind: SchemeKind::BinarySentiment,
    };
    pub const EMOTION4: LabelScheme = LabelScheme {
        kind: SchemeKind::Emotion4,
    };
    pub const SENTIMENT3: LabelScheme = LabelScheme {
        kind: SchemeKind::SentimentWithNeutral,
    };

    pub fn class_names(&self) -> &'static [&'static str] {
        match self.kind {
            SchemeKind::BinarySentiment => &["negative", "positive"],
            SchemeKind::Emotion4 => &["angry", "happy", "sad", "neutral"],
            SchemeKind::SentimentWithNeutral => &["negative", "positive", "neutral"],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_names().len()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        let name = name.trim().to_ascii_lowercase();
        self.class_names().iter().position(|c| *c == name)
    }

    pub fn class_name(&self, id: usize) -> Option<&'static str> {
        self.class_names().get(id).copied()
    }

    /// Scheme with the given class count, for synthetic corpora.
    pub fn for_classes(classes: usize) -> Result<Self> {
        match classes {
            2 => Ok(Self::BINARY),
            4 => Ok(Self::EMOTION4),
            n => Err(Error::InvalidArgument(format!(
                "no label scheme has {n} classes (expected 2 or 4)"
            ))),
        }
    }
}

/// Corpus-local token vocabulary. Ids 0 and 1 are reserved for UNK and PAD.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Default for Vocab {
    fn default() -> Self {
        let mut v = Vocab {
            tokens: Vec::new(),
            index: HashMap::new(),
        };
        v.intern("<unk>");
        v.intern("<pad>");
        v
    }
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    /// Id of `token`, or [`UNK_ID`] when absent.
    pub fn lookup(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() <= 2
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub audio: usize,
    pub visual: usize,
    pub vocab: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    name: String,
    scheme: LabelScheme,
    videos: Vec<VideoSequence>,
    language_tag: String,
    dims: Dims,
    vocab: Vocab,
}

impl Corpus {
    /// Builds a corpus and checks every record invariant.
    pub fn new(
        name: impl Into<String>,
        scheme: LabelScheme,
        videos: Vec<VideoSequence>,
        language_tag: impl Into<String>,
        vocab: Vocab,
    ) -> Result<Self> {
        let name = name.into();
        let first = videos
            .iter()
            .flat_map(|v| v.utterances.first())
            .next()
            .ok_or_else(|| Error::InvalidCorpus(format!("corpus '{name}' has no utterances")))?;
        let dims = Dims {
            audio: first.audio.len(),
            visual: first.visual.len(),
            vocab: vocab.len(),
        };
        let classes = scheme.num_classes();
        let mut seen_ids = HashSet::new();
        let mut seen_videos = HashSet::new();
        for video in &videos {
            if video.utterances.is_empty() {
                return Err(Error::InvalidCorpus(format!(
                    "video '{}' has no utterances",
                    video.video_id
                )));
            }
            if !seen_videos.insert(video.video_id.as_str()) {
                return Err(Error::InvalidCorpus(format!(
                    "video '{}' appears twice",
                    video.video_id
                )));
            }
            for (i, u) in video.utterances.iter().enumerate() {
                if u.position != i {
                    return Err(Error::InvalidCorpus(format!(
                        "utterance '{}' has position {} but is at index {i} of video '{}'",
                        u.utterance_id, u.position, video.video_id
                    )));
                }
                if u.video_id != video.video_id || u.speaker_id != video.speaker_id {
                    return Err(Error::InvalidCorpus(format!(
                        "utterance '{}' disagrees with its video on video/speaker id",
                        u.utterance_id
                    )));
                }
                if !seen_ids.insert(u.utterance_id.as_str()) {
                    return Err(Error::DuplicateUtterance(u.utterance_id.clone()));
                }
                if u.audio.len() != dims.audio {
                    return Err(Error::DimensionMismatch {
                        what: format!("audio features of '{}'", u.utterance_id),
                        expected: dims.audio,
                        found: u.audio.len(),
                    });
                }
                if u.visual.len() != dims.visual {
                    return Err(Error::DimensionMismatch {
                        what: format!("visual features of '{}'", u.utterance_id),
                        expected: dims.visual,
                        found: u.visual.len(),
                    });
                }
                if u.label >= classes {
                    return Err(Error::LabelOutOfRange {
                        label: u.label,
                        classes,
                    });
                }
                if let Some(bad) = u.tokens.iter().find(|&&t| t as usize >= dims.vocab) {
                    return Err(Error::InvalidCorpus(format!(
                        "utterance '{}' has token id {bad} outside a vocabulary of {}",
                        u.utterance_id, dims.vocab
                    )));
                }
            }
        }
        let corpus = Corpus {
            name,
            scheme,
            videos,
            language_tag: language_tag.into(),
            dims,
            vocab,
        };
        let counts = corpus.class_counts();
        for (c, n) in counts.iter().enumerate() {
            if *n == 0 {
                log::warn!(
                    "corpus '{}' has no utterance of class '{}'",
                    corpus.name,
                    scheme.class_name(c).unwrap_or("?")
                );
            }
        }
        Ok(corpus)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scheme(&self) -> LabelScheme {
        self.scheme
    }

    pub fn videos(&self) -> &[VideoSequence] {
        &self.videos
    }

    pub fn language_tag(&self) -> &str {
        &self.language_tag
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn num_videos(&self) -> usize {
        self.videos.len()
    }

    pub fn num_utterances(&self) -> usize {
        self.videos.iter().map(VideoSequence::len).sum()
    }

    pub fn utterances(&self) -> impl Iterator<Item = &UtteranceRecord> {
        self.videos.iter().flat_map(|v| v.utterances.iter())
    }

    /// Sorted speaker roster.
    pub fn speakers(&self) -> Vec<String> {
        self.videos
            .iter()
            .map(|v| v.speaker_id.clone())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.scheme.num_classes()];
        for u in self.utterances() {
            counts[u.label] += 1;
        }
        counts
    }

    pub fn token_strings(&self, record: &UtteranceRecord) -> Vec<String> {
        record
            .tokens
            .iter()
            .map(|&t| self.vocab.token(t).unwrap_or("<unk>").to_string())
            .collect()
    }

    /// Sub-corpus holding the named videos, in this corpus's order.
    pub fn select_videos(&self, name: &str, ids: &BTreeSet<String>) -> Result<Corpus> {
        let videos = self
            .videos
            .iter()
            .filter(|v| ids.contains(&v.video_id))
            .cloned()
            .collect();
        Corpus::new(
            name,
            self.scheme,
            videos,
            self.language_tag.clone(),
            self.vocab.clone(),
        )
    }

    /// Keeps utterances matching `keep`, recompacts positions and drops
    /// videos left empty.
    pub fn filter_utterances(
        &self,
        scheme: LabelScheme,
        keep: impl Fn(&UtteranceRecord) -> bool,
    ) -> Result<Corpus> {
        let videos = self
            .videos
            .iter()
            .filter_map(|v| {
                let mut v2 = VideoSequence {
                    video_id: v.video_id.clone(),
                    speaker_id: v.speaker_id.clone(),
                    utterances: v.utterances.iter().filter(|u| keep(u)).cloned().collect(),
                };
                v2.recompact();
                (!v2.is_empty()).then_some(v2)
            })
            .collect();
        Corpus::new(
            self.name.clone(),
            scheme,
            videos,
            self.language_tag.clone(),
            self.vocab.clone(),
        )
    }

    /// Re-expresses token ids in `target`'s vocabulary; unknown tokens map to UNK.
    pub fn remap_tokens(&self, target: &Vocab) -> Corpus {
        let table: Vec<u32> = self.vocab.tokens().iter().map(|t| target.lookup(t)).collect();
        let mut out = self.clone();
        for v in &mut out.videos {
            for u in &mut v.utterances {
                for t in &mut u.tokens {
                    *t = table[*t as usize];
                }
            }
        }
        out.vocab = target.clone();
        out.dims.vocab = target.len();
        out
    }

    /// Utterances grouped by speaker, for protocol code.
    pub fn videos_by_speaker(&self) -> BTreeMap<String, Vec<&VideoSequence>> {
        let mut map: BTreeMap<String, Vec<&VideoSequence>> = BTreeMap::new();
        for v in &self.videos {
            map.entry(v.speaker_id.clone()).or_default().push(v);
        }
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn utt(video: &str, pos: usize, audio: usize) -> UtteranceRecord {
        UtteranceRecord {
            utterance_id: format!("{video}_{pos}"),
            video_id: video.into(),
            speaker_id: "s".into(),
            position: pos,
            tokens: vec![2],
            audio: vec![0.0; audio],
            visual: vec![0.0; 2],
            label: pos % 2,
            raw_scores: None,
        }
    }

    fn vocab() -> Vocab {
        let mut v = Vocab::new();
        v.intern("hello");
        v
    }

    #[test]
    fn rejects_gapped_positions() {
        let mut u = utt("v", 0, 3);
        u.position = 1;
        let video = VideoSequence {
            video_id: "v".into(),
            speaker_id: "s".into(),
            utterances: vec![u],
        };
        let err = Corpus::new("c", LabelScheme::BINARY, vec![video], "en", vocab()).unwrap_err();
        assert!(matches!(err, Error::InvalidCorpus(_)));
    }

    #[test]
    fn rejects_audio_width_change() {
        let video = VideoSequence {
            video_id: "v".into(),
            speaker_id: "s".into(),
            utterances: vec![utt("v", 0, 3), utt("v", 1, 4)],
        };
        let err = Corpus::new("c", LabelScheme::BINARY, vec![video], "en", vocab()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn remap_sends_unknown_to_unk() {
        let video = VideoSequence {
            video_id: "v".into(),
            speaker_id: "s".into(),
            utterances: vec![utt("v", 0, 3)],
        };
        let c = Corpus::new("c", LabelScheme::BINARY, vec![video], "es", vocab()).unwrap();
        let mut other = Vocab::new();
        other.intern("world");
        let r = c.remap_tokens(&other);
        assert_eq!(r.videos()[0].utterances[0].tokens, vec![UNK_ID]);
        let mut same = Vocab::new();
        same.intern("x");
        same.intern("hello");
        assert_eq!(c.remap_tokens(&same).videos()[0].utterances[0].tokens, vec![3]);
    }

    #[test]
    fn scheme_lookup_is_case_insensitive() {
        assert_eq!(LabelScheme::EMOTION4.class_id("Neutral"), Some(3));
        assert_eq!(LabelScheme::BINARY.class_id("positive"), Some(1));
        assert_eq!(LabelScheme::BINARY.class_id("neutral"), None);
    }
}
