//! Seeded synthetic corpora with controllable modality informativeness,
//! context dependence, speaker bias and domain shift.
//!
//! Audio and visual rows are `w * prototype[group] + N(0, I) + offset[speaker]`.
//! Text is a bag of words: each token is a class cue word with probability
//! `0.5 * w_T`, a speaker idiolect word with probability `min(0.1 * b, 0.5)`,
//! and filler otherwise.
//!
//! A context-planted utterance carries no class signal in any modality; its
//! label is copied from the nearest unplanted utterance to its left (or to
//! its right when none exists), so it is recoverable only through context.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Corpus, LabelScheme, UtteranceRecord, VideoSequence, Vocab};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub name: String,
    pub classes: usize,
    pub videos: usize,
    pub utterances_per_video: usize,
    /// Explicit per-video utterance counts; overrides `videos` and
    /// `utterances_per_video`.
    pub video_lengths: Option<Vec<usize>>,
    /// Speaker count; videos are dealt to speakers round-robin.
    /// Zero means one speaker per video.
    pub speakers: usize,
    pub audio_dim: usize,
    pub visual_dim: usize,
    pub filler_words: usize,
    pub cue_words_per_class: usize,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub text_weight: f64,
    pub audio_weight: f64,
    pub visual_weight: f64,
    pub context_probability: f64,
    pub speaker_bias: f64,
    /// Each modality separates only a two-way grouping of the classes:
    /// text the low bit of the class id, audio the high bit, visual their xor.
    pub complementary: bool,
    /// Rotation (radians) applied to every prototype in coordinate pairs
    /// (0,1), (2,3), ...
    pub domain_shift: f64,
    /// Seed for prototypes; defaults to the sampling seed. Sharing it across
    /// corpora gives them the same class geometry.
    pub prototype_seed: Option<u64>,
    /// Prepended to every token string, e.g. to emulate another language.
    pub token_prefix: String,
    pub language_tag: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            name: "synth".into(),
            classes: 2,
            videos: 20,
            utterances_per_video: 5,
            video_lengths: None,
            speakers: 0,
            audio_dim: 16,
            visual_dim: 12,
            filler_words: 40,
            cue_words_per_class: 6,
            min_tokens: 4,
            max_tokens: 10,
            text_weight: 1.0,
            audio_weight: 1.0,
            visual_weight: 1.0,
            context_probability: 0.0,
            speaker_bias: 0.0,
            complementary: false,
            domain_shift: 0.0,
            prototype_seed: None,
            token_prefix: String::new(),
            language_tag: "en".into(),
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.classes < 2 {
            return bad(format!("need at least 2 classes, got {}", self.classes));
        }
        for (name, p) in [
            ("text_weight", self.text_weight),
            ("audio_weight", self.audio_weight),
            ("visual_weight", self.visual_weight),
            ("context_probability", self.context_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is outside [0, 1]"));
            }
        }
        if !(self.speaker_bias >= 0.0 && self.speaker_bias.is_finite()) {
            return bad(format!("speaker_bias = {} must be >= 0", self.speaker_bias));
        }
        if self.min_tokens == 0 || self.min_tokens > self.max_tokens {
            return bad("token length range must satisfy 1 <= min <= max".into());
        }
        if self.audio_dim == 0 || self.visual_dim == 0 {
            return bad("feature dimensions must be positive".into());
        }
        if self.filler_words == 0 || self.cue_words_per_class == 0 {
            return bad("filler_words and cue_words_per_class must be positive".into());
        }
        if self.lengths().iter().any(|&n| n == 0) || self.lengths().is_empty() {
            return bad("every video needs at least one utterance".into());
        }
        Ok(())
    }

    fn lengths(&self) -> Vec<usize> {
        self.video_lengths
            .clone()
            .unwrap_or_else(|| vec![self.utterances_per_video; self.videos])
    }

    /// Prototype group of class `c` for modality index `m` (0 = T, 1 = A, 2 = V).
    fn group(&self, m: usize, c: usize) -> usize {
        if !self.complementary {
            return c;
        }
        let (lo, hi) = (c & 1, (c >> 1) & 1);
        match m {
            0 => lo,
            1 => hi,
            _ => lo ^ hi,
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn rotate(v: &mut [f64], angle: f64) {
    if angle == 0.0 {
        return;
    }
    let (s, c) = angle.sin_cos();
    for pair in v.chunks_exact_mut(2) {
        let (x, y) = (pair[0], pair[1]);
        pair[0] = c * x - s * y;
        pair[1] = s * x + c * y;
    }
}

fn scaled_direction(rng: &mut ChaCha8Rng, dim: usize, norm: f64) -> Vec<f64> {
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    let v = gaussian(rng, dim);
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-12);
    v.into_iter().map(|x| x * norm / len).collect()
}

/// Labels for one video given base labels and plant flags.
fn plant_labels(base: &[usize], planted: &[bool]) -> Vec<usize> {
    let mut labels = base.to_vec();
    let first_anchor = planted.iter().position(|p| !p).expect("one anchor per video");
    let mut last = base[first_anchor];
    for i in 0..labels.len() {
        if planted[i] {
            labels[i] = last;
        } else {
            last = base[i];
        }
    }
    labels
}

pub fn generate_synthetic(spec: &SynthSpec, seed_value: u64) -> Result<Corpus> {
    spec.validate()?;
    let scheme = LabelScheme::for_classes(spec.classes)?;
    let lengths = spec.lengths();
    let n_speakers = if spec.speakers == 0 {
        lengths.len()
    } else {
        spec.speakers
    };

    let mut proto_rng = seed::rng(spec.prototype_seed.unwrap_or(seed_value), 1);
    let groups = spec.classes;
    let mut audio_protos: Vec<Vec<f64>> =
        (0..groups).map(|_| gaussian(&mut proto_rng, spec.audio_dim)).collect();
    let mut visual_protos: Vec<Vec<f64>> =
        (0..groups).map(|_| gaussian(&mut proto_rng, spec.visual_dim)).collect();
    for p in audio_protos.iter_mut().chain(visual_protos.iter_mut()) {
        rotate(p, spec.domain_shift);
    }

    let word = |s: String| format!("{}{}", spec.token_prefix, s);
    let mut vocab = Vocab::new();
    let cue_ids: Vec<Vec<u32>> = (0..groups)
        .map(|g| {
            (0..spec.cue_words_per_class)
                .map(|j| vocab.intern(&word(format!("cue{g}_{j}"))))
                .collect()
        })
        .collect();
    let filler_ids: Vec<u32> = (0..spec.filler_words)
        .map(|j| vocab.intern(&word(format!("w{j}"))))
        .collect();
    const IDIOLECT: usize = 3;
    let speaker_ids: Vec<Vec<u32>> = (0..n_speakers)
        .map(|s| {
            (0..IDIOLECT)
                .map(|j| vocab.intern(&word(format!("spk{s}_{j}"))))
                .collect()
        })
        .collect();

    let mut rng = seed::rng(seed_value, 2);
    let offsets: Vec<(Vec<f64>, Vec<f64>)> = (0..n_speakers)
        .map(|_| {
            (
                scaled_direction(&mut rng, spec.audio_dim, spec.speaker_bias),
                scaled_direction(&mut rng, spec.visual_dim, spec.speaker_bias),
            )
        })
        .collect();
    let idiolect_p = (0.1 * spec.speaker_bias).min(0.5);
    let cue_p = 0.5 * spec.text_weight;

    let mut videos = Vec::with_capacity(lengths.len());
    for (v, &len) in lengths.iter().enumerate() {
        let speaker = v % n_speakers;
        let video_id = format!("{}_v{v:03}", spec.name);
        let speaker_id = format!("{}_s{speaker:03}", spec.name);
        let base: Vec<usize> = (0..len).map(|_| rng.random_range(0..spec.classes)).collect();
        let mut planted: Vec<bool> = (0..len)
            .map(|_| rng.random_bool(spec.context_probability))
            .collect();
        if planted.iter().all(|&p| p) {
            let keep = rng.random_range(0..len);
            planted[keep] = false;
        }
        let labels = plant_labels(&base, &planted);

        let mut utterances = Vec::with_capacity(len);
        for pos in 0..len {
            let class = labels[pos];
            let signal = !planted[pos];
            let n_tokens = rng.random_range(spec.min_tokens..=spec.max_tokens);
            let tokens = (0..n_tokens)
                .map(|_| {
                    let r: f64 = rng.random();
                    if signal && r < cue_p {
                        let cues = &cue_ids[spec.group(0, class)];
                        cues[rng.random_range(0..cues.len())]
                    } else if r < cue_p + idiolect_p {
                        speaker_ids[speaker][rng.random_range(0..IDIOLECT)]
                    } else {
                        filler_ids[rng.random_range(0..filler_ids.len())]
                    }
                })
                .collect();
            let mut feature = |protos: &[Vec<f64>], m: usize, w: f64, offset: &[f64]| {
                let proto = &protos[spec.group(m, class)];
                gaussian(&mut rng, proto.len())
                    .into_iter()
                    .zip(proto)
                    .zip(offset)
                    .map(|((noise, p), o)| noise + o + if signal { w * p } else { 0.0 })
                    .collect::<Vec<f64>>()
            };
            let audio = feature(&audio_protos, 1, spec.audio_weight, &offsets[speaker].0);
            let visual = feature(&visual_protos, 2, spec.visual_weight, &offsets[speaker].1);
            utterances.push(UtteranceRecord {
                utterance_id: format!("{video_id}_u{pos:02}"),
                video_id: video_id.clone(),
                speaker_id: speaker_id.clone(),
                position: pos,
                tokens,
                audio,
                visual,
                label: class,
                raw_scores: None,
            });
        }
        videos.push(VideoSequence {
            video_id,
            speaker_id,
            utterances,
        });
    }
    Corpus::new(
        spec.name.clone(),
        scheme,
        videos,
        spec.language_tag.clone(),
        vocab,
    )
}
