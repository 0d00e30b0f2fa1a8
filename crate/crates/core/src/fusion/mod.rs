//! Feature-level fusion and the two baseline classifiers: an RBF-kernel
//! SVM trained by SMO and the bidirectional contextual LSTM (bc-LSTM).
//! A context-free MLP is included as a reference point for the bc-LSTM.

mod bclstm;
mod mlp;
mod svm;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::encoders::UtteranceFeatures;
use crate::error::{Error, Result};

pub use bclstm::{bclstm_train, BcLstmModel, BcLstmParams, LabeledSequence, SequenceTrainReport};
pub use mlp::{mlp_train, MlpModel, MlpParams};
pub use svm::{smo_solve, svm_train, BinarySvm, SmoSolution, SvmModel, SvmParams};

/// Non-empty subset of {T, A, V}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModalitySet {
    pub text: bool,
    pub audio: bool,
    pub visual: bool,
}

impl ModalitySet {
    pub const A: ModalitySet = ModalitySet::new(false, true, false);
    pub const V: ModalitySet = ModalitySet::new(false, false, true);
    pub const T: ModalitySet = ModalitySet::new(true, false, false);
    pub const TA: ModalitySet = ModalitySet::new(true, true, false);
    pub const TV: ModalitySet = ModalitySet::new(true, false, true);
    pub const AV: ModalitySet = ModalitySet::new(false, true, true);
    pub const TAV: ModalitySet = ModalitySet::new(true, true, true);

    /// The seven legal sets in report order.
    pub const ALL: [ModalitySet; 7] = [
        Self::A,
        Self::V,
        Self::T,
        Self::TA,
        Self::TV,
        Self::AV,
        Self::TAV,
    ];

    const fn new(text: bool, audio: bool, visual: bool) -> Self {
        ModalitySet {
            text,
            audio,
            visual,
        }
    }

    /// Position in report order.
    pub fn rank(&self) -> usize {
        Self::ALL.iter().position(|m| m == self).expect("non-empty set")
    }

    /// Total width of the fused vector for per-modality widths `(t, a, v)`.
    pub fn fused_dim(&self, text: usize, audio: usize, visual: usize) -> usize {
        self.text as usize * text + self.audio as usize * audio + self.visual as usize * visual
    }

    /// `(modality, offset, width)` blocks inside a fused vector.
    pub fn blocks(&self, text: usize, audio: usize, visual: usize) -> Vec<(char, usize, usize)> {
        let mut out = Vec::new();
        let mut offset = 0;
        for (on, tag, w) in [
            (self.text, 'T', text),
            (self.audio, 'A', audio),
            (self.visual, 'V', visual),
        ] {
            if on {
                out.push((tag, offset, w));
                offset += w;
            }
        }
        out
    }
}

impl fmt::Display for ModalitySet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        if self.text {
            parts.push("T");
        }
        if self.audio {
            parts.push("A");
        }
        if self.visual {
            parts.push("V");
        }
        write!(f, "{}", parts.join(" + "))
    }
}

impl FromStr for ModalitySet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut m = ModalitySet::new(false, false, false);
        for part in s.split(['+', ',']).map(str::trim).filter(|p| !p.is_empty()) {
            let slot = match part.to_ascii_uppercase().as_str() {
                "T" | "TEXT" => &mut m.text,
                "A" | "AUDIO" => &mut m.audio,
                "V" | "VIDEO" | "VISUAL" => &mut m.visual,
                other => {
                    return Err(Error::InvalidArgument(format!("unknown modality '{other}'")))
                }
            };
            *slot = true;
        }
        if !(m.text || m.audio || m.visual) {
            return Err(Error::InvalidArgument(format!("empty modality set '{s}'")));
        }
        Ok(m)
    }
}

impl Serialize for ModalitySet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ModalitySet {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Concatenates the selected modalities in T, A, V order. Values are
/// copied unchanged.
pub fn fuse(features: &UtteranceFeatures, mods: ModalitySet) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (on, tag, part) in [
        (mods.text, 'T', &features.text),
        (mods.audio, 'A', &features.audio),
        (mods.visual, 'V', &features.visual),
    ] {
        if on {
            out.extend_from_slice(part.as_ref().ok_or(Error::MissingModality(tag))?);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn feats(t: usize, a: usize, v: usize) -> UtteranceFeatures {
        UtteranceFeatures {
            text: (t > 0).then(|| (0..t).map(|i| i as f64).collect()),
            audio: (a > 0).then(|| (0..a).map(|i| 100.0 + i as f64).collect()),
            visual: (v > 0).then(|| (0..v).map(|i| -(i as f64)).collect()),
        }
    }

    #[test]
    fn fused_lengths() {
        let f = feats(100, 50, 30);
        assert_eq!(fuse(&f, ModalitySet::TAV).unwrap().len(), 180);
        assert_eq!(fuse(&f, ModalitySet::T).unwrap(), f.text.clone().unwrap());
        let g = feats(0, 50, 30);
        assert_eq!(fuse(&g, ModalitySet::AV).unwrap().len(), 80);
        assert!(matches!(
            fuse(&g, ModalitySet::TA),
            Err(Error::MissingModality('T'))
        ));
    }

    #[test]
    fn blocks_recover_each_modality() {
        let f = feats(7, 5, 3);
        for m in ModalitySet::ALL {
            let fused = fuse(&f, m).unwrap();
            assert_eq!(fused.len(), m.fused_dim(7, 5, 3));
            for (tag, off, w) in m.blocks(7, 5, 3) {
                let original = match tag {
                    'T' => f.text.as_ref(),
                    'A' => f.audio.as_ref(),
                    _ => f.visual.as_ref(),
                }
                .unwrap();
                assert_eq!(&fused[off..off + w], original.as_slice());
            }
        }
    }

    #[test]
    fn display_and_parse() {
        let names: Vec<String> = ModalitySet::ALL.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["A", "V", "T", "T + A", "T + V", "A + V", "T + A + V"]);
        for m in ModalitySet::ALL {
            assert_eq!(m.to_string().parse::<ModalitySet>().unwrap(), m);
        }
        assert_eq!("a+t".parse::<ModalitySet>().unwrap(), ModalitySet::TA);
        assert!("".parse::<ModalitySet>().is_err());
        assert!("X".parse::<ModalitySet>().is_err());
    }
}
