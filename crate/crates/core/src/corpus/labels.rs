use crate::error::{Error, Result};

use super::{Corpus, LabelScheme, SchemeKind};

/// Sign of the mean annotator score: `Some(1)` positive, `Some(0)` negative,
/// `None` when the mean is exactly zero (the utterance is excluded).
///
/// Scores are summed in sorted order so the outcome does not depend on
/// annotator order.
pub fn derive_mosi_label(raw_scores: &[f64]) -> Result<Option<usize>> {
    if raw_scores.is_empty() {
        return Err(Error::InvalidArgument("empty score list".into()));
    }
    if let Some(bad) = raw_scores
        .iter()
        .find(|s| !s.is_finite() || !(-3.0..=3.0).contains(*s))
    {
        return Err(Error::InvalidArgument(format!(
            "score {bad} outside [-3, +3]"
        )));
    }
    let mut sorted = raw_scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = sorted.iter().sum::<f64>() / sorted.len() as f64;
    Ok(if mean > 0.0 {
        Some(1)
    } else if mean < 0.0 {
        Some(0)
    } else {
        None
    })
}

fn canonical_emotion(name: &str) -> String {
    let lower = name.trim().to_ascii_lowercase();
    match lower.as_str() {
        "ang" | "anger" => "angry".into(),
        "hap" | "happiness" => "happy".into(),
        "neu" => "neutral".into(),
        "sadness" => "sad".into(),
        _ => lower,
    }
}

/// Majority label over annotator emotion tags. A class must be the unique
/// most frequent tag with at least ceil(n/2) votes and belong to the four
/// retained emotions; anything else is rejected (`None`).
pub fn derive_iemocap_label<S: AsRef<str>>(annotations: &[S]) -> Result<Option<usize>> {
    let n = annotations.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!(
            "need at least 3 annotations, got {n}"
        )));
    }
    let mut counts: Vec<(String, usize)> = Vec::new();
    for a in annotations {
        let tag = canonical_emotion(a.as_ref());
        match counts.iter_mut().find(|(t, _)| *t == tag) {
            Some((_, c)) => *c += 1,
            None => counts.push((tag, 1)),
        }
    }
    let top = counts.iter().map(|(_, c)| *c).max().unwrap_or(0);
    let threshold = n.div_ceil(2);
    let leaders: Vec<&(String, usize)> = counts.iter().filter(|(_, c)| *c == top).collect();
    if top < threshold || leaders.len() != 1 {
        return Ok(None);
    }
    Ok(LabelScheme::EMOTION4.class_id(&leaders[0].0))
}

/// Removes neutral utterances from a three-way sentiment corpus and switches
/// it to the binary scheme. Other corpora are returned unchanged.
pub fn drop_neutral(corpus: &Corpus) -> Result<Corpus> {
    if corpus.scheme().kind != SchemeKind::SentimentWithNeutral {
        return Ok(corpus.clone());
    }
    let neutral = LabelScheme::SENTIMENT3
        .class_id("neutral")
        .expect("neutral is a sentiment class");
    corpus.filter_utterances(LabelScheme::BINARY, |u| u.label != neutral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{UtteranceRecord, VideoSequence, Vocab};
    use proptest::prelude::*;

    #[test]
    fn mosi_sign_rule() {
        assert_eq!(derive_mosi_label(&[2.0, 1.0, 3.0, 2.0, 2.0]).unwrap(), Some(1));
        assert_eq!(derive_mosi_label(&[-1.0, -1.0, -2.0, 0.0, -1.0]).unwrap(), Some(0));
        assert_eq!(derive_mosi_label(&[1.0, -1.0]).unwrap(), None);
    }

    #[test]
    fn mosi_errors() {
        assert!(derive_mosi_label(&[]).is_err());
        assert!(derive_mosi_label(&[3.5]).is_err());
        assert!(derive_mosi_label(&[f64::NAN]).is_err());
    }

    #[test]
    fn iemocap_majority() {
        assert_eq!(derive_iemocap_label(&["angry", "angry", "sad"]).unwrap(), Some(0));
        assert_eq!(derive_iemocap_label(&["happy", "sad", "neutral"]).unwrap(), None);
        assert_eq!(
            derive_iemocap_label(&["excited", "excited", "excited"]).unwrap(),
            None
        );
        assert!(derive_iemocap_label(&["sad", "sad"]).is_err());
    }

    #[test]
    fn iemocap_general_threshold() {
        // n = 4 needs 2 votes and a unique leader
        assert_eq!(
            derive_iemocap_label(&["sad", "sad", "happy", "angry"]).unwrap(),
            Some(2)
        );
        assert_eq!(
            derive_iemocap_label(&["sad", "sad", "happy", "happy"]).unwrap(),
            None
        );
        // n = 5 needs 3
        assert_eq!(
            derive_iemocap_label(&["neu", "neutral", "sad", "happy", "angry"]).unwrap(),
            None
        );
    }

    fn three_way(labels: &[&[usize]]) -> Corpus {
        let mut vocab = Vocab::new();
        let tok = vocab.intern("x");
        let videos = labels
            .iter()
            .enumerate()
            .map(|(v, ls)| VideoSequence {
                video_id: format!("v{v}"),
                speaker_id: format!("s{v}"),
                utterances: ls
                    .iter()
                    .enumerate()
                    .map(|(p, &l)| UtteranceRecord {
                        utterance_id: format!("v{v}_{p}"),
                        video_id: format!("v{v}"),
                        speaker_id: format!("s{v}"),
                        position: p,
                        tokens: vec![tok],
                        audio: vec![p as f64],
                        visual: vec![v as f64],
                        label: l,
                        raw_scores: None,
                    })
                    .collect(),
            })
            .collect();
        Corpus::new("moud", LabelScheme::SENTIMENT3, videos, "es", vocab).unwrap()
    }

    #[test]
    fn drop_neutral_removes_empty_videos_and_recompacts() {
        let c = three_way(&[&[0, 2, 1], &[2, 2]]);
        let d = drop_neutral(&c).unwrap();
        assert_eq!(d.scheme(), LabelScheme::BINARY);
        assert_eq!(d.num_videos(), 1);
        let v = &d.videos()[0];
        assert_eq!(v.utterances.len(), 2);
        assert_eq!(v.utterances[1].utterance_id, "v0_2");
        assert_eq!(v.utterances[1].position, 1);
        // idempotent on the result
        assert_eq!(drop_neutral(&d).unwrap(), d);
    }

    #[test]
    fn drop_neutral_identity_without_neutrals() {
        let c = three_way(&[&[0, 1], &[1]]);
        let d = drop_neutral(&c).unwrap();
        assert_eq!(d.num_utterances(), 3);
        assert_eq!(d.videos()[0].utterances, c.videos()[0].utterances);
    }

    proptest! {
        #[test]
        fn mosi_label_is_permutation_invariant(
            scores in proptest::collection::vec(-3.0f64..=3.0, 1..8),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            let mut shuffled = scores.clone();
            shuffled.shuffle(&mut crate::seed::rng(seed, 0));
            prop_assert_eq!(
                derive_mosi_label(&scores).unwrap(),
                derive_mosi_label(&shuffled).unwrap()
            );
        }
    }
}
