//! Label derivation: sentiment sign of the annotator mean, emotion majority
//! vote, and neutral removal for three-way sentiment corpora.

use mmsb::corpus::{derive_iemocap_label, derive_mosi_label, drop_neutral, Corpus, LabelScheme, UtteranceRecord, VideoSequence, Vocab};

fn main() -> mmsb::Result<()> {
    for scores in [vec![2.0, 1.0, 3.0], vec![-0.5, -1.0, 0.4], vec![1.0, -1.0]] {
        let label = derive_mosi_label(&scores)?.and_then(|l| LabelScheme::BINARY.class_name(l));
        println!("scores {scores:?} -> {}", label.unwrap_or("excluded"));
    }
    for tags in [
        vec!["angry", "angry", "sad"],
        vec!["hap", "happy", "neutral", "sad"],
        vec!["happy", "sad", "neutral"],
        vec!["frustrated", "frustrated", "sad"],
    ] {
        let label = derive_iemocap_label(&tags)?.and_then(|l| LabelScheme::EMOTION4.class_name(l));
        println!("tags {tags:?} -> {}", label.unwrap_or("excluded"));
    }

    // three-way corpus: one video, labels negative/positive/neutral
    let utterances = [0usize, 2, 1, 2]
        .iter()
        .enumerate()
        .map(|(i, &label)| UtteranceRecord {
            utterance_id: format!("v0_u{i}"),
            video_id: "v0".into(),
            speaker_id: "s0".into(),
            position: i,
            tokens: vec![],
            audio: vec![0.0; 2],
            visual: vec![0.0; 2],
            label,
            raw_scores: None,
        })
        .collect();
    let video = VideoSequence {
        video_id: "v0".into(),
        speaker_id: "s0".into(),
        utterances,
    };
    let corpus = Corpus::new("demo", LabelScheme::SENTIMENT3, vec![video], "en", Vocab::new())?;
    let binary = drop_neutral(&corpus)?;
    println!(
        "drop_neutral: {} -> {} utterances, classes {:?}",
        corpus.num_utterances(),
        binary.num_utterances(),
        binary.scheme().class_names()
    );
    Ok(())
}
