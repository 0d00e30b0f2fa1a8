//! Speaker overlap inflates accuracy: with strong per-speaker feature
//! offsets, a random utterance split scores higher than folds that keep
//! every test speaker unseen.

use mmsb::corpus::{generate_synthetic, SynthSpec};
use mmsb::encoders::{TextEncoderConfig, TrainConfig};
use mmsb::eval::{make_speaker_exclusive_folds, run_speaker_exclusive, run_speaker_inclusive, ModelConfig, ModelKind};
use mmsb::fusion::ModalitySet;

fn main() -> mmsb::Result<()> {
    let spec = SynthSpec {
        videos: 40,
        speakers: 10,
        utterances_per_video: 6,
        speaker_bias: 5.0,
        text_weight: 0.5,
        audio_weight: 0.5,
        visual_weight: 0.5,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, 2)?;
    let cfg = ModelConfig {
        modalities: vec![ModalitySet::TAV],
        models: vec![ModelKind::Svm],
        text_encoder: TextEncoderConfig {
            embed_dim: 16,
            maps_per_width: 8,
            dense_dim: 16,
            ..Default::default()
        },
        text_train: TrainConfig {
            epochs: 10,
            ..Default::default()
        },
        ..Default::default()
    };

    let inclusive = run_speaker_inclusive(&corpus, 0.3, 2, &cfg, 2, None)?;
    let plan = make_speaker_exclusive_folds(&corpus, 5, 2)?;
    plan.check(&corpus.speakers().into_iter().collect())?;
    let exclusive = run_speaker_exclusive(&corpus, &plan, &cfg, 2, None)?;
    for f in &exclusive.folds {
        let acc = f.report.as_ref().and_then(|r| r.accuracy(ModalitySet::TAV, ModelKind::Svm));
        println!("fold {} test speakers {:?}: {:?}", f.index, f.test_speakers, acc);
    }
    let sp_in = inclusive.accuracy(ModalitySet::TAV, ModelKind::Svm).unwrap_or(f64::NAN);
    let sp_ex = exclusive.mean_accuracy(ModalitySet::TAV, ModelKind::Svm).unwrap_or(f64::NAN);
    println!("speaker-inclusive {:.1}%  speaker-exclusive {:.1}%", 100.0 * sp_in, 100.0 * sp_ex);
    Ok(())
}
