//! Context matters: on a corpus where some utterances carry no signal of
//! their own and share the label of a neighbour, the bidirectional
//! contextual LSTM beats per-utterance classifiers on the same features.

use mmsb::corpus::{generate_synthetic, SynthSpec};
use mmsb::encoders::{TextEncoderConfig, TrainConfig};
use mmsb::eval::{evaluate_partition, make_fixed_split, ModelConfig, ModelKind};
use mmsb::fusion::ModalitySet;

fn main() -> mmsb::Result<()> {
    let spec = SynthSpec {
        videos: 150,
        utterances_per_video: 6,
        context_probability: 0.6,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, 1)?;
    let ids: Vec<String> = corpus.videos().iter().map(|v| v.video_id.clone()).collect();
    let cut = ids.len() * 7 / 10;
    let part = make_fixed_split(&corpus, &ids[..cut], &ids[cut..], 0.2, 1)?;

    let mut cfg = ModelConfig {
        modalities: vec![ModalitySet::TAV],
        models: vec![ModelKind::Svm, ModelKind::Mlp, ModelKind::BcLstm],
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
    cfg.bclstm.train.adam.lr = 0.01;
    cfg.bclstm.train.epochs = 60;
    cfg.bclstm.train.patience = 15;

    let report = evaluate_partition(&part, &cfg, 1, None)?;
    for model in &cfg.models {
        let acc = report.accuracy(ModalitySet::TAV, *model).unwrap_or(f64::NAN);
        println!("{:<8} T + A + V accuracy {:.1}%", model.label(), 100.0 * acc);
    }
    Ok(())
}
