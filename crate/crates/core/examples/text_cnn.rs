//! Trains the convolutional text encoder on a text-only synthetic corpus and
//! uses it as a frozen feature extractor.

use mmsb::corpus::{generate_synthetic, SynthSpec};
use mmsb::encoders::{train_text_encoder, TextEncoderConfig, TrainConfig};
use mmsb::eval::carve_validation;

fn main() -> mmsb::Result<()> {
    let spec = SynthSpec {
        videos: 40,
        utterances_per_video: 6,
        audio_weight: 0.0,
        visual_weight: 0.0,
        ..Default::default()
    };
    let corpus = generate_synthetic(&spec, 3)?;
    let (train, val) = carve_validation(&corpus, 0.2, 3)?;
    let train_u: Vec<_> = train.utterances().collect();
    let val_u: Vec<_> = val.utterances().collect();

    let config = TextEncoderConfig {
        vocab_size: corpus.vocab().len(),
        embed_dim: 16,
        maps_per_width: 8,
        dense_dim: 16,
        ..Default::default()
    };
    let train_cfg = TrainConfig {
        epochs: 10,
        ..Default::default()
    };
    let (encoder, report) = train_text_encoder(&train_u, &val_u, 2, &config, &train_cfg, 3)?;
    println!("{report:?}");

    let first = corpus.utterances().next().expect("non-empty corpus");
    let feature = encoder.encode(&first.tokens)?;
    println!(
        "'{}' -> {}-dim feature, first values {:.3?}",
        corpus.token_strings(first).join(" "),
        encoder.output_dim(),
        &feature[..4]
    );
    Ok(())
}
