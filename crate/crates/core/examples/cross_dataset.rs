//! Domain shift: train on one corpus, test on another with the same class
//! geometry rotated and a disjoint vocabulary.

use mmsb::corpus::{generate_synthetic, SynthSpec};
use mmsb::encoders::{TextEncoderConfig, TrainConfig};
use mmsb::eval::{run_cross_dataset, run_speaker_inclusive, ModelConfig, ModelKind};
use mmsb::fusion::ModalitySet;

fn main() -> mmsb::Result<()> {
    let source = SynthSpec {
        name: "source".into(),
        videos: 40,
        prototype_seed: Some(99),
        ..Default::default()
    };
    let target = SynthSpec {
        name: "target".into(),
        videos: 20,
        prototype_seed: Some(99),
        domain_shift: std::f64::consts::FRAC_PI_2,
        token_prefix: "es_".into(),
        language_tag: "es".into(),
        ..Default::default()
    };
    let a = generate_synthetic(&source, 4)?;
    let b = generate_synthetic(&target, 104)?;
    let cfg = ModelConfig {
        modalities: vec![ModalitySet::T, ModalitySet::AV, ModalitySet::TAV],
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
    let in_domain = run_speaker_inclusive(&a, 0.3, 4, &cfg, 4, None)?;
    let cross = run_cross_dataset(&a, &b, 4, &cfg, 4, None)?;
    for m in &cfg.modalities {
        println!(
            "{:<10} in-domain {:.1}%  cross-dataset {:.1}%",
            m.to_string(),
            100.0 * in_domain.accuracy(*m, ModelKind::Svm).unwrap_or(f64::NAN),
            100.0 * cross.accuracy(*m, ModelKind::Svm).unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
