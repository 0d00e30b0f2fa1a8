mod common;
mod shared;

use std::collections::BTreeSet;

use common::metrics_oracle;
use mmsb::corpus::{generate_synthetic, Corpus, LabelScheme, SynthSpec};
use mmsb::eval::{
    carve_validation, evaluate_partition, fold_partition, make_fixed_split, make_speaker_exclusive_folds,
    make_speaker_inclusive_split, metrics, run_cross_dataset, run_modality_grid, run_speaker_exclusive,
    run_speaker_inclusive, ModelConfig, ModelKind, Partition,
};
use mmsb::fusion::ModalitySet;
use mmsb::Error;
use proptest::prelude::*;
use shared::{corpus_with_lengths, even_lengths, flip_speaker, fold_invariants, quick_models, split_fixture};

fn speakers_corpus(speakers: usize, videos: usize, seed_value: u64) -> Corpus {
    corpus_with_lengths("spk", vec![3; videos], speakers, seed_value)
}

fn roster(c: &Corpus) -> BTreeSet<String> {
    c.speakers().into_iter().collect()
}

fn svm_av() -> ModelConfig {
    ModelConfig {
        modalities: vec![ModalitySet::AV],
        models: vec![ModelKind::Svm],
        ..ModelConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn folds_are_disjoint_and_cover(seed_value in any::<u64>(), k_idx in 0usize..3, speakers in 10usize..30) {
        let k = [2, 5, 10][k_idx];
        let c = speakers_corpus(speakers, speakers, seed_value);
        let plan = make_speaker_exclusive_folds(&c, k, seed_value).unwrap();
        prop_assert_eq!(plan.folds.len(), k);
        prop_assert!(fold_invariants(&plan, &roster(&c)).is_ok());
    }

    #[test]
    fn metrics_match_the_oracle(
        scheme_idx in 0usize..3,
        pairs in prop::collection::vec((0usize..4, 0usize..4), 1..200),
    ) {
        let scheme = [LabelScheme::BINARY, LabelScheme::SENTIMENT3, LabelScheme::EMOTION4][scheme_idx];
        let classes = scheme.num_classes();
        let pred: Vec<usize> = pairs.iter().map(|p| p.0 % classes).collect();
        let labels: Vec<usize> = pairs.iter().map(|p| p.1 % classes).collect();
        let got = metrics(&pred, &labels, scheme).unwrap();
        let want = metrics_oracle(&pred, &labels, classes);
        prop_assert!((got.accuracy - want.accuracy).abs() < 1e-12);
        prop_assert!((got.rmse - want.rmse).abs() < 1e-12);
        for (a, b) in got.tp_rate.iter().zip(&want.tp_rate) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(got.n, labels.len());
        let total: usize = got.confusion.iter().flatten().sum();
        prop_assert_eq!(total, labels.len());
    }
}

#[test]
fn leave_one_speaker_out_gives_singletons() {
    let c = speakers_corpus(10, 10, 1);
    let plan = make_speaker_exclusive_folds(&c, 10, 3).unwrap();
    assert!(plan.folds.iter().all(|f| f.test_speakers.len() == 1));
    fold_invariants(&plan, &roster(&c)).unwrap();
}

#[test]
fn eighty_speakers_in_five_groups_of_sixteen() {
    let c = speakers_corpus(80, 80, 2);
    let plan = make_speaker_exclusive_folds(&c, 5, 4).unwrap();
    assert!(plan.folds.iter().all(|f| f.test_speakers.len() == 16));
}

#[test]
fn uneven_roster_is_balanced() {
    let c = speakers_corpus(7, 7, 3);
    let plan = make_speaker_exclusive_folds(&c, 5, 5).unwrap();
    let mut sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_speakers.len()).collect();
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
}

#[test]
fn too_many_folds_is_rejected() {
    let c = speakers_corpus(5, 10, 4);
    let err = make_speaker_exclusive_folds(&c, 10, 0).unwrap_err();
    assert!(matches!(err, Error::FoldConstraint(_)), "{err}");
    assert!(matches!(make_speaker_exclusive_folds(&c, 1, 0), Err(Error::FoldConstraint(_))));
}

#[test]
fn fixed_split_fixture_counts() {
    for (shape, seed_value) in [((4290, 120, 1208, 31), 1), ((1447, 62, 752, 31), 2), ((322, 59, 115, 20), 3)] {
        let (c, train, test) = split_fixture(shape, seed_value);
        let part = make_fixed_split(&c, &train, &test, 0.2, 9).unwrap();
        assert_eq!(part.train_total(), (shape.0, shape.1));
        assert_eq!((part.test.num_utterances(), part.test.num_videos()), (shape.2, shape.3));
    }
}

#[test]
fn validation_carve_of_ten_videos() {
    let c = corpus_with_lengths("ten", even_lengths(40, 10), 0, 5);
    let (train, val) = carve_validation(&c, 0.2, 1).unwrap();
    assert_eq!((train.num_videos(), val.num_videos()), (8, 2));
    let a: BTreeSet<_> = train.videos().iter().map(|v| &v.video_id).collect();
    assert!(val.videos().iter().all(|v| !a.contains(&v.video_id)));
}

#[test]
fn bad_fixed_split_lists() {
    let (c, train, test) = split_fixture((20, 4, 10, 2), 6);
    let mut overlap = test.clone();
    overlap.push(train[0].clone());
    assert!(matches!(make_fixed_split(&c, &train, &overlap, 0.2, 0), Err(Error::Split(_))));
    assert!(matches!(make_fixed_split(&c, &train[1..], &test, 0.2, 0), Err(Error::Split(_))));
    let mut unknown = test.clone();
    unknown.push("nope".into());
    assert!(matches!(make_fixed_split(&c, &train, &unknown, 0.2, 0), Err(Error::Split(_))));
}

#[test]
fn speaker_inclusive_split_is_seeded_and_complete() {
    let c = speakers_corpus(4, 20, 7);
    let a = make_speaker_inclusive_split(&c, 0.3, 0.2, 11).unwrap();
    let b = make_speaker_inclusive_split(&c, 0.3, 0.2, 11).unwrap();
    let ids = |p: &Partition| -> Vec<String> { p.test.utterances().map(|u| u.utterance_id.clone()).collect() };
    assert_eq!(ids(&a), ids(&b));
    assert_eq!(ids(&a).len(), 18);
    let (tu, _) = a.train_total();
    assert_eq!(tu + a.test.num_utterances(), c.num_utterances());
}

#[test]
fn single_video_cannot_be_split() {
    let c = corpus_with_lengths("one", vec![6], 0, 8);
    assert!(matches!(make_speaker_inclusive_split(&c, 0.3, 0.2, 0), Err(Error::Split(_))));
}

#[test]
fn no_test_utterance_leaks_into_training() {
    let c = speakers_corpus(6, 30, 9);
    let plan = make_speaker_exclusive_folds(&c, 3, 1).unwrap();
    for i in 0..3 {
        let part = fold_partition(&c, &plan, i, 0.2).unwrap();
        let test: BTreeSet<_> = part.test.utterances().map(|u| u.utterance_id.clone()).collect();
        let train_side = part.train.utterances().chain(part.val.iter().flat_map(|v| v.utterances()));
        for u in train_side {
            assert!(!test.contains(&u.utterance_id));
            assert!(!plan.folds[i].test_speakers.contains(&u.speaker_id));
        }
    }
}

#[test]
fn exclusive_mean_is_mean_of_folds() {
    let c = speakers_corpus(6, 36, 10);
    let plan = make_speaker_exclusive_folds(&c, 3, 2).unwrap();
    let report = run_speaker_exclusive(&c, &plan, &svm_av(), 5, None).unwrap();
    let accs: Vec<f64> = report
        .folds
        .iter()
        .filter_map(|f| f.report.as_ref())
        .map(|r| r.accuracy(ModalitySet::AV, ModelKind::Svm).unwrap())
        .collect();
    assert_eq!(accs.len(), report.effective_folds);
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    let got = report.mean_accuracy(ModalitySet::AV, ModelKind::Svm).unwrap();
    assert!((got - mean).abs() < 1e-12);
}

#[test]
fn serial_and_parallel_runs_agree() {
    let c = speakers_corpus(6, 30, 11);
    let plan = make_speaker_exclusive_folds(&c, 3, 3).unwrap();
    let cfg = ModelConfig {
        modalities: vec![ModalitySet::T, ModalitySet::TAV],
        ..quick_models()
    };
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| run_speaker_exclusive(&c, &plan, &cfg, 7, None).unwrap())
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn adversarial_speaker_is_the_worst_fold() {
    let spec = SynthSpec {
        videos: 40,
        utterances_per_video: 5,
        speakers: 5,
        audio_dim: 8,
        visual_dim: 6,
        ..Default::default()
    };
    let clean = generate_synthetic(&spec, 12).unwrap();
    let bad = clean.speakers()[2].clone();
    let c = flip_speaker(&clean, &bad);
    let plan = make_speaker_exclusive_folds(&c, 5, 0).unwrap();
    let report = run_speaker_exclusive(&c, &plan, &svm_av(), 3, None).unwrap();
    let (worst, _) = report
        .folds
        .iter()
        .map(|f| (f, f.report.as_ref().unwrap().accuracy(ModalitySet::AV, ModelKind::Svm).unwrap()))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    assert_eq!(worst.test_speakers, vec![bad]);
}

#[test]
fn cross_dataset_on_identical_corpora_is_in_domain_fit() {
    let c = speakers_corpus(4, 20, 13);
    let cfg = svm_av();
    let report = run_cross_dataset(&c, &c, 4, &cfg, 6, None).unwrap();
    let (fit, val) = carve_validation(&c, cfg.val_fraction, 4).unwrap();
    let direct = evaluate_partition(
        &Partition {
            train: fit,
            val: Some(val),
            test: c.clone(),
        },
        &cfg,
        6,
        None,
    )
    .unwrap();
    assert_eq!(report, direct);
    assert!(report.accuracy(ModalitySet::AV, ModelKind::Svm).unwrap() > 0.9);
}

#[test]
fn cross_dataset_scheme_mismatch() {
    let a = speakers_corpus(4, 12, 14);
    let b = generate_synthetic(
        &SynthSpec {
            classes: 4,
            audio_dim: 4,
            visual_dim: 3,
            ..Default::default()
        },
        15,
    )
    .unwrap();
    let err = run_cross_dataset(&a, &b, 0, &svm_av(), 0, None).unwrap_err();
    assert!(matches!(err, Error::SchemeIncompatible(_)), "{err}");
}

#[test]
fn speaker_inclusive_run_is_deterministic() {
    let c = speakers_corpus(4, 20, 16);
    let a = run_speaker_inclusive(&c, 0.3, 1, &svm_av(), 2, None).unwrap();
    let b = run_speaker_inclusive(&c, 0.3, 1, &svm_av(), 2, None).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.test_utterances, 18);
}

#[test]
fn grid_has_seven_rows_and_two_columns() {
    let c = generate_synthetic(
        &SynthSpec {
            videos: 16,
            utterances_per_video: 4,
            speakers: 4,
            audio_dim: 6,
            visual_dim: 4,
            ..Default::default()
        },
        17,
    )
    .unwrap();
    let plan = make_speaker_exclusive_folds(&c, 2, 0).unwrap();
    let (table, report) = run_modality_grid(&c, &plan, &quick_models(), 1, None).unwrap();
    assert_eq!(table.columns, vec!["SVM".to_string(), "bc-LSTM".to_string()]);
    assert_eq!(table.rows.len(), 7);
    let order: Vec<ModalitySet> = table.rows.iter().map(|r| r.0).collect();
    assert_eq!(order, ModalitySet::ALL.to_vec());
    assert!(table.rows.iter().all(|(_, cells)| cells.iter().all(|x| x.is_some_and(|a| (0.0..=1.0).contains(&a)))));
    assert_eq!(report.mean.len(), 14);
}
