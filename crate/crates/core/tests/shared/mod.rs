//! Checks and fixtures shared by the integration tests and the acceptance
//! target. Unlike `common`, these drive the library.
#![allow(dead_code)]

use std::collections::BTreeSet;

use mmsb::autodiff::{bilstm_sequence, grad_check, init_lstm, lstm_cell, Bound, LstmVars, ParamSet, Tensor};
use mmsb::corpus::{generate_synthetic, Corpus, SynthSpec};
use mmsb::encoders::{TextEncoder, TextEncoderConfig};
use mmsb::eval::FoldPlan;
use mmsb::fusion::SmoSolution;
use mmsb::seed;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const FD_STEP: f64 = 1e-5;

pub fn randn(rng: &mut impl Rng, shape: &[usize], scale: f64) -> Tensor {
    let n = shape.iter().product();
    let v = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            scale * z
        })
        .collect();
    Tensor::new(shape.to_vec(), v).unwrap()
}

/// Max relative finite-difference error for each differentiable op on a
/// randomly shaped instance drawn from `seed`.
pub fn gradient_errors(seed_value: u64) -> Vec<(&'static str, f64)> {
    let mut rng = seed::rng(seed_value, 0x6663);
    let mut out = Vec::new();

    // conv1d: scalarized by a fixed random projection of the output
    let (l, d, k, f) = (
        rng.random_range(3..9),
        rng.random_range(1..5),
        rng.random_range(1..4),
        rng.random_range(1..5),
    );
    let proj = randn(&mut rng, &[l - k + 1, f], 1.0);
    let params = [randn(&mut rng, &[l, d], 1.0), randn(&mut rng, &[k, d, f], 0.5), randn(&mut rng, &[f], 0.5)];
    let e = grad_check(
        |g, p| {
            let c = g.conv1d(p[0], p[1], p[2])?;
            let r = g.constant(proj.clone());
            g.dot(c, r)
        },
        &params,
        FD_STEP,
    )
    .unwrap();
    out.push(("conv1d", e));

    let (n, m) = (rng.random_range(1..8), rng.random_range(1..6));
    let proj = randn(&mut rng, &[m], 1.0);
    let params = [randn(&mut rng, &[n], 1.0), randn(&mut rng, &[n, m], 0.5), randn(&mut rng, &[m], 0.5)];
    let e = grad_check(
        |g, p| {
            let y = g.dense(p[0], p[1], Some(p[2]))?;
            let r = g.constant(proj.clone());
            g.dot(y, r)
        },
        &params,
        FD_STEP,
    )
    .unwrap();
    out.push(("dense", e));

    let (d, h) = (rng.random_range(1..5), rng.random_range(1..5));
    let (proj_h, proj_c) = (randn(&mut rng, &[h], 1.0), randn(&mut rng, &[h], 1.0));
    let params = [
        randn(&mut rng, &[d], 1.0),
        randn(&mut rng, &[h], 0.5),
        randn(&mut rng, &[h], 0.5),
        randn(&mut rng, &[d, 4 * h], 0.5),
        randn(&mut rng, &[h, 4 * h], 0.5),
        randn(&mut rng, &[4 * h], 0.5),
    ];
    let e = grad_check(
        |g, p| {
            let vars = LstmVars { w_x: p[3], w_h: p[4], b: p[5] };
            let (hn, cn) = lstm_cell(g, p[0], p[1], p[2], &vars)?;
            let (rh, rc) = (g.constant(proj_h.clone()), g.constant(proj_c.clone()));
            let a = g.dot(hn, rh)?;
            let b = g.dot(cn, rc)?;
            g.sum(&[a, b])
        },
        &params,
        FD_STEP,
    )
    .unwrap();
    out.push(("lstm_cell", e));

    let (t, d, h) = (rng.random_range(1..5), rng.random_range(1..4), rng.random_range(1..4));
    let projs: Vec<Tensor> = (0..t).map(|_| randn(&mut rng, &[2 * h], 1.0)).collect();
    let mut params: Vec<Tensor> = vec![
        randn(&mut rng, &[d, 4 * h], 0.5),
        randn(&mut rng, &[h, 4 * h], 0.5),
        randn(&mut rng, &[4 * h], 0.5),
        randn(&mut rng, &[d, 4 * h], 0.5),
        randn(&mut rng, &[h, 4 * h], 0.5),
        randn(&mut rng, &[4 * h], 0.5),
    ];
    params.extend((0..t).map(|_| randn(&mut rng, &[d], 1.0)));
    let e = grad_check(
        |g, p| {
            let fwd = LstmVars { w_x: p[0], w_h: p[1], b: p[2] };
            let bwd = LstmVars { w_x: p[3], w_h: p[4], b: p[5] };
            let hs = bilstm_sequence(g, &p[6..], &fwd, &bwd)?;
            let terms = hs
                .iter()
                .zip(&projs)
                .map(|(&hv, r)| {
                    let rv = g.constant(r.clone());
                    g.dot(hv, rv)
                })
                .collect::<mmsb::Result<Vec<_>>>()?;
            g.sum(&terms)
        },
        &params,
        FD_STEP,
    )
    .unwrap();
    out.push(("bilstm_sequence", e));

    let c = rng.random_range(2..6);
    let label = rng.random_range(0..c);
    let e = grad_check(|g, p| g.softmax_cross_entropy(p[0], label), &[randn(&mut rng, &[c], 2.0)], FD_STEP).unwrap();
    out.push(("softmax_cross_entropy", e));

    out.push(("text_cnn", text_cnn_gradient_error(seed_value)));
    out
}

/// Composed encoder plus a softmax head, every parameter checked.
pub fn text_cnn_gradient_error(seed_value: u64) -> f64 {
    let mut rng = seed::rng(seed_value, 0x636e6e);
    let cfg = TextEncoderConfig {
        vocab_size: 12,
        embed_dim: 6,
        filter_widths: vec![2, 3],
        maps_per_width: 4,
        dense_dim: 5,
        max_len: 10,
        embedding_file: None,
    };
    let mut enc = TextEncoder::new(cfg, seed_value).unwrap();
    // Unit-scale parameters and nonzero biases: keeps gradients well above
    // the finite-difference rounding floor and units away from ReLU kinks.
    let names = enc.params().names().to_vec();
    for (name, t) in names.iter().zip(enc.params_mut().tensors_mut()) {
        let shift = if name == "dense.b" { 0.5 } else { 0.0 };
        for v in t.values_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *v = 0.5 * z + shift;
        }
    }
    let len = rng.random_range(1..9);
    let tokens: Vec<u32> = (0..len).map(|_| rng.random_range(0..12)).collect();
    let mut tensors = enc.params().tensors().to_vec();
    let head = [randn(&mut rng, &[5, 3], 0.5), randn(&mut rng, &[3], 0.5)];
    tensors.extend(head.iter().cloned());
    // target the least likely class so the loss is far from saturation
    let rep = enc.encode(&tokens).unwrap();
    let logits: Vec<f64> = (0..3)
        .map(|j| head[1].values()[j] + rep.iter().enumerate().map(|(i, r)| r * head[0].values()[i * 3 + j]).sum::<f64>())
        .collect();
    let label = (0..3).min_by(|&a, &b| logits[a].total_cmp(&logits[b])).unwrap();
    let set = enc.params().clone();
    grad_check(
        |g, p| {
            let bound = Bound::from_vars(&set, &p[..set.len()])?;
            let rep = enc.forward(g, &bound, &tokens)?;
            let logits = g.dense(rep, p[set.len()], Some(p[set.len() + 1]))?;
            g.softmax_cross_entropy(logits, label)
        },
        &tensors,
        FD_STEP,
    )
    .unwrap()
}

/// Random LSTM parameters under `prefix`.
pub fn lstm_params(prefix: &str, input: usize, hidden: usize, seed_value: u64) -> ParamSet {
    let mut p = ParamSet::new();
    init_lstm(&mut p, prefix, input, hidden, &mut seed::rng(seed_value, 1));
    p
}

/// Disjointness, coverage and pairwise-disjoint test sets.
pub fn fold_invariants(plan: &FoldPlan, roster: &BTreeSet<String>) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for (i, f) in plan.folds.iter().enumerate() {
        if let Some(s) = f.train_speakers.intersection(&f.test_speakers).next() {
            return Err(format!("fold {i}: speaker {s} in train and test"));
        }
        let union: BTreeSet<String> = f.train_speakers.union(&f.test_speakers).cloned().collect();
        if &union != roster {
            return Err(format!("fold {i}: train ∪ test is not the roster"));
        }
        for s in &f.test_speakers {
            if !seen.insert(s.clone()) {
                return Err(format!("speaker {s} tested twice"));
            }
        }
    }
    if &seen != roster {
        return Err("test sets do not cover the roster".into());
    }
    Ok(())
}

/// Largest KKT violation, with decision values recomputed
/// from the kernel rather than taken from the solver.
pub fn kkt_violation(k: &[f64], y: &[f64], c: f64, sol: &SmoSolution) -> f64 {
    let n = y.len();
    let mut worst = 0.0f64;
    for i in 0..n {
        let f: f64 = (0..n).map(|j| sol.alpha[j] * y[j] * k[i * n + j]).sum::<f64>() - sol.rho;
        let m = y[i] * f;
        let a = sol.alpha[i];
        let eps = 1e-12 * c.max(1.0);
        let v = if a <= eps {
            (1.0 - m).max(0.0)
        } else if a >= c - eps {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    worst
}

/// Synthetic corpus with explicit per-video lengths.
pub fn corpus_with_lengths(name: &str, lengths: Vec<usize>, speakers: usize, seed_value: u64) -> Corpus {
    let spec = SynthSpec {
        name: name.into(),
        video_lengths: Some(lengths),
        speakers,
        audio_dim: 4,
        visual_dim: 3,
        ..Default::default()
    };
    generate_synthetic(&spec, seed_value).unwrap()
}

/// Splits `total` utterances over `videos` videos as evenly as possible.
pub fn even_lengths(total: usize, videos: usize) -> Vec<usize> {
    (0..videos).map(|i| total / videos + usize::from(i < total % videos)).collect()
}

/// Fixture shaped like a fixed train/test split: `(train utterances,
/// train videos, test utterances, test videos)`. Returns the corpus and the
/// two id lists.
pub fn split_fixture(shape: (usize, usize, usize, usize), seed_value: u64) -> (Corpus, Vec<String>, Vec<String>) {
    let (tu, tv, su, sv) = shape;
    let mut lengths = even_lengths(tu, tv);
    lengths.extend(even_lengths(su, sv));
    let corpus = corpus_with_lengths("fixture", lengths, 0, seed_value);
    let ids: Vec<String> = corpus.videos().iter().map(|v| v.video_id.clone()).collect();
    let (train, test) = ids.split_at(tv);
    (corpus, train.to_vec(), test.to_vec())
}

pub fn quickstart_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/quickstart.json")
}

/// The small model configuration shipped with the quickstart.
pub fn quick_models() -> mmsb::eval::ModelConfig {
    mmsb::runner::ExperimentConfig::load(quickstart_path()).unwrap().0.models
}

/// Copy of `corpus` with every label of `speaker` flipped (binary only).
pub fn flip_speaker(corpus: &Corpus, speaker: &str) -> Corpus {
    let videos = corpus
        .videos()
        .iter()
        .cloned()
        .map(|mut v| {
            if v.speaker_id == speaker {
                for u in &mut v.utterances {
                    u.label = 1 - u.label;
                }
            }
            v
        })
        .collect();
    Corpus::new(
        corpus.name(),
        corpus.scheme(),
        videos,
        corpus.language_tag(),
        corpus.vocab().clone(),
    )
    .unwrap()
}
