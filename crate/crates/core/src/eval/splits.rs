use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train_speakers: BTreeSet<String>,
    pub test_speakers: BTreeSet<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

impl FoldPlan {
    /// Checks disjointness, coverage and pairwise-disjoint test sets
    /// against `roster`.
    pub fn check(&self, roster: &BTreeSet<String>) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (i, f) in self.folds.iter().enumerate() {
            if !f.train_speakers.is_disjoint(&f.test_speakers) {
                return Err(Error::FoldConstraint(format!("fold {i} shares speakers")));
            }
            let all: BTreeSet<_> = f.train_speakers.union(&f.test_speakers).cloned().collect();
            if &all != roster {
                return Err(Error::FoldConstraint(format!("fold {i} does not cover the roster")));
            }
            for s in &f.test_speakers {
                if !seen.insert(s.clone()) {
                    return Err(Error::FoldConstraint(format!("speaker {s} is tested twice")));
                }
            }
        }
        if &seen != roster {
            return Err(Error::FoldConstraint("test sets do not cover the roster".into()));
        }
        Ok(())
    }
}

/// Leave-one-speaker-out when `k` equals the roster size; otherwise a
/// seeded shuffle of the roster dealt round-robin into `k` groups.
pub fn make_speaker_exclusive_folds(corpus: &Corpus, k: usize, seed_value: u64) -> Result<FoldPlan> {
    let roster = corpus.speakers();
    if k < 2 {
        return Err(Error::FoldConstraint(format!("k = {k}; speaker-exclusive folds need k >= 2")));
    }
    if k > roster.len() {
        return Err(Error::FoldConstraint(format!(
            "k = {k} exceeds the {} speakers of corpus '{}'",
            roster.len(),
            corpus.name()
        )));
    }
    let mut order = roster.clone();
    if k != roster.len() {
        order.shuffle(&mut seed::rng(seed_value, 0x666f_6c64));
    }
    let mut groups = vec![BTreeSet::new(); k];
    for (i, s) in order.into_iter().enumerate() {
        groups[i % k].insert(s);
    }
    let all: BTreeSet<String> = roster.into_iter().collect();
    let folds = groups
        .into_iter()
        .map(|test| Fold {
            train_speakers: all.difference(&test).cloned().collect(),
            test_speakers: test,
        })
        .collect();
    Ok(FoldPlan {
        k,
        seed: seed_value,
        folds,
    })
}

/// Train / optional validation / test corpora of one evaluation.
#[derive(Clone, Debug)]
pub struct Partition {
    pub train: Corpus,
    pub val: Option<Corpus>,
    pub test: Corpus,
}

impl Partition {
    /// Utterances available for training before the validation carve.
    pub fn train_total(&self) -> (usize, usize) {
        let (mut u, mut v) = (self.train.num_utterances(), self.train.num_videos());
        if let Some(val) = &self.val {
            u += val.num_utterances();
            v += val.num_videos();
        }
        (u, v)
    }
}

/// Shuffles the videos of `train` and moves `round(val_fraction · n)` of
/// them (at least one, at most `n − 1`) into a validation corpus.
pub fn carve_validation(train: &Corpus, val_fraction: f64, seed_value: u64) -> Result<(Corpus, Corpus)> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(Error::Split(format!("val_fraction {val_fraction} is outside (0, 1)")));
    }
    let n = train.num_videos();
    if n < 2 {
        return Err(Error::Split(format!(
            "'{}' has {n} video(s); a validation carve needs at least 2",
            train.name()
        )));
    }
    let mut ids: Vec<String> = train.videos().iter().map(|v| v.video_id.clone()).collect();
    ids.shuffle(&mut seed::rng(seed_value, 0x7661_6c));
    let n_val = ((val_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let val_ids: BTreeSet<String> = ids[..n_val].iter().cloned().collect();
    let train_ids: BTreeSet<String> = ids[n_val..].iter().cloned().collect();
    Ok((
        train.select_videos(train.name(), &train_ids)?,
        train.select_videos(&format!("{}-val", train.name()), &val_ids)?,
    ))
}

/// Explicit video-id split with a validation set carved from the training
/// videos.
pub fn make_fixed_split(
    corpus: &Corpus,
    train_videos: &[String],
    test_videos: &[String],
    val_fraction: f64,
    seed_value: u64,
) -> Result<Partition> {
    let train_ids: BTreeSet<String> = train_videos.iter().cloned().collect();
    let test_ids: BTreeSet<String> = test_videos.iter().cloned().collect();
    if train_ids.len() != train_videos.len() || test_ids.len() != test_videos.len() {
        return Err(Error::Split("duplicate video id in a split list".into()));
    }
    if let Some(id) = train_ids.intersection(&test_ids).next() {
        return Err(Error::Split(format!("video '{id}' is in both train and test")));
    }
    let all: BTreeSet<String> = corpus.videos().iter().map(|v| v.video_id.clone()).collect();
    let listed: BTreeSet<String> = train_ids.union(&test_ids).cloned().collect();
    if let Some(id) = all.difference(&listed).next() {
        return Err(Error::Split(format!("video '{id}' is in neither list")));
    }
    if let Some(id) = listed.difference(&all).next() {
        return Err(Error::Split(format!("video '{id}' is not in the corpus")));
    }
    let train = corpus.select_videos(&format!("{}-train", corpus.name()), &train_ids)?;
    let test = corpus.select_videos(&format!("{}-test", corpus.name()), &test_ids)?;
    let (train, val) = carve_validation(&train, val_fraction, seed_value)?;
    Ok(Partition {
        train,
        val: Some(val),
        test,
    })
}

/// Random utterance-level split that ignores speakers. Each side keeps the
/// in-order subsequence of every video it touches.
pub fn make_speaker_inclusive_split(
    corpus: &Corpus,
    test_fraction: f64,
    val_fraction: f64,
    seed_value: u64,
) -> Result<Partition> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Split(format!("test_fraction {test_fraction} is outside (0, 1)")));
    }
    if corpus.num_videos() < 2 {
        return Err(Error::Split(format!(
            "corpus '{}' has a single video; too small to split",
            corpus.name()
        )));
    }
    let mut ids: Vec<&str> = corpus.utterances().map(|u| u.utterance_id.as_str()).collect();
    ids.shuffle(&mut seed::rng(seed_value, 0x696e_636c));
    let n_test = ((test_fraction * ids.len() as f64).round() as usize).clamp(1, ids.len() - 1);
    let test_ids: BTreeSet<String> = ids[..n_test].iter().map(|s| s.to_string()).collect();
    let train = corpus.filter_utterances(corpus.scheme(), |u| !test_ids.contains(&u.utterance_id))?;
    let test = corpus.filter_utterances(corpus.scheme(), |u| test_ids.contains(&u.utterance_id))?;
    let (train, val) = carve_validation(&train, val_fraction, seed::derive(seed_value, 1))?;
    Ok(Partition {
        train,
        val: Some(val),
        test,
    })
}

/// Train/val/test corpora of fold `index` of `plan`.
pub fn fold_partition(
    corpus: &Corpus,
    plan: &FoldPlan,
    index: usize,
    val_fraction: f64,
) -> Result<Partition> {
    let fold = plan
        .folds
        .get(index)
        .ok_or_else(|| Error::FoldConstraint(format!("fold {index} out of range")))?;
    let pick = |speakers: &BTreeSet<String>| -> BTreeSet<String> {
        corpus
            .videos()
            .iter()
            .filter(|v| speakers.contains(&v.speaker_id))
            .map(|v| v.video_id.clone())
            .collect()
    };
    let train = corpus.select_videos(&format!("{}-fold{index}-train", corpus.name()), &pick(&fold.train_speakers))?;
    let test = corpus.select_videos(&format!("{}-fold{index}-test", corpus.name()), &pick(&fold.test_speakers))?;
    let val_seed = seed::derive(plan.seed, 100 + index as u64);
    let (train, val) = match carve_validation(&train, val_fraction, val_seed) {
        Ok((t, v)) => (t, Some(v)),
        Err(Error::Split(_)) => (train, None),
        Err(e) => return Err(e),
    };
    Ok(Partition { train, val, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic, SynthSpec};

    fn corpus(videos: usize, speakers: usize) -> Corpus {
        generate_synthetic(
            &SynthSpec {
                videos,
                speakers,
                utterances_per_video: 3,
                audio_dim: 2,
                visual_dim: 2,
                ..Default::default()
            },
            1,
        )
        .unwrap()
    }

    #[test]
    fn leave_one_speaker_out() {
        let c = corpus(10, 10);
        let plan = make_speaker_exclusive_folds(&c, 10, 3).unwrap();
        assert_eq!(plan.folds.len(), 10);
        assert!(plan.folds.iter().all(|f| f.test_speakers.len() == 1));
        plan.check(&c.speakers().into_iter().collect()).unwrap();
    }

    #[test]
    fn balanced_dealing() {
        let c = corpus(7, 7);
        let plan = make_speaker_exclusive_folds(&c, 5, 3).unwrap();
        let mut sizes: Vec<usize> = plan.folds.iter().map(|f| f.test_speakers.len()).collect();
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        assert_eq!(sizes, vec![2, 2, 1, 1, 1]);
        let c = corpus(80, 80);
        let plan = make_speaker_exclusive_folds(&c, 5, 3).unwrap();
        assert!(plan.folds.iter().all(|f| f.test_speakers.len() == 16));
    }

    #[test]
    fn too_many_folds() {
        let c = corpus(5, 5);
        let err = make_speaker_exclusive_folds(&c, 10, 0).unwrap_err();
        assert!(err.to_string().contains("k = 10"));
    }

    #[test]
    fn val_ratio_on_ten_videos() {
        let c = corpus(12, 0);
        let ids: Vec<String> = c.videos().iter().map(|v| v.video_id.clone()).collect();
        let p = make_fixed_split(&c, &ids[..10], &ids[10..], 0.2, 4).unwrap();
        assert_eq!(p.train.num_videos(), 8);
        assert_eq!(p.val.as_ref().unwrap().num_videos(), 2);
        assert_eq!(p.test.num_videos(), 2);
    }

    #[test]
    fn fixed_split_rejects_bad_lists() {
        let c = corpus(4, 0);
        let ids: Vec<String> = c.videos().iter().map(|v| v.video_id.clone()).collect();
        assert!(make_fixed_split(&c, &ids[..2], &ids[1..], 0.2, 0).is_err());
        assert!(make_fixed_split(&c, &ids[..2], &ids[2..3], 0.2, 0).is_err());
    }

    #[test]
    fn inclusive_split_is_an_utterance_partition() {
        let c = corpus(10, 0);
        let p = make_speaker_inclusive_split(&c, 0.3, 0.2, 5).unwrap();
        let (train_u, _) = p.train_total();
        assert_eq!(train_u + p.test.num_utterances(), 30);
        assert_eq!(p.test.num_utterances(), 9);
        let one = corpus(1, 0);
        assert!(make_speaker_inclusive_split(&one, 0.3, 0.2, 0).is_err());
    }
}
