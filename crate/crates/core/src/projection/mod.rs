//! Exact 2-D t-SNE with early exaggeration, momentum and per-coordinate
//! gains, plus trustworthiness and a CSV export.

use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    pub perplexity: f64,
    pub iterations: usize,
    pub exaggeration: f64,
    pub exaggeration_iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig {
            perplexity: 30.0,
            iterations: 1000,
            exaggeration: 12.0,
            exaggeration_iterations: 250,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

impl ProjectionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.perplexity >= 2.0) {
            return Err(Error::Config(format!("perplexity {} must be >= 2", self.perplexity)));
        }
        if self.iterations < self.exaggeration_iterations.max(250) {
            return Err(Error::Config(format!(
                "iterations {} must be >= 250 and cover the exaggeration phase",
                self.iterations
            )));
        }
        if !(self.learning_rate > 0.0 && self.exaggeration >= 1.0) {
            return Err(Error::Config("learning_rate must be positive and exaggeration >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// KL(P || Q) after every iteration, computed with the unexaggerated P.
    pub kl_trace: Vec<f64>,
    /// Perplexity actually used after clamping.
    pub perplexity: f64,
}

const PERPLEXITY_TOL: f64 = 1e-5;
const PERPLEXITY_STEPS: usize = 50;
const MIN_GAIN: f64 = 0.01;

fn squared_distances(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Conditional affinities `p_{j|i}` with each row's precision found by
/// bisection so that its entropy matches `ln(perplexity)`.
fn conditional_affinities(dist: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        let row = &dist[i * n..(i + 1) * n];
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let mut probs = vec![0.0; n];
        for _ in 0..PERPLEXITY_STEPS {
            // shift by the smallest off-diagonal distance for stability
            let dmin = (0..n)
                .filter(|&j| j != i)
                .map(|j| row[j])
                .fold(f64::INFINITY, f64::min);
            let mut sum = 0.0;
            for j in 0..n {
                probs[j] = if j == i { 0.0 } else { (-beta * (row[j] - dmin)).exp() };
                sum += probs[j];
            }
            let mut entropy = 0.0;
            for (j, pj) in probs.iter_mut().enumerate() {
                *pj /= sum;
                if j != i && *pj > 0.0 {
                    entropy -= *pj * pj.ln();
                }
            }
            let diff = entropy - target;
            if diff.abs() < PERPLEXITY_TOL {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        p[i * n..(i + 1) * n].copy_from_slice(&probs);
    }
    p
}

fn kl_divergence(p: &[f64], q_num: &[f64], q_sum: f64) -> f64 {
    p.iter()
        .zip(q_num)
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &num)| pij * (pij / (num / q_sum).max(1e-300)).ln())
        .sum()
}

/// Exact t-SNE into two dimensions. Deterministic for a fixed
/// `config.seed`. Rows need not be distinct.
pub fn tsne_2d(x: &[Vec<f64>], config: &ProjectionConfig) -> Result<Projection> {
    config.validate()?;
    let n = x.len();
    if n < 10 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 10 points, got {n}")));
    }
    let d = x[0].len();
    if d < 2 {
        return Err(Error::InvalidArgument("t-SNE input needs dimension >= 2".into()));
    }
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            what: "t-SNE input".into(),
            expected: d,
            found: r.len(),
        });
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::RejectNonFinite("t-SNE input".into()));
    }
    let mut perplexity = config.perplexity;
    if perplexity >= n as f64 / 3.0 {
        let clamped = (n as f64 / 3.0 - 1.0).max(2.0);
        log::warn!("perplexity {perplexity} >= n/3 for n = {n}; clamped to {clamped}");
        perplexity = clamped;
    }

    let dist = squared_distances(x);
    let cond = conditional_affinities(&dist, n, perplexity);
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] = ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }

    let mut rng = seed::rng(config.seed, 0x7473_6e65);
    let init = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y: Vec<[f64; 2]> = (0..n)
        .map(|_| [init.sample(&mut rng), init.sample(&mut rng)])
        .collect();
    let mut update = vec![[0.0f64; 2]; n];
    let mut gains = vec![[1.0f64; 2]; n];
    let mut num = vec![0.0; n * n];
    let mut kl_trace = Vec::with_capacity(config.iterations);

    for iter in 0..config.iterations {
        let exaggerate = iter < config.exaggeration_iterations;
        let factor = if exaggerate { config.exaggeration } else { 1.0 };
        let momentum = if iter < 250 { 0.5 } else { 0.8 };

        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                q_sum += 2.0 * v;
            }
        }
        for i in 0..n {
            let mut g = [0.0f64; 2];
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = num[i * n + j];
                let m = (factor * p[i * n + j] - w / q_sum) * w;
                g[0] += 4.0 * m * (y[i][0] - y[j][0]);
                g[1] += 4.0 * m * (y[i][1] - y[j][1]);
            }
            for a in 0..2 {
                gains[i][a] = if (g[a] > 0.0) != (update[i][a] > 0.0) {
                    gains[i][a] + 0.2
                } else {
                    (gains[i][a] * 0.8).max(MIN_GAIN)
                };
                update[i][a] = momentum * update[i][a] - config.learning_rate * gains[i][a] * g[a];
            }
        }
        for (yi, ui) in y.iter_mut().zip(&update) {
            yi[0] += ui[0];
            yi[1] += ui[1];
        }
        center(&mut y);

        let mut q_sum = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                let dx = y[i][0] - y[j][0];
                let dy = y[i][1] - y[j][1];
                let v = 1.0 / (1.0 + dx * dx + dy * dy);
                num[i * n + j] = v;
                num[j * n + i] = v;
                q_sum += 2.0 * v;
            }
        }
        kl_trace.push(kl_divergence(&p, &num, q_sum));
    }
    if y.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("t-SNE embedding".into()));
    }
    Ok(Projection {
        points: y,
        kl_trace,
        perplexity,
    })
}

fn center(y: &mut [[f64; 2]]) {
    let n = y.len() as f64;
    let mx = y.iter().map(|p| p[0]).sum::<f64>() / n;
    let my = y.iter().map(|p| p[1]).sum::<f64>() / n;
    for p in y.iter_mut() {
        p[0] -= mx;
        p[1] -= my;
    }
}

fn neighbor_order(rows: &[&[f64]], i: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..rows.len()).filter(|&j| j != i).collect();
    let d: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().zip(rows[i]).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    idx.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    idx
}

/// Fraction of low-dimensional `k`-neighborhoods that are also close in
/// the original space (1 is perfect). Requires `k < n / 2`.
pub fn trustworthiness(high: &[Vec<f64>], low: &[[f64; 2]], k: usize) -> Result<f64> {
    let n = high.len();
    if low.len() != n {
        return Err(Error::ShapeMismatch {
            op: "trustworthiness",
            detail: format!("{n} original rows vs {} embedded", low.len()),
        });
    }
    if k == 0 || 2 * k >= n {
        return Err(Error::InvalidArgument(format!("k = {k} must satisfy 0 < k < n/2 for n = {n}")));
    }
    let hi_rows: Vec<&[f64]> = high.iter().map(Vec::as_slice).collect();
    let lo_rows: Vec<&[f64]> = low.iter().map(|p| p.as_slice()).collect();
    let mut penalty = 0usize;
    for i in 0..n {
        let hi = neighbor_order(&hi_rows, i);
        let mut rank = vec![0usize; n];
        for (r, &j) in hi.iter().enumerate() {
            rank[j] = r + 1;
        }
        for &j in &neighbor_order(&lo_rows, i)[..k] {
            penalty += rank[j].saturating_sub(k);
        }
    }
    let (nf, kf) = (n as f64, k as f64);
    Ok(1.0 - 2.0 / (nf * kf * (2.0 * nf - 3.0 * kf - 1.0)) * penalty as f64)
}

/// One exported point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionRow {
    pub utterance_id: String,
    pub x: f64,
    pub y: f64,
    pub label: String,
    pub modality_set: String,
}

pub fn write_projection_csv(path: impl AsRef<Path>, rows: &[ProjectionRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs(n_per: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(5, 0);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut x = Vec::new();
        let mut labels = Vec::new();
        for c in 0..3 {
            for _ in 0..n_per {
                x.push(
                    (0..4)
                        .map(|i| noise.sample(&mut rng) + if i == c { 20.0 } else { 0.0 })
                        .collect(),
                );
                labels.push(c);
            }
        }
        (x, labels)
    }

    fn quick() -> ProjectionConfig {
        ProjectionConfig {
            perplexity: 5.0,
            iterations: 300,
            ..Default::default()
        }
    }

    #[test]
    fn shape_and_centering() {
        let (x, _) = blobs(6);
        let p = tsne_2d(&x, &quick()).unwrap();
        assert_eq!(p.points.len(), 18);
        assert_eq!(p.kl_trace.len(), 300);
        let mx: f64 = p.points.iter().map(|q| q[0]).sum::<f64>() / 18.0;
        let my: f64 = p.points.iter().map(|q| q[1]).sum::<f64>() / 18.0;
        assert!(mx.abs() < 1e-6 && my.abs() < 1e-6);
    }

    #[test]
    fn too_few_points_and_clamping() {
        let x: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64, 0.0]).collect();
        assert!(tsne_2d(&x, &quick()).is_err());
        let x: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64, (i * i) as f64]).collect();
        let p = tsne_2d(&x, &quick()).unwrap();
        assert!(p.perplexity < 4.0);
    }

    #[test]
    fn deterministic() {
        let (x, _) = blobs(5);
        assert_eq!(tsne_2d(&x, &quick()).unwrap(), tsne_2d(&x, &quick()).unwrap());
    }

    #[test]
    fn identity_embedding_is_fully_trustworthy() {
        let high: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64 * 0.01]).collect();
        let low: Vec<[f64; 2]> = high.iter().map(|r| [r[0], r[1]]).collect();
        assert_eq!(trustworthiness(&high, &low, 3).unwrap(), 1.0);
        assert!(trustworthiness(&high, &low, 10).is_err());
    }
}
