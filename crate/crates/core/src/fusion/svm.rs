//! C-SVM with an RBF kernel, trained by SMO with second-order working-set
//! selection. Multiclass problems use one-vs-one voting.
//!
//! The dual is solved in minimization form
//!
//! ```text
//! min ½ αᵀQα − Σα   s.t. 0 ≤ α ≤ C,  yᵀα = 0,   Q_ij = y_i y_j K(x_i, x_j)
//! ```
//!
//! and the decision value is `f(x) = Σ α_i y_i K(x_i, x) + b`.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

const TAU: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` means `1 / input_dim`.
    pub gamma: Option<f64>,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            gamma: None,
            tol: 1e-3,
            max_iter: 10_000_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoSolution {
    pub alpha: Vec<f64>,
    /// Offset with `f(x) = Σ α_i y_i K(x_i, x) − rho`.
    pub rho: f64,
    /// Dual objective `½ αᵀQα − Σα` (minimization form).
    pub objective: f64,
    pub iterations: usize,
    /// Gradient `Qα − 1` at the solution.
    pub gradient: Vec<f64>,
}

/// SMO on a precomputed row-major kernel matrix. `y` holds ±1 labels.
/// The scan order for working-set ties is a permutation drawn from `seed`.
pub fn smo_solve(
    kernel: &[f64],
    y: &[f64],
    c: f64,
    tol: f64,
    max_iter: usize,
    seed_value: u64,
) -> Result<SmoSolution> {
    let n = y.len();
    if kernel.len() != n * n {
        return Err(Error::ShapeMismatch {
            op: "smo_solve",
            detail: format!("kernel has {} entries for {n} samples", kernel.len()),
        });
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::InvalidArgument("labels must be +1 or -1".into()));
    }
    if !(c > 0.0) {
        return Err(Error::InvalidArgument(format!("C = {c} must be positive")));
    }
    let k = |i: usize, j: usize| kernel[i * n + j];
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed_value, 0x736d_6f));

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    let mut iterations = 0;
    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for &t in &order {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = usize::MAX;
        for &t in &order {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let yg = y[t] * grad[t];
            gmax2 = gmax2.max(yg);
            let b = gmax + yg;
            if b > 0.0 && i != usize::MAX {
                let mut a = k(i, i) + k(t, t) - 2.0 * k(i, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj < best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || i == usize::MAX || j == usize::MAX {
            break;
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k(i, i) + k(j, j) - 2.0 * k(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += y[t] * (y[i] * k(t, i) * di + y[j] * k(t, j) * dj);
        }
    }
    if iterations >= max_iter {
        log::warn!("SMO stopped at the iteration cap ({max_iter})");
    }

    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };
    let objective = alpha
        .iter()
        .zip(&grad)
        .map(|(a, g)| a * (g - 1.0))
        .sum::<f64>()
        / 2.0;
    Ok(SmoSolution {
        alpha,
        rho,
        objective,
        iterations,
        gradient: grad,
    })
}

pub(crate) fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// One trained two-class machine. `positive` wins when `f(x) > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub negative: usize,
    pub positive: usize,
    pub support_vectors: Vec<Vec<f64>>,
    /// `α_i · y_i` per support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub objective: f64,
}

impl BinarySvm {
    pub fn decision_value(&self, x: &[f64], gamma: f64) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, c)| c * rbf(sv, x, gamma))
            .sum::<f64>()
            + self.bias
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: usize,
    pub dim: usize,
    pub gamma: f64,
    pub c: f64,
    pub machines: Vec<BinarySvm>,
}

fn train_pair(
    x: &[&[f64]],
    y: &[f64],
    gamma: f64,
    params: &SvmParams,
    seed_value: u64,
) -> Result<(SmoSolution, Vec<f64>)> {
    let n = x.len();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        kernel[i * n + i] = 1.0;
        for j in 0..i {
            let v = rbf(x[i], x[j], gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let sol = smo_solve(&kernel, y, params.c, params.tol, params.max_iter, seed_value)?;
    Ok((sol, kernel))
}

/// Trains a one-vs-one RBF SVM over `classes` classes (a single machine
/// when `classes == 2`).
pub fn svm_train(
    x: &[Vec<f64>],
    y: &[usize],
    classes: usize,
    params: &SvmParams,
    seed_value: u64,
) -> Result<SvmModel> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            op: "svm_train",
            detail: format!("{} rows vs {} labels", x.len(), y.len()),
        });
    }
    let dim = x.first().ok_or(Error::EmptyInput("svm_train"))?.len();
    if let Some(row) = x.iter().find(|r| r.len() != dim) {
        return Err(Error::DimensionMismatch {
            what: "svm_train input".into(),
            expected: dim,
            found: row.len(),
        });
    }
    if let Some(&bad) = y.iter().find(|&&l| l >= classes) {
        return Err(Error::LabelOutOfRange { label: bad, classes });
    }
    let mut present = vec![false; classes];
    y.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::ClassDegenerate);
    }
    let gamma = params.gamma.unwrap_or(1.0 / dim.max(1) as f64);
    let mut machines = Vec::new();
    for a in 0..classes {
        for b in (a + 1)..classes {
            if !present[a] || !present[b] {
                continue;
            }
            let idx: Vec<usize> = (0..x.len()).filter(|&i| y[i] == a || y[i] == b).collect();
            let xs: Vec<&[f64]> = idx.iter().map(|&i| x[i].as_slice()).collect();
            let ys: Vec<f64> = idx.iter().map(|&i| if y[i] == b { 1.0 } else { -1.0 }).collect();
            let (sol, _) = train_pair(
                &xs,
                &ys,
                gamma,
                params,
                seed::derive(seed_value, (a * classes + b) as u64),
            )?;
            let mut support_vectors = Vec::new();
            let mut dual_coef = Vec::new();
            for (t, &al) in sol.alpha.iter().enumerate() {
                if al > 0.0 {
                    support_vectors.push(xs[t].to_vec());
                    dual_coef.push(al * ys[t]);
                }
            }
            machines.push(BinarySvm {
                negative: a,
                positive: b,
                support_vectors,
                dual_coef,
                bias: -sol.rho,
                objective: sol.objective,
            });
        }
    }
    Ok(SvmModel {
        classes,
        dim,
        gamma,
        c: params.c,
        machines,
    })
}

impl SvmModel {
    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                what: "svm_predict input".into(),
                expected: self.dim,
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Decision value of every pairwise machine, in `machines` order.
    pub fn decision_values(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self
            .machines
            .iter()
            .map(|m| m.decision_value(x, self.gamma))
            .collect())
    }

    /// Sign rule for two classes; majority vote otherwise, ties to the
    /// lower class id.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let values = self.decision_values(x)?;
        let mut votes = vec![0usize; self.classes];
        for (m, v) in self.machines.iter().zip(values) {
            if v > 0.0 {
                votes[m.positive] += 1;
            } else {
                votes[m.negative] += 1;
            }
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(best)
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
