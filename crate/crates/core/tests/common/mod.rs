//! Independent reference implementations used as test oracles. None of
//! these call into the library's numerical code.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Random two-blob binary problem: train rows, labels in {0, 1}, held-out
/// rows, and (gamma, C).
pub struct SvmProblem {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
    pub held_out: Vec<Vec<f64>>,
    pub gamma: f64,
    pub c: f64,
}

pub fn random_svm_problem(seed: u64) -> SvmProblem {
    let n = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed).random_range(20..=200);
    svm_problem_of_size(seed, n)
}

pub fn svm_problem_of_size(seed: u64, n: usize) -> SvmProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(2..=6);
    let sep = rng.random_range(0.5..3.0);
    let draw = |label: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        (0..d)
            .map(|i| {
                let z: f64 = StandardNormal.sample(rng);
                z + if i == 0 && label == 1 { sep } else { 0.0 }
            })
            .collect()
    };
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let label = if i < 2 { i } else { rng.random_range(0..2) };
        x.push(draw(label, &mut rng));
        y.push(label);
    }
    let held_out = (0..200)
        .map(|_| {
            let label = rng.random_range(0..2);
            draw(label, &mut rng)
        })
        .collect();
    let gamma = rng.random_range(0.05..2.0);
    let c = [0.5, 1.0, 10.0][rng.random_range(0..3)];
    SvmProblem {
        x,
        y,
        held_out,
        gamma,
        c,
    }
}

/// Row-major RBF Gram matrix.
pub fn rbf_gram(x: &[Vec<f64>], gamma: f64) -> Vec<f64> {
    let n = x.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let d2: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            k[i * n + j] = (-gamma * d2).exp();
        }
    }
    k
}

/// Euclidean projection onto `{0 ≤ α ≤ C, yᵀα = 0}` by bisection on the
/// multiplier of the equality constraint.
fn project(z: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |lam: f64| -> Vec<f64> {
        z.iter()
            .zip(y)
            .map(|(zi, yi)| (zi + lam * yi).clamp(0.0, c))
            .collect()
    };
    let h = |a: &[f64]| a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
    let bound = z.iter().fold(0.0f64, |m, v| m.max(v.abs())) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(&at(mid)) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual_objective(k: &[f64], y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alpha[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[i * n + j];
        }
    }
    0.5 * quad - alpha.iter().sum::<f64>()
}

pub struct DualOracle {
    pub alpha: Vec<f64>,
    pub objective: f64,
    pub bias: f64,
}

/// Accelerated projected gradient on the SVM dual (minimization form)
/// with adaptive restart.
pub fn dual_oracle(k: &[f64], y: &[f64], c: f64) -> DualOracle {
    let n = y.len();
    let q: Vec<f64> = (0..n * n).map(|ij| y[ij / n] * y[ij % n] * k[ij]).collect();
    // Lipschitz constant from the largest absolute row sum.
    let lip = q
        .chunks(n)
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
        .max(1e-12);
    let grad = |a: &[f64]| -> Vec<f64> {
        q.chunks(n)
            .map(|row| row.iter().zip(a).map(|(q, a)| q * a).sum::<f64>() - 1.0)
            .collect()
    };
    let mut x = vec![0.0; n];
    let mut v = x.clone();
    let mut t = 1.0f64;
    let mut last_obj = f64::INFINITY;
    for iter in 0..200_000 {
        // stop once the objective has plateaued
        if iter % 500 == 0 {
            let obj = dual_objective(k, y, &x);
            if (last_obj - obj).abs() <= 1e-14 * obj.abs().max(1.0) {
                break;
            }
            last_obj = obj;
        }
        let g = grad(&v);
        let z: Vec<f64> = v.iter().zip(&g).map(|(v, g)| v - g / lip).collect();
        let x_new = project(&z, y, c);
        let step: f64 = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        // restart momentum when it points uphill
        let uphill: f64 = g
            .iter()
            .zip(x_new.iter().zip(&x))
            .map(|(g, (a, b))| g * (a - b))
            .sum();
        let t_new = if uphill > 0.0 { 1.0 } else { 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt()) };
        let mom = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_new };
        v = x_new
            .iter()
            .zip(&x)
            .map(|(a, b)| a + mom * (a - b))
            .collect();
        x = x_new;
        t = t_new;
        if step < 1e-14 {
            break;
        }
    }
    let objective = dual_objective(k, y, &x);
    let eps = 1e-7 * c;
    let f_no_bias = |i: usize| (0..n).map(|j| x[j] * y[j] * k[i * n + j]).sum::<f64>();
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > eps && x[i] < c - eps).collect();
    let bias = if free.is_empty() {
        // midpoint of the feasible interval
        let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
        for i in 0..n {
            let r = y[i] - f_no_bias(i);
            let at_zero = x[i] <= eps;
            if (y[i] > 0.0) == at_zero {
                lo = lo.max(r);
            } else {
                hi = hi.min(r);
            }
        }
        0.5 * (lo + hi)
    } else {
        free.iter().map(|&i| y[i] - f_no_bias(i)).sum::<f64>() / free.len() as f64
    };
    DualOracle {
        alpha: x,
        objective,
        bias,
    }
}

/// Ordinary least squares with a tiny ridge, solved by Gaussian
/// elimination; returns training accuracy of the sign (or argmax over
/// one-hot targets) rule.
pub fn least_squares_probe_accuracy(x: &[Vec<f64>], labels: &[usize], classes: usize) -> f64 {
    let d = x[0].len() + 1;
    let rows: Vec<Vec<f64>> = x
        .iter()
        .map(|r| r.iter().copied().chain(std::iter::once(1.0)).collect())
        .collect();
    let mut ata = vec![vec![0.0; d]; d];
    let mut aty = vec![vec![0.0; classes]; d];
    for (r, &l) in rows.iter().zip(labels) {
        for i in 0..d {
            for j in 0..d {
                ata[i][j] += r[i] * r[j];
            }
            aty[i][l] += r[i];
        }
    }
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += 1e-8;
    }
    let w = solve(ata, aty);
    let hits = rows
        .iter()
        .zip(labels)
        .filter(|(r, &l)| {
            let scores: Vec<f64> = (0..classes)
                .map(|c| (0..d).map(|i| r[i] * w[i][c]).sum())
                .collect();
            let best = (0..classes)
                .max_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap().then(b.cmp(&a)))
                .unwrap();
            best == l
        })
        .count();
    hits as f64 / labels.len() as f64
}

fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    for c in 0..b[r].len() {
                        b[r][c] -= f * b[col][c];
                    }
                }
            }
        }
    }
    (0..n)
        .map(|i| b[i].iter().map(|v| v / a[i][i]).collect())
        .collect()
}

/// Leave-one-out nearest-centroid accuracy (centroids exclude the query).
pub fn nearest_centroid_accuracy(x: &[Vec<f64>], labels: &[usize]) -> f64 {
    let groups = labels.iter().max().unwrap() + 1;
    let d = x[0].len();
    let mut sums = vec![vec![0.0; d]; groups];
    let mut counts = vec![0usize; groups];
    for (r, &l) in x.iter().zip(labels) {
        counts[l] += 1;
        for (s, v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    let mut hits = 0;
    for (r, &l) in x.iter().zip(labels) {
        let mut best = (f64::INFINITY, 0);
        for g in 0..groups {
            let n = counts[g] as f64 - if g == l { 1.0 } else { 0.0 };
            if n <= 0.0 {
                continue;
            }
            let dist: f64 = (0..d)
                .map(|i| {
                    let s = sums[g][i] - if g == l { r[i] } else { 0.0 };
                    (s / n - r[i]).powi(2)
                })
                .sum();
            if dist < best.0 {
                best = (dist, g);
            }
        }
        hits += usize::from(best.1 == l);
    }
    hits as f64 / labels.len() as f64
}

/// Valid 1-D convolution by explicit loops. `input` is `[t][d]`, `filters`
/// is `[k][d][m]`.
pub fn naive_conv1d(input: &[Vec<f64>], filters: &[Vec<Vec<f64>>], bias: &[f64]) -> Vec<Vec<f64>> {
    let k = filters.len();
    let m = bias.len();
    (0..=input.len() - k)
        .map(|t| {
            (0..m)
                .map(|j| {
                    let mut s = bias[j];
                    for o in 0..k {
                        for (i, x) in input[t + o].iter().enumerate() {
                            s += x * filters[o][i][j];
                        }
                    }
                    s
                })
                .collect()
        })
        .collect()
}

fn sig(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scalar-loop LSTM step with gate order input, forget, candidate, output.
/// `w_x` is `[d][4H]`, `w_h` is `[H][4H]`.
pub fn naive_lstm_step(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w_x: &[Vec<f64>],
    w_h: &[Vec<f64>],
    b: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let hs = h.len();
    let z: Vec<f64> = (0..4 * hs)
        .map(|j| {
            b[j] + x.iter().enumerate().map(|(i, v)| v * w_x[i][j]).sum::<f64>()
                + h.iter().enumerate().map(|(i, v)| v * w_h[i][j]).sum::<f64>()
        })
        .collect();
    let mut h2 = vec![0.0; hs];
    let mut c2 = vec![0.0; hs];
    for u in 0..hs {
        let i = sig(z[u]);
        let f = sig(z[hs + u]);
        let g = z[2 * hs + u].tanh();
        let o = sig(z[3 * hs + u]);
        c2[u] = f * c[u] + i * g;
        h2[u] = o * c2[u].tanh();
    }
    (h2, c2)
}

/// Trustworthiness by brute-force neighbor ranking.
pub fn trustworthiness_oracle(high: &[Vec<f64>], low: &[Vec<f64>], k: usize) -> f64 {
    let n = high.len();
    let d2 = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
    let mut penalty = 0.0;
    for i in 0..n {
        let mut hi: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        hi.sort_by(|&a, &b| d2(&high[i], &high[a]).partial_cmp(&d2(&high[i], &high[b])).unwrap().then(a.cmp(&b)));
        let mut lo: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        lo.sort_by(|&a, &b| d2(&low[i], &low[a]).partial_cmp(&d2(&low[i], &low[b])).unwrap().then(a.cmp(&b)));
        for &j in &lo[..k] {
            let rank = hi.iter().position(|&x| x == j).unwrap() + 1;
            if rank > k {
                penalty += (rank - k) as f64;
            }
        }
    }
    let (n, k) = (n as f64, k as f64);
    1.0 - 2.0 / (n * k * (2.0 * n - 3.0 * k - 1.0)) * penalty
}

/// Metrics recomputed from scratch.
pub struct MetricsOracle {
    pub accuracy: f64,
    pub rmse: f64,
    pub tp_rate: Vec<f64>,
}

pub fn metrics_oracle(pred: &[usize], labels: &[usize], classes: usize) -> MetricsOracle {
    let n = labels.len();
    let correct = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    let mse = pred
        .iter()
        .zip(labels)
        .map(|(&p, &l)| (p as f64 - l as f64).powi(2))
        .sum::<f64>()
        / n as f64;
    let tp_rate = (0..classes)
        .map(|c| {
            let row = labels.iter().filter(|&&l| l == c).count();
            let hit = pred.iter().zip(labels).filter(|(&p, &l)| l == c && p == c).count();
            if row == 0 {
                0.0
            } else {
                hit as f64 / row as f64
            }
        })
        .collect();
    MetricsOracle {
        accuracy: correct as f64 / n as f64,
        rmse: mse.sqrt(),
        tp_rate,
    }
}

/// `clusters` isotropic Gaussian blobs of `per` points in `d` dimensions,
/// centres 10 apart along distinct axes. Returns rows and cluster ids.
pub fn gaussian_clusters(seed: u64, clusters: usize, per: usize, d: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::new();
    let mut ids = Vec::new();
    for c in 0..clusters {
        for _ in 0..per {
            x.push(
                (0..d)
                    .map(|i| {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        z + if i == c % d { 10.0 } else { 0.0 }
                    })
                    .collect(),
            );
            ids.push(c);
        }
    }
    (x, ids)
}

/// Labels {0, 1} as -1 / +1.
pub fn signs(y: &[usize]) -> Vec<f64> {
    y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect()
}

/// Class from the oracle's dual solution.
pub fn oracle_predict(x: &[Vec<f64>], y: &[f64], alpha: &[f64], bias: f64, gamma: f64, q: &[f64]) -> usize {
    let f: f64 = x
        .iter()
        .zip(y)
        .zip(alpha)
        .map(|((xi, yi), a)| {
            let d2: f64 = xi.iter().zip(q).map(|(u, v)| (u - v) * (u - v)).sum();
            a * yi * (-gamma * d2).exp()
        })
        .sum::<f64>()
        + bias;
    usize::from(f > 0.0)
}
