//! Reference implementations used as oracles by the integration tests.
//! Nothing here calls into the library code it is compared against.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Classic O(n*m) dynamic program for DTW with squared-Euclidean cell cost.
pub fn dtw_dp(x: &[f64], y: &[f64]) -> f64 {
    let (n, m) = (x.len(), y.len());
    let mut r = vec![vec![f64::INFINITY; m + 1]; n + 1];
    r[0][0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let c = (x[i - 1] - y[j - 1]).powi(2);
            r[i][j] = c + r[i - 1][j - 1].min(r[i - 1][j]).min(r[i][j - 1]);
        }
    }
    r[n][m]
}

/// Cost of every monotone alignment path from (0,0) to (n-1,m-1).
pub fn all_path_costs(x: &[f64], y: &[f64]) -> Vec<f64> {
    fn walk(x: &[f64], y: &[f64], i: usize, j: usize, acc: f64, out: &mut Vec<f64>) {
        let acc = acc + (x[i] - y[j]).powi(2);
        if i + 1 == x.len() && j + 1 == y.len() {
            out.push(acc);
            return;
        }
        if i + 1 < x.len() {
            walk(x, y, i + 1, j, acc, out);
        }
        if j + 1 < y.len() {
            walk(x, y, i, j + 1, acc, out);
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, i + 1, j + 1, acc, out);
        }
    }
    let mut out = Vec::new();
    walk(x, y, 0, 0, 0.0, &mut out);
    out
}

/// `-gamma * log(sum_paths exp(-cost / gamma))`, by explicit enumeration.
pub fn soft_dtw_brute(x: &[f64], y: &[f64], gamma: f64) -> f64 {
    let costs = all_path_costs(x, y);
    let best = costs.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = costs.iter().map(|c| (-(c - best) / gamma).exp()).sum();
    best - gamma * s.ln()
}

/// Pairwise-comparison AUC: P(score_pos > score_neg) + 0.5 P(tie).
pub fn mann_whitney_auc(scores: &[f64], positives: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        if !positives[i] {
            continue;
        }
        for (j, &sj) in scores.iter().enumerate() {
            if positives[j] {
                continue;
            }
            pairs += 1.0;
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
    }
    wins / pairs
}

pub const FD_STEP: f64 = 1e-5;

pub fn rel_err(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-8)
}

/// Central differences of `f` at every coordinate of `theta`, compared
/// with `analytic`; returns the largest relative error.
pub fn fd_max_rel_err<F: FnMut(&[f64]) -> f64>(mut f: F, theta: &[f64], analytic: &[f64]) -> f64 {
    assert_eq!(theta.len(), analytic.len());
    let mut t = theta.to_vec();
    let mut worst = 0.0f64;
    for i in 0..t.len() {
        let orig = t[i];
        t[i] = orig + FD_STEP;
        let plus = f(&t);
        t[i] = orig - FD_STEP;
        let minus = f(&t);
        t[i] = orig;
        worst = worst.max(rel_err(analytic[i], (plus - minus) / (2.0 * FD_STEP)));
    }
    worst
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Direct evaluation of a dilated causal convolution from its definition,
/// with the effective kernel given as `[out][in][tap]`.
pub fn conv_reference(
    x: &[Vec<f64>],
    kernel: &[f64],
    bias: &[f64],
    k: usize,
    d: usize,
) -> Vec<Vec<f64>> {
    let cin = x.len();
    let len = x[0].len();
    (0..bias.len())
        .map(|o| {
            (0..len)
                .map(|s| {
                    let mut acc = bias[o];
                    for (i, xi) in x.iter().enumerate() {
                        for j in 0..k {
                            if s >= j * d {
                                acc += kernel[(o * cin + i) * k + j] * xi[s - j * d];
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}
