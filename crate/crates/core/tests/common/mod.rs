#![allow(dead_code)]

use rand::Rng;
use spos::rng::{self, StreamRng};
use spos::target::{make_bayes_linreg, BayesLinReg, RegressionDataset};

pub fn rng(seed: u64) -> StreamRng {
    rng::stream(seed, 0)
}

pub fn uniform_vec(rng: &mut StreamRng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

/// Every length-`b` sequence over `{0, …, n−1}`; each has probability `n^−b`
/// under with-replacement sampling.
pub fn all_batches(n: usize, b: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..b {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..n).map(move |j| {
                    let mut next = prefix.clone();
                    next.push(j);
                    next
                })
            })
            .collect();
    }
    out
}

/// Three-datum, two-covariate regression with distinct per-term gradients.
pub fn three_term_regression() -> BayesLinReg {
    let data = RegressionDataset::new(
        vec![vec![1.0, 0.5], vec![-0.7, 2.0], vec![0.3, -1.2]],
        vec![0.8, -1.1, 2.3],
        0.7,
        1.5,
    )
    .unwrap();
    make_bayes_linreg(&data).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}
