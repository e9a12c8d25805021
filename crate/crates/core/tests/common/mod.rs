//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Mann–Whitney over all positive–negative pairs, ties counted one half.
pub fn brute_auroc(scores: &[f64], labels: &[bool]) -> f64 {
    let (mut wins, mut pairs) = (0.0, 0.0);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Best recall over thresholds (distinct scores and +inf) whose
/// specificity reaches `k`.
pub fn enumerate_recall_at_spec(scores: &[f64], labels: &[bool], k: f64) -> f64 {
    let mut thresholds: Vec<f64> = scores.to_vec();
    thresholds.push(f64::INFINITY);
    let pos = labels.iter().filter(|&&y| y).count() as f64;
    let neg = labels.len() as f64 - pos;
    thresholds
        .into_iter()
        .filter_map(|t| {
            let tn = scores.iter().zip(labels).filter(|(&s, &y)| !y && s < t).count() as f64;
            let tp = scores.iter().zip(labels).filter(|(&s, &y)| y && s >= t).count() as f64;
            (tn / neg >= k - 1e-12).then_some(tp / pos)
        })
        .fold(0.0, f64::max)
}

/// ECE by direct summation over equal-width bins (score 1 in the last bin).
pub fn ece_oracle(scores: &[f64], labels: &[bool], bins: usize) -> f64 {
    let n = scores.len() as f64;
    let mut total = 0.0;
    for b in 0..bins {
        let members: Vec<usize> = (0..scores.len())
            .filter(|&i| {
                let raw = (scores[i] * bins as f64).floor() as usize;
                raw.min(bins - 1) == b
            })
            .collect();
        if members.is_empty() {
            continue;
        }
        let m = members.len() as f64;
        let mean: f64 = members.iter().map(|&i| scores[i]).sum::<f64>() / m;
        let rate = members.iter().filter(|&&i| labels[i]).count() as f64 / m;
        total += m / n * (mean - rate).abs();
    }
    total
}

/// Small random scored set with heavy ties and both classes present.
pub fn random_set(rng: &mut ChaCha8Rng, max_len: usize) -> (Vec<f64>, Vec<bool>) {
    loop {
        let n = rng.random_range(2..=max_len);
        let levels = rng.random_range(1..=n);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
        if labels.iter().any(|&y| y) && labels.iter().any(|&y| !y) {
            return (scores, labels);
        }
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative difference with an absolute floor, as used for gradient checks.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}
