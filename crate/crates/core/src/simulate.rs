//! Samplers for synthetic rankings from the model, for testing and
//! benchmarking.

use rand::seq::index::sample;
use rand::Rng;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig<T> {
    pub log_worth: Vec<T>,
    /// `log(delta_n)` for `n = 2..=D`; empty for no ties.
    pub log_tie: Vec<T>,
}

impl<T: Scalar> SamplerConfig<T> {
    pub fn plackett_luce(log_worth: Vec<T>) -> Self {
        Self {
            log_worth,
            log_tie: Vec::new(),
        }
    }

    pub fn with_ties(log_worth: Vec<T>, log_tie: Vec<T>) -> Self {
        Self { log_worth, log_tie }
    }
}

fn subsets_up_to(n: usize, d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, d: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if !cur.is_empty() {
            out.push(cur.clone());
        }
        if cur.len() == d {
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, d, cur, out);
            cur.pop();
        }
    }
    rec(0, n, d, &mut cur, &mut out);
    out
}

/// Ranks `items` (indices into the config) and returns dense rank codes
/// over all `n_items` columns (0 for items not in `items`).
pub fn sample_ranking_of<T: Scalar, R: Rng + ?Sized>(cfg: &SamplerConfig<T>, items: &[usize], rng: &mut R) -> Vec<u32> {
    let d = cfg.log_tie.len() + 1;
    let mut row = vec![0u32; cfg.log_worth.len()];
    let mut remaining: Vec<usize> = items.to_vec();
    let mut level = 1u32;
    while !remaining.is_empty() {
        let sets = subsets_up_to(remaining.len(), d);
        let logs: Vec<f64> = sets
            .iter()
            .map(|s| {
                let k = s.len();
                let mean = s.iter().map(|&m| cfg.log_worth[remaining[m]].to_f64_lossy()).sum::<f64>() / k as f64;
                let delta = if k == 1 { 0.0 } else { cfg.log_tie[k - 2].to_f64_lossy() };
                delta + mean
            })
            .collect();
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = logs.iter().map(|l| (l - max).exp()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = sets.len() - 1;
        for (k, w) in weights.iter().enumerate() {
            if u < *w {
                pick = k;
                break;
            }
            u -= w;
        }
        let chosen: Vec<usize> = sets[pick].iter().map(|&m| remaining[m]).collect();
        for &i in &chosen {
            row[i] = level;
        }
        remaining.retain(|i| !chosen.contains(i));
        level += 1;
    }
    row
}

/// `n` complete rankings of all items.
pub fn sample_rankings<T: Scalar, R: Rng + ?Sized>(cfg: &SamplerConfig<T>, n: usize, rng: &mut R) -> Vec<Vec<u32>> {
    let all: Vec<usize> = (0..cfg.log_worth.len()).collect();
    (0..n).map(|_| sample_ranking_of(cfg, &all, rng)).collect()
}

/// `n` rankings, each of a uniformly chosen subset of `size` items.
pub fn sample_subset_rankings<T: Scalar, R: Rng + ?Sized>(cfg: &SamplerConfig<T>, n: usize, size: usize, rng: &mut R) -> Vec<Vec<u32>> {
    let j = cfg.log_worth.len();
    (0..n)
        .map(|_| {
            let items = sample(rng, j, size.min(j)).into_vec();
            sample_ranking_of(cfg, &items, rng)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rows_are_dense_and_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = SamplerConfig::with_ties(vec![0.0, 0.5, -0.5, 1.0], vec![0.0, -1.0]);
        for row in sample_rankings(&cfg, 50, &mut rng) {
            assert!(row.iter().all(|&r| r > 0));
            let m = *row.iter().max().unwrap();
            for level in 1..=m {
                assert!(row.contains(&level));
            }
        }
    }

    #[test]
    fn subset_rankings_rank_the_requested_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = SamplerConfig::plackett_luce(vec![0.0; 20]);
        for row in sample_subset_rankings(&cfg, 20, 5, &mut rng) {
            assert_eq!(row.iter().filter(|&&r| r > 0).count(), 5);
        }
    }

    #[test]
    fn first_choice_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = SamplerConfig::plackett_luce(vec![3f64.ln(), 0.0]);
        let n = 20000;
        let wins = sample_rankings(&cfg, n, &mut rng).iter().filter(|r| r[0] == 1).count();
        assert!((wins as f64 / n as f64 - 0.75).abs() < 0.015);
    }

    #[test]
    fn subset_enumeration_size() {
        assert_eq!(subsets_up_to(4, 2).len(), 10);
        assert_eq!(subsets_up_to(3, 3).len(), 7);
    }
}
