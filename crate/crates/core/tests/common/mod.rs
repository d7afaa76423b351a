#![allow(dead_code)]

use plackett::fit::ModelFit;
use plackett::rankings::RankingsTable;
use plackett::Scalar;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

pub fn letters(n: usize) -> Vec<String> {
    (0..n).map(|i| ((b'A' + i as u8) as char).to_string()).collect()
}

pub fn abcd() -> RankingsTable<f64> {
    RankingsTable::from_rank_matrix(
        &[vec![1, 2, 0, 0], vec![2, 0, 1, 0], vec![1, 0, 0, 2], vec![2, 1, 0, 0], vec![0, 1, 2, 0]],
        names(&["A", "B", "C", "D"]),
    )
    .unwrap()
}

pub fn abc() -> RankingsTable<f64> {
    abcd().subset_items(&names(&["A", "B", "C"])).unwrap().0
}

/// Random rank matrix over `j` items: each row ranks a random subset of at
/// least two items, with ties of up to `max_tie` items.
pub fn random_rank_matrix(rng: &mut ChaCha8Rng, j: usize, rows: usize, max_tie: usize) -> Vec<Vec<i64>> {
    (0..rows)
        .map(|_| {
            let mut items: Vec<usize> = (0..j).filter(|_| rng.random::<f64>() < 0.8).collect();
            while items.len() < 2 {
                let i = rng.random_range(0..j);
                if !items.contains(&i) {
                    items.push(i);
                }
            }
            // shuffle, then cut into groups
            for k in (1..items.len()).rev() {
                items.swap(k, rng.random_range(0..=k));
            }
            let mut row = vec![0i64; j];
            let mut level = 1;
            let mut pos = 0;
            while pos < items.len() {
                let size = rng.random_range(1..=max_tie.min(items.len() - pos));
                for &i in &items[pos..pos + size] {
                    row[i] = level;
                }
                pos += size;
                level += 1;
            }
            row
        })
        .collect()
}

pub fn random_table(rng: &mut ChaCha8Rng, j: usize, rows: usize, max_tie: usize) -> RankingsTable<f64> {
    let m = random_rank_matrix(rng, j, rows, max_tie);
    let weights = (0..rows).map(|_| rng.random_range(1..=3) as f64).collect();
    RankingsTable::from_rank_matrix(&m, letters(j)).unwrap().with_weights(weights).unwrap()
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| (rng.random::<f64>() - 0.5) * 2.0 * scale).collect()
}

/// Log-worth contrasts against the first item.
pub fn contrasts(lw: &[f64]) -> Vec<f64> {
    lw.iter().map(|l| l - lw[0]).collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Dense Gauss-Jordan inverse with partial pivoting.
pub fn gauss_jordan_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|k| if k == i { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        assert!(d.abs() > 1e-300, "singular matrix");
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    let pivot = m[c].clone();
                    for (v, pv) in m[r].iter_mut().zip(pivot) {
                        *v -= f * pv;
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Choice stages of a dense rank row: (chosen, remaining) pairs, stopping
/// once a single item is left.
pub fn stages(row: &[u32]) -> Vec<(Vec<usize>, Vec<usize>)> {
    let max = row.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    for level in 1..=max {
        let remaining: Vec<usize> = (0..row.len()).filter(|&i| row[i] >= level).collect();
        if remaining.len() < 2 {
            break;
        }
        let chosen: Vec<usize> = (0..row.len()).filter(|&i| row[i] == level).collect();
        out.push((chosen, remaining));
    }
    out
}

/// All nonempty subsets of `set` with at most `d` elements.
pub fn subsets(set: &[usize], d: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 1u64..(1u64 << set.len()) {
        if (mask.count_ones() as usize) <= d {
            out.push((0..set.len()).filter(|b| mask >> b & 1 == 1).map(|b| set[b]).collect());
        }
    }
    out
}

/// Brute-force log-likelihood: every stage's denominator summed over all
/// admissible subsets. `log_tie[n - 2]` is `log delta_n`.
pub fn oracle_log_likelihood(table: &RankingsTable<f64>, log_worth: &[f64], log_tie: &[f64]) -> f64 {
    let d = log_tie.len() + 1;
    let log_f = |s: &[usize]| {
        let k = s.len();
        let delta = if k == 1 { 0.0 } else { log_tie[k - 2] };
        delta + s.iter().map(|&i| log_worth[i]).sum::<f64>() / k as f64
    };
    let mut ll = 0.0;
    for r in table.active_rows() {
        for (chosen, remaining) in stages(table.row(r)) {
            let denom: f64 = subsets(&remaining, d).iter().map(|s| log_f(s).exp()).sum();
            ll += table.weight(r) * (log_f(&chosen) - denom.ln());
        }
    }
    ll
}

/// Covariance of the contrasts with item 0 (real items 1.., then active tie
/// orders) from the expanded-count Poisson log-linear model: one count per
/// (stage, admissible outcome) with a free intercept per stage, the
/// intercepts treated as nuisance parameters.
pub fn poisson_vcov(model: &ModelFit<f64>) -> Vec<Vec<f64>> {
    let table = model.augmented_data();
    let p = model.params();
    let n_all = p.n_items();
    let ties = model.active_tie_orders();
    let d = model.max_order();
    let log_f = |s: &[usize]| -> f64 {
        let k = s.len();
        let delta = if k == 1 { 0.0 } else { p.log_delta(k).to_f64_lossy() };
        delta + s.iter().map(|&i| p.log_worth[i]).sum::<f64>() / k as f64
    };
    // columns: stage intercepts, items 1.., active ties
    let mut cells: Vec<(usize, Vec<usize>, f64)> = Vec::new();
    let mut n_stages = 0;
    for r in table.active_rows() {
        for (_, remaining) in stages(table.row(r)) {
            let outcomes: Vec<Vec<usize>> = subsets(&remaining, d)
                .into_iter()
                .filter(|s| s.len() == 1 || ties.contains(&s.len()))
                .collect();
            let denom: f64 = outcomes.iter().map(|s| log_f(s).exp()).sum();
            for s in outcomes {
                let mu = table.weight(r) * log_f(&s).exp() / denom;
                cells.push((n_stages, s, mu));
            }
            n_stages += 1;
        }
    }
    let dim = n_stages + (n_all - 1) + ties.len();
    let mut info = vec![vec![0.0; dim]; dim];
    for (stage, s, mu) in &cells {
        let mut x = vec![0.0; dim];
        x[*stage] = 1.0;
        for &i in s {
            if i > 0 {
                x[n_stages + i - 1] = 1.0 / s.len() as f64;
            }
        }
        if s.len() > 1 {
            let t = ties.iter().position(|&n| n == s.len()).unwrap();
            x[n_stages + n_all - 1 + t] = 1.0;
        }
        for a in 0..dim {
            if x[a] != 0.0 {
                for b in 0..dim {
                    info[a][b] += mu * x[a] * x[b];
                }
            }
        }
    }
    let inv = gauss_jordan_inverse(&info);
    // real items 1..J then ties
    let j = model.n_items();
    let keep: Vec<usize> = (1..j).map(|i| n_stages + i - 1).chain((0..ties.len()).map(|t| n_stages + n_all - 1 + t)).collect();
    keep.iter().map(|&a| keep.iter().map(|&b| inv[a][b]).collect()).collect()
}

