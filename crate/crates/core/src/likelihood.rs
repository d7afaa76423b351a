//! Probability model for rankings with ties.
//!
//! A set `S` of tied items has strength `f(S) = delta_|S| * (prod_{i in S} alpha_i)^(1/|S|)`
//! with `delta_1 = 1`. A ranking is a sequence of choice events; at each
//! event the chosen set `C` is picked from the remaining items `A` with
//! probability `f(C) / sum_{S subset A, |S| <= D} f(S)`.
//!
//! Everything is evaluated on the log scale with a per-event shift, so
//! extreme worths neither overflow nor underflow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rankings::{row_ordering, RankingsTable};
use crate::scalar::Scalar;

/// Events per parallel work unit. Fixed so that reductions happen in the
/// same order whatever the thread count.
const CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Parameters<T> {
    /// `log(alpha_i)` for every item (including a ghost item when present).
    #[serde(with = "crate::scalar::extended_vec")]
    pub log_worth: Vec<T>,
    /// `log(delta_n)` for tie orders `n = 2..=D`; `-inf` switches an order off.
    #[serde(with = "crate::scalar::extended_vec")]
    pub log_tie: Vec<T>,
}

impl<T: Scalar> Parameters<T> {
    pub fn new(log_worth: Vec<T>, log_tie: Vec<T>) -> Self {
        Self { log_worth, log_tie }
    }

    /// Equal worths summing to one and `delta_n = tie_start` for every order.
    pub fn uniform(n_items: usize, max_order: usize, tie_start: T) -> Self {
        let lw = -T::from_usize_lossy(n_items).ln();
        Self {
            log_worth: vec![lw; n_items],
            log_tie: vec![tie_start.ln(); max_order.saturating_sub(1)],
        }
    }

    pub fn n_items(&self) -> usize {
        self.log_worth.len()
    }

    /// Maximum tie order `D`.
    pub fn max_order(&self) -> usize {
        self.log_tie.len() + 1
    }

    /// `log(delta_n)`; zero for `n = 1`.
    #[inline]
    pub fn log_delta(&self, order: usize) -> T {
        if order == 1 {
            T::zero()
        } else {
            self.log_tie[order - 2]
        }
    }

    /// Worths rescaled to sum to one over the first `n_real` items.
    pub fn worth(&self, n_real: usize) -> Vec<T> {
        let lse = crate::scalar::log_sum_exp(&self.log_worth[..n_real]);
        self.log_worth[..n_real].iter().map(|&l| (l - lse).exp()).collect()
    }

    /// Shifts log-worths so the worths of the first `n_real` items sum to one.
    pub fn normalize(&mut self, n_real: usize) {
        let lse = crate::scalar::log_sum_exp(&self.log_worth[..n_real]);
        for l in &mut self.log_worth {
            *l -= lse;
        }
    }
}

/// One stage of a ranking: `chosen` is picked from `alternatives`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceEvent<T> {
    pub chosen: Vec<usize>,
    pub alternatives: Vec<usize>,
    pub weight: T,
    /// Row of the table the event came from.
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SufficientStats<T> {
    /// Wins plus `1/n` of each `n`-way tie, per item.
    pub item: Vec<T>,
    /// Count of `n`-way ties for `n = 2..=D`.
    pub tie: Vec<T>,
}

impl<T: Scalar> SufficientStats<T> {
    pub fn zeros(n_items: usize, max_order: usize) -> Self {
        Self {
            item: vec![T::zero(); n_items],
            tie: vec![T::zero(); max_order.saturating_sub(1)],
        }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.item.iter_mut().zip(&other.item) {
            *a += b;
        }
        for (a, &b) in self.tie.iter_mut().zip(&other.tie) {
            *a += b;
        }
    }

    /// Item statistics followed by tie statistics.
    pub fn to_vec(&self) -> Vec<T> {
        self.item.iter().chain(&self.tie).copied().collect()
    }
}

/// `f(S)` for the items in `set`.
pub fn set_strength<T: Scalar>(set: &[usize], params: &Parameters<T>) -> Result<T> {
    Ok(log_set_strength(set, params)?.exp())
}

pub fn log_set_strength<T: Scalar>(set: &[usize], params: &Parameters<T>) -> Result<T> {
    let k = set.len();
    if k == 0 || k > params.max_order() {
        return Err(Error::TieOrderExceeded {
            size: k,
            max: params.max_order(),
        });
    }
    let mean = set.iter().map(|&i| params.log_worth[i]).sum::<T>() / T::from_usize_lossy(k);
    Ok(params.log_delta(k) + mean)
}

/// Calls `visit(indices)` for every `k`-subset of `0..n`, in lexicographic order.
fn for_each_combination(n: usize, k: usize, mut visit: impl FnMut(&[usize])) {
    if k == 0 || k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        visit(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Per-event scaled powers: `pow[k-1][m] = exp((log alpha_{A_m} - shift) / k)`.
struct EventScale<T> {
    shift: T,
    pow: Vec<Vec<T>>,
    delta: Vec<T>,
    kmax: usize,
}

impl<T: Scalar> EventScale<T> {
    fn new(alternatives: &[usize], params: &Parameters<T>) -> Self {
        let shift = alternatives
            .iter()
            .map(|&i| params.log_worth[i])
            .fold(T::neg_infinity(), T::max);
        let kmax = alternatives.len().min(params.max_order());
        let pow = (1..=kmax)
            .map(|k| {
                let kk = T::from_usize_lossy(k);
                alternatives
                    .iter()
                    .map(|&i| ((params.log_worth[i] - shift) / kk).exp())
                    .collect()
            })
            .collect();
        let delta = (1..=kmax).map(|k| params.log_delta(k).exp()).collect();
        Self {
            shift,
            pow,
            delta,
            kmax,
        }
    }
}

/// `log sum_{S subset A, 1 <= |S| <= min(|A|, D)} f(S)`, enumerating
/// subsets directly.
pub fn log_choice_denominator<T: Scalar>(alternatives: &[usize], params: &Parameters<T>) -> T {
    let sc = EventScale::new(alternatives, params);
    let n = alternatives.len();
    let mut total = T::zero();
    for k in 1..=sc.kmax {
        let d = sc.delta[k - 1];
        if d == T::zero() {
            continue;
        }
        let p = &sc.pow[k - 1];
        let mut sum = T::zero();
        for_each_combination(n, k, |s| {
            sum += s.iter().fold(T::one(), |acc, &m| acc * p[m]);
        });
        total += d * sum;
    }
    sc.shift + total.ln()
}

pub fn choice_denominator<T: Scalar>(alternatives: &[usize], params: &Parameters<T>) -> T {
    log_choice_denominator(alternatives, params).exp()
}

/// Appends the choice events of one ranking row. The final event is
/// skipped when only a single item remains (its probability is one); a
/// final tie group is a genuine event and is kept.
fn push_row_events<T: Scalar>(
    row: &[u32],
    r: usize,
    weight: T,
    max_order: usize,
    out: &mut Vec<ChoiceEvent<T>>,
) -> Result<()> {
    let groups = row_ordering(row);
    let mut remaining: Vec<usize> = groups.iter().flatten().copied().collect();
    remaining.sort_unstable();
    for g in groups {
        if g.len() > max_order {
            return Err(Error::TieOrderExceeded {
                size: g.len(),
                max: max_order,
            });
        }
        if remaining.len() < 2 {
            break;
        }
        out.push(ChoiceEvent {
            chosen: g.clone(),
            alternatives: remaining.clone(),
            weight,
            row: r,
        });
        remaining.retain(|i| !g.contains(i));
    }
    Ok(())
}

/// Choice events of all active rows (non-NA, positive weight).
pub fn choice_events<T: Scalar>(table: &RankingsTable<T>, max_order: usize) -> Result<Vec<ChoiceEvent<T>>> {
    let mut out = Vec::new();
    for r in table.active_rows() {
        push_row_events(table.row(r), r, table.weight(r), max_order, &mut out)?;
    }
    Ok(out)
}

/// Log-probability of a single ranking row (weights ignored).
pub fn ranking_log_probability<T: Scalar>(row: &[u32], params: &Parameters<T>) -> Result<T> {
    let mut events = Vec::new();
    push_row_events(row, 0, T::one(), params.max_order(), &mut events)?;
    let mut lp = T::zero();
    for e in &events {
        lp += log_set_strength(&e.chosen, params)? - log_choice_denominator(&e.alternatives, params);
    }
    Ok(lp)
}

/// Weighted log-likelihood over non-NA rows.
pub fn log_likelihood<T: Scalar>(table: &RankingsTable<T>, params: &Parameters<T>) -> Result<T> {
    let events = choice_events(table, params.max_order())?;
    Ok(evaluate(&events, params, false).log_likelihood)
}

/// Observed sufficient statistics of a set of events.
pub fn observed_stats<T: Scalar>(events: &[ChoiceEvent<T>], n_items: usize, max_order: usize) -> SufficientStats<T> {
    let mut s = SufficientStats::zeros(n_items, max_order);
    for e in events {
        let k = e.chosen.len();
        let share = e.weight / T::from_usize_lossy(k);
        for &i in &e.chosen {
            s.item[i] += share;
        }
        if k >= 2 {
            s.tie[k - 2] += e.weight;
        }
    }
    s
}

pub fn observed_sufficient_stats<T: Scalar>(table: &RankingsTable<T>, max_order: usize) -> Result<SufficientStats<T>> {
    let events = choice_events(table, max_order)?;
    Ok(observed_stats(&events, table.n_items(), max_order))
}

pub fn expected_sufficient_stats<T: Scalar>(table: &RankingsTable<T>, params: &Parameters<T>) -> Result<SufficientStats<T>> {
    let events = choice_events(table, params.max_order())?;
    Ok(evaluate(&events, params, false).expected)
}

/// Log-likelihood, expected sufficient statistics and (optionally) the
/// observed information in the `(log alpha, log delta)` parameterization.
#[derive(Debug, Clone)]
pub struct Evaluation<T> {
    pub log_likelihood: T,
    pub expected: SufficientStats<T>,
    /// Order: items, then tie orders `2..=D`.
    pub information: Option<Matrix<T>>,
}

struct Partial<T> {
    ll: T,
    stats: SufficientStats<T>,
    info: Option<Matrix<T>>,
}

pub fn evaluate<T: Scalar>(events: &[ChoiceEvent<T>], params: &Parameters<T>, with_information: bool) -> Evaluation<T> {
    let n_items = params.n_items();
    let d = params.max_order();
    let dim = n_items + d - 1;
    let partials: Vec<Partial<T>> = events
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut p = Partial {
                ll: T::zero(),
                stats: SufficientStats::zeros(n_items, d),
                info: with_information.then(|| Matrix::zeros(dim, dim)),
            };
            let mut scratch = EventScratch::default();
            for e in chunk {
                event_terms(e, params, &mut p, &mut scratch);
            }
            p
        })
        .collect();
    let mut total = Partial {
        ll: T::zero(),
        stats: SufficientStats::zeros(n_items, d),
        info: with_information.then(|| Matrix::zeros(dim, dim)),
    };
    for p in partials {
        total.ll += p.ll;
        total.stats.add_assign(&p.stats);
        if let (Some(acc), Some(m)) = (total.info.as_mut(), p.info.as_ref()) {
            for i in 0..dim {
                for j in 0..dim {
                    acc[(i, j)] += m[(i, j)];
                }
            }
        }
    }
    Evaluation {
        log_likelihood: total.ll,
        expected: total.stats,
        information: total.info,
    }
}

#[derive(Default)]
struct EventScratch<T> {
    item: Vec<T>,
    tie: Vec<T>,
    pair: Vec<T>,
    item_tie: Vec<T>,
}

fn event_terms<T: Scalar>(e: &ChoiceEvent<T>, params: &Parameters<T>, out: &mut Partial<T>, s: &mut EventScratch<T>) {
    let a = &e.alternatives;
    let n = a.len();
    let sc = EventScale::new(a, params);
    let want_info = out.info.is_some();
    s.item.clear();
    s.item.resize(n, T::zero());
    s.tie.clear();
    s.tie.resize(sc.kmax, T::zero());
    if want_info {
        s.pair.clear();
        s.pair.resize(n * n, T::zero());
        s.item_tie.clear();
        s.item_tie.resize(n * sc.kmax, T::zero());
    }
    let mut total = T::zero();
    for k in 1..=sc.kmax {
        let dk = sc.delta[k - 1];
        if dk == T::zero() {
            continue;
        }
        let inv_k = T::one() / T::from_usize_lossy(k);
        let p = &sc.pow[k - 1];
        let mut tie_k = T::zero();
        for_each_combination(n, k, |set| {
            let v = dk * set.iter().fold(T::one(), |acc, &m| acc * p[m]);
            tie_k += v;
            let share = v * inv_k;
            for &m in set {
                s.item[m] += share;
            }
            if want_info {
                let share2 = share * inv_k;
                for &m in set {
                    for &l in set {
                        s.pair[m * n + l] += share2;
                    }
                    s.item_tie[m * sc.kmax + (k - 1)] += share;
                }
            }
        });
        s.tie[k - 1] = tie_k;
        total += tie_k;
    }
    let w = e.weight;
    let log_denom = sc.shift + total.ln();
    let inv = T::one() / total;
    let k_chosen = e.chosen.len();
    let mean_chosen = e.chosen.iter().map(|&i| params.log_worth[i]).sum::<T>() / T::from_usize_lossy(k_chosen);
    out.ll += w * (params.log_delta(k_chosen) + mean_chosen - log_denom);

    for (m, &i) in a.iter().enumerate() {
        out.stats.item[i] += w * s.item[m] * inv;
    }
    for k in 2..=sc.kmax {
        out.stats.tie[k - 2] += w * s.tie[k - 1] * inv;
    }

    if let Some(info) = out.info.as_mut() {
        let ni = params.n_items();
        // E[x x'] - E[x] E[x]' with x = (items, tie indicators)
        let ex_item: Vec<T> = s.item.iter().map(|&v| v * inv).collect();
        let ex_tie: Vec<T> = s.tie.iter().map(|&v| v * inv).collect();
        for (m, &i) in a.iter().enumerate() {
            for (l, &j) in a.iter().enumerate() {
                info[(i, j)] += w * (s.pair[m * n + l] * inv - ex_item[m] * ex_item[l]);
            }
            for k in 2..=sc.kmax {
                let c = w * (s.item_tie[m * sc.kmax + (k - 1)] * inv - ex_item[m] * ex_tie[k - 1]);
                info[(i, ni + k - 2)] += c;
                info[(ni + k - 2, i)] += c;
            }
        }
        for k in 2..=sc.kmax {
            for l in 2..=sc.kmax {
                let second = if k == l { ex_tie[k - 1] } else { T::zero() };
                info[(ni + k - 2, ni + l - 2)] += w * (second - ex_tie[k - 1] * ex_tie[l - 1]);
            }
        }
    }
}

/// Weighted gradient contribution of one event: observed minus expected
/// sufficient statistics.
pub fn event_gradient<T: Scalar>(e: &ChoiceEvent<T>, params: &Parameters<T>) -> SufficientStats<T> {
    let mut p = Partial {
        ll: T::zero(),
        stats: SufficientStats::zeros(params.n_items(), params.max_order()),
        info: None,
    };
    event_terms(e, params, &mut p, &mut EventScratch::default());
    let mut g = p.stats;
    g.item.iter_mut().for_each(|v| *v = -*v);
    g.tie.iter_mut().for_each(|v| *v = -*v);
    let k = e.chosen.len();
    let share = e.weight / T::from_usize_lossy(k);
    for &i in &e.chosen {
        g.item[i] += share;
    }
    if k >= 2 {
        g.tie[k - 2] += e.weight;
    }
    g
}

/// Every complete ranking with ties of `n_items` items whose tie groups
/// have at most `max_order` members (ordered set partitions), as rank rows.
pub fn enumerate_tied_rankings(n_items: usize, max_order: usize) -> Result<Vec<Vec<u32>>> {
    if n_items > 6 {
        return Err(Error::EnumerationTooLarge(n_items));
    }
    let mut out = Vec::new();
    let mut row = vec![0u32; n_items];
    fill_levels(&mut row, 1, max_order.max(1), &mut out);
    Ok(out)
}

fn fill_levels(row: &mut [u32], level: u32, max_order: usize, out: &mut Vec<Vec<u32>>) {
    let free: Vec<usize> = (0..row.len()).filter(|&i| row[i] == 0).collect();
    if free.is_empty() {
        out.push(row.to_vec());
        return;
    }
    for k in 1..=max_order.min(free.len()) {
        for_each_combination(free.len(), k, |set| {
            for &m in set {
                row[free[m]] = level;
            }
            fill_levels(row, level + 1, max_order, out);
            for &m in set {
                row[free[m]] = 0;
            }
        });
    }
}
