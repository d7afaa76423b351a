//! Plackett-Luce trees: recursive partitioning of grouped rankings by
//! covariates.
//!
//! At each node a model is fitted to the node's groups, per-group score
//! contributions are tested for instability along each covariate, and the
//! most unstable covariate (after Bonferroni adjustment) is split at the
//! cutpoint that maximises the summed log-likelihood of the two children.

use std::collections::HashMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::fit::{fit, FitConfig, ModelFit};
use crate::likelihood::{choice_events, event_gradient};
use crate::linalg::Matrix;
use crate::rankings::GroupedRankings;
use crate::scalar::Scalar;

/// Largest number of categories searched exhaustively for a split.
pub const MAX_CATEGORIES: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Covariate {
    Numeric(Vec<f64>),
    Categorical {
        levels: Vec<String>,
        codes: Vec<usize>,
        ordered: bool,
    },
}

impl Covariate {
    fn len(&self) -> usize {
        match self {
            Covariate::Numeric(v) => v.len(),
            Covariate::Categorical { codes, .. } => codes.len(),
        }
    }
}

/// One row of covariate values per group.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CovariateFrame {
    names: Vec<String>,
    columns: Vec<Covariate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CovariateValue {
    Numeric(f64),
    Category(String),
}

impl CovariateFrame {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.columns.first().map_or(0, Covariate::len)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> &[Covariate] {
        &self.columns
    }

    fn check_new(&self, name: &str, len: usize) -> Result<()> {
        if self.names.iter().any(|n| n == name) {
            return Err(Error::Covariate(format!("duplicate covariate `{name}`")));
        }
        if !self.columns.is_empty() && len != self.n_rows() {
            return Err(Error::Covariate(format!(
                "covariate `{name}` has {len} values, expected {}",
                self.n_rows()
            )));
        }
        Ok(())
    }

    pub fn push_numeric(&mut self, name: &str, values: Vec<f64>) -> Result<()> {
        self.check_new(name, values.len())?;
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Covariate(format!("covariate `{name}` has non-finite value {v}")));
        }
        self.names.push(name.to_string());
        self.columns.push(Covariate::Numeric(values));
        Ok(())
    }

    /// Adds a categorical covariate. `levels` fixes the level order (needed
    /// for ordered factors); by default levels are sorted.
    pub fn push_categorical(&mut self, name: &str, values: Vec<String>, ordered: bool, levels: Option<Vec<String>>) -> Result<()> {
        self.check_new(name, values.len())?;
        let levels = levels.unwrap_or_else(|| {
            let mut l = values.clone();
            l.sort();
            l.dedup();
            l
        });
        let codes = values
            .iter()
            .map(|v| {
                levels.iter().position(|l| l == v).ok_or_else(|| Error::UnseenCategory {
                    covariate: name.to_string(),
                    value: v.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        self.names.push(name.to_string());
        self.columns.push(Covariate::Categorical { levels, codes, ordered });
        Ok(())
    }

    pub fn value(&self, covariate: usize, row: usize) -> CovariateValue {
        match &self.columns[covariate] {
            Covariate::Numeric(v) => CovariateValue::Numeric(v[row]),
            Covariate::Categorical { levels, codes, .. } => CovariateValue::Category(levels[codes[row]].clone()),
        }
    }
}

/// Per-group score contributions (observed minus expected sufficient
/// statistics) in the contrast parameterisation: items `2..=J`, then the
/// estimated tie orders. Pseudo-rankings and the ghost item are left out.
pub fn score_contributions<T: Scalar>(grouped: &GroupedRankings<T>, model: &ModelFit<T>) -> Result<Matrix<T>> {
    let table = grouped.rankings();
    let j = model.n_items();
    let ties = model.active_tie_orders();
    let p = j - 1 + ties.len();
    let mut out = Matrix::zeros(grouped.n_groups(), p);
    let events = choice_events(table, model.max_order())?;
    let group = grouped.group_of();
    for e in &events {
        let g = event_gradient(e, model.params());
        let row = group[e.row];
        for i in 1..j {
            out[(row, i - 1)] += g.item[i];
        }
        for (m, &n) in ties.iter().enumerate() {
            out[(row, j - 1 + m)] += g.tie[n - 2];
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstabilityTest {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Approximate p value of the supLM statistic for `k` parameters with
/// trimming interval `[pi1, pi2]`: the tail of the supremum of a normalized
/// squared Bessel process, combined with the pointwise chi-squared tail.
pub fn sup_lm_p_value(x: f64, k: usize, pi1: f64, pi2: f64) -> f64 {
    if !(x > 0.0) {
        return 1.0;
    }
    let kf = k as f64;
    let chi = ChiSquared::new(kf).map(|c| c.sf(x)).unwrap_or(1.0);
    let lambda = (pi2 * (1.0 - pi1)) / (pi1 * (1.0 - pi2));
    let log_density = (kf / 2.0) * x.ln() - x / 2.0 - (kf / 2.0) * std::f64::consts::LN_2 - ln_gamma(kf / 2.0);
    let approx = log_density.exp() * ((1.0 - kf / x) * lambda.ln() + 2.0 / x);
    approx.max(chi).clamp(0.0, 1.0)
}

fn centered_f64<T: Scalar>(scores: &Matrix<T>) -> Vec<Vec<f64>> {
    let (n, p) = (scores.nrows(), scores.ncols());
    let mut rows: Vec<Vec<f64>> = (0..n)
        .map(|g| (0..p).map(|c| scores[(g, c)].to_f64_lossy()).collect())
        .collect();
    for c in 0..p {
        let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n.max(1) as f64;
        rows.iter_mut().for_each(|r| r[c] -= mean);
    }
    rows
}

/// Inverse of the score covariance `(1/n) sum s s'` (pseudo-inverse when
/// singular) and its rank.
fn score_metric(rows: &[Vec<f64>]) -> (Matrix<f64>, usize) {
    let n = rows.len() as f64;
    let p = rows.first().map_or(0, Vec::len);
    let mut j = Matrix::zeros(p, p);
    for r in rows {
        for a in 0..p {
            for b in 0..p {
                j[(a, b)] += r[a] * r[b] / n;
            }
        }
    }
    j.psd_pseudo_inverse(1e-10)
}

/// Score-based test for parameter instability along `covariate`.
///
/// Numeric covariates use the supLM statistic over breakpoints between
/// distinct values with a share of at least `trim` of the groups on each
/// side. Categorical covariates use `sum_l S_l' J^-1 S_l / n_l`, which is
/// chi-squared with `(L - 1) k` degrees of freedom.
pub fn instability_test<T: Scalar>(scores: &Matrix<T>, covariate: &Covariate, rows: &[usize], trim: f64) -> InstabilityTest {
    let null = InstabilityTest {
        statistic: 0.0,
        df: 0,
        p_value: 1.0,
    };
    let s = centered_f64(scores);
    let n = s.len();
    if n < 2 {
        return null;
    }
    let (jinv, k) = score_metric(&s);
    if k == 0 {
        return null;
    }
    let quad = |v: &[f64]| jinv.quadratic_form(v);
    match covariate {
        Covariate::Numeric(values) => {
            let x: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(a.cmp(&b)));
            let lo = ((trim * n as f64).ceil() as usize).max(1);
            let hi = ((1.0 - trim) * n as f64).floor() as usize;
            let p = s[0].len();
            let mut cum = vec![0.0; p];
            let mut best: Option<f64> = None;
            for (m, &g) in order.iter().enumerate().take(n - 1) {
                for c in 0..p {
                    cum[c] += s[g][c];
                }
                let size = m + 1;
                if size < lo || size > hi || x[g] == x[order[m + 1]] {
                    continue;
                }
                let t = size as f64 / n as f64;
                let lm = quad(&cum) / (n as f64 * t * (1.0 - t));
                best = Some(best.map_or(lm, |b: f64| b.max(lm)));
            }
            match best {
                Some(stat) => InstabilityTest {
                    statistic: stat,
                    df: k,
                    p_value: sup_lm_p_value(stat, k, trim, 1.0 - trim),
                },
                None => null,
            }
        }
        Covariate::Categorical { levels, codes, .. } => {
            let p = s[0].len();
            let mut sums = vec![vec![0.0; p]; levels.len()];
            let mut counts = vec![0usize; levels.len()];
            for (g, &r) in rows.iter().enumerate() {
                let l = codes[r];
                counts[l] += 1;
                for c in 0..p {
                    sums[l][c] += s[g][c];
                }
            }
            let present = counts.iter().filter(|&&c| c > 0).count();
            if present < 2 {
                return null;
            }
            let stat: f64 = sums
                .iter()
                .zip(&counts)
                .filter(|(_, &c)| c > 0)
                .map(|(v, &c)| quad(v) / c as f64)
                .sum();
            let df = (present - 1) * k;
            let p_value = ChiSquared::new(df as f64).map(|d| d.sf(stat)).unwrap_or(1.0);
            InstabilityTest {
                statistic: stat,
                df,
                p_value,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitRule {
    /// Left child takes `x <= cutpoint`.
    Numeric { covariate: String, cutpoint: f64 },
    /// Left child takes the listed levels.
    Categorical {
        covariate: String,
        left: Vec<String>,
        right: Vec<String>,
    },
}

impl SplitRule {
    pub fn covariate(&self) -> &str {
        match self {
            SplitRule::Numeric { covariate, .. } | SplitRule::Categorical { covariate, .. } => covariate,
        }
    }

    /// `Ok(true)` when the value goes to the left child.
    pub fn goes_left(&self, value: &CovariateValue) -> Result<bool> {
        match (self, value) {
            (SplitRule::Numeric { cutpoint, .. }, CovariateValue::Numeric(x)) => Ok(x <= cutpoint),
            (SplitRule::Categorical { covariate, left, right }, CovariateValue::Category(c)) => {
                if left.contains(c) {
                    Ok(true)
                } else if right.contains(c) {
                    Ok(false)
                } else {
                    Err(Error::UnseenCategory {
                        covariate: covariate.clone(),
                        value: c.clone(),
                    })
                }
            }
            _ => Err(Error::Covariate(format!("wrong value type for covariate `{}`", self.covariate()))),
        }
    }

    fn describe(&self, left: bool) -> String {
        match self {
            SplitRule::Numeric { covariate, cutpoint } => {
                format!("{covariate} {} {}", if left { "<=" } else { ">" }, format_cut(*cutpoint))
            }
            SplitRule::Categorical { covariate, left: l, right: r } => {
                let side = if left { l } else { r };
                format!("{covariate} in {}", side.join(", "))
            }
        }
    }
}

fn format_cut(x: f64) -> String {
    let s = format!("{x:.6}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Candidate partitions of the node's groups along one covariate.
fn candidate_splits(name: &str, covariate: &Covariate, rows: &[usize]) -> Result<Vec<(SplitRule, Vec<bool>)>> {
    let mut out = Vec::new();
    match covariate {
        Covariate::Numeric(values) => {
            let mut u: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
            u.sort_by(f64::total_cmp);
            u.dedup();
            for w in u.windows(2) {
                let cut = (w[0] + w[1]) / 2.0;
                let mask = rows.iter().map(|&r| values[r] <= cut).collect();
                out.push((
                    SplitRule::Numeric {
                        covariate: name.to_string(),
                        cutpoint: cut,
                    },
                    mask,
                ));
            }
        }
        Covariate::Categorical { levels, codes, ordered } => {
            let mut present: Vec<usize> = rows.iter().map(|&r| codes[r]).collect();
            present.sort_unstable();
            present.dedup();
            let l = present.len();
            if l > MAX_CATEGORIES {
                return Err(Error::Covariate(format!(
                    "covariate `{name}` has {l} categories; at most {MAX_CATEGORIES} can be searched, merge levels or use a numeric coding"
                )));
            }
            let subsets: Vec<Vec<bool>> = if *ordered {
                (1..l).map(|m| (0..l).map(|i| i < m).collect()).collect()
            } else {
                // the first level always goes left
                (0..(1u32 << (l.saturating_sub(1))) - 1)
                    .map(|bits| (0..l).map(|i| i == 0 || (bits >> (i - 1)) & 1 == 1).collect())
                    .collect()
            };
            for side in subsets {
                let left: Vec<String> = present.iter().zip(&side).filter(|(_, &s)| s).map(|(&c, _)| levels[c].clone()).collect();
                let right: Vec<String> = present.iter().zip(&side).filter(|(_, &s)| !s).map(|(&c, _)| levels[c].clone()).collect();
                let mask = rows
                    .iter()
                    .map(|&r| side[present.iter().position(|&c| c == codes[r]).unwrap()])
                    .collect();
                out.push((
                    SplitRule::Categorical {
                        covariate: name.to_string(),
                        left,
                        right,
                    },
                    mask,
                ));
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitChoice {
    pub rule: SplitRule,
    /// Summed log-likelihood of the two child models.
    pub log_likelihood: f64,
    pub left: Vec<usize>,
    pub right: Vec<usize>,
}

/// Exhaustive search over the admissible splits of `groups` (zero-based
/// group ids) along covariate `cov`. Children are refitted in parallel,
/// warm-started from `start`; the winner is the first candidate with the
/// largest summed child log-likelihood.
pub fn best_split<T: Scalar>(
    grouped: &GroupedRankings<T>,
    covariates: &CovariateFrame,
    cov: usize,
    groups: &[usize],
    minsize: usize,
    fit_config: &FitConfig<T>,
) -> Result<Option<SplitChoice>> {
    let candidates = candidate_splits(&covariates.names[cov], &covariates.columns[cov], groups)?;
    let scored: Vec<Option<(f64, Vec<usize>, Vec<usize>)>> = candidates
        .par_iter()
        .map(|(_, mask)| {
            let left: Vec<usize> = groups.iter().zip(mask).filter(|(_, &m)| m).map(|(&g, _)| g).collect();
            let right: Vec<usize> = groups.iter().zip(mask).filter(|(_, &m)| !m).map(|(&g, _)| g).collect();
            if left.len() < minsize.max(1) || right.len() < minsize.max(1) {
                return None;
            }
            let l = fit(grouped.subset_groups(&left).rankings(), fit_config).ok()?;
            let r = fit(grouped.subset_groups(&right).rankings(), fit_config).ok()?;
            let ll = (l.log_likelihood() + r.log_likelihood()).to_f64_lossy();
            ll.is_finite().then_some((ll, left, right))
        })
        .collect();
    let mut best: Option<SplitChoice> = None;
    for ((rule, _), s) in candidates.into_iter().zip(scored) {
        if let Some((ll, left, right)) = s {
            if best.as_ref().is_none_or(|b| ll > b.log_likelihood) {
                best = Some(SplitChoice {
                    rule,
                    log_likelihood: ll,
                    left,
                    right,
                });
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeConfig<T> {
    /// Minimum number of groups per node; `None` uses 5% of the groups.
    pub minsize: Option<usize>,
    /// Maximum depth, the root having depth 1.
    pub maxdepth: usize,
    pub alpha: f64,
    /// Trimming share for the numeric instability test.
    pub trim: f64,
    pub fit: FitConfig<T>,
}

impl<T: Scalar> Default for TreeConfig<T> {
    fn default() -> Self {
        Self {
            minsize: None,
            maxdepth: usize::MAX,
            alpha: 0.05,
            trim: 0.1,
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeTest {
    pub covariate: String,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub p_adjusted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TreeNode<T: Scalar> {
    /// One-based id in pre-order.
    pub id: usize,
    pub depth: usize,
    /// Zero-based ids of the groups in the node.
    pub groups: Vec<usize>,
    /// Instability test of the covariate with the smallest adjusted p value.
    pub test: Option<NodeTest>,
    pub split: Option<SplitRule>,
    /// Ids of the left and right children.
    pub children: Option<(usize, usize)>,
    /// Log-likelihood of the node model (data only).
    pub log_likelihood: T,
    /// Model of a terminal node.
    pub fit: Option<ModelFit<T>>,
}

impl<T: Scalar> TreeNode<T> {
    pub fn n(&self) -> usize {
        self.groups.len()
    }

    pub fn is_leaf(&self) -> bool {
        self.children.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct PLTree<T: Scalar> {
    pub nodes: Vec<TreeNode<T>>,
    pub covariates: Vec<String>,
    pub minsize: usize,
    pub maxdepth: usize,
    pub alpha: f64,
    pub n_groups: usize,
}

struct Grower<'a, T: Scalar> {
    grouped: &'a GroupedRankings<T>,
    covariates: &'a CovariateFrame,
    config: &'a TreeConfig<T>,
    minsize: usize,
    nodes: Vec<TreeNode<T>>,
}

impl<T: Scalar> Grower<'_, T> {
    fn node_fit(&self, groups: &[usize], start: Option<&ModelFit<T>>) -> Result<ModelFit<T>> {
        let mut cfg = self.config.fit.clone();
        if let Some(s) = start {
            cfg.start = Some(s.params().clone());
        }
        fit(self.grouped.subset_groups(groups).rankings(), &cfg)
    }

    fn grow(&mut self, groups: Vec<usize>, depth: usize, parent: Option<&ModelFit<T>>) -> Result<usize> {
        let model = self.node_fit(&groups, parent)?;
        let id = self.nodes.len() + 1;
        self.nodes.push(TreeNode {
            id,
            depth,
            groups: groups.clone(),
            test: None,
            split: None,
            children: None,
            log_likelihood: model.log_likelihood(),
            fit: None,
        });
        let slot = id - 1;

        let can_split = depth < self.config.maxdepth && groups.len() >= 2 * self.minsize.max(1) && self.config.alpha > 0.0;
        let mut chosen = None;
        if can_split && !self.covariates.columns.is_empty() {
            let sub = self.grouped.subset_groups(&groups);
            let scores = score_contributions(&sub, &model)?;
            let m = self.covariates.columns.len() as f64;
            let tests: Vec<NodeTest> = self
                .covariates
                .columns
                .iter()
                .enumerate()
                .map(|(c, col)| {
                    let t = instability_test(&scores, col, &groups, self.config.trim);
                    NodeTest {
                        covariate: self.covariates.names[c].clone(),
                        statistic: t.statistic,
                        df: t.df,
                        p_value: t.p_value,
                        p_adjusted: 1.0 - (1.0 - t.p_value).powf(m),
                    }
                })
                .collect();
            let best = (0..tests.len())
                .min_by(|&a, &b| tests[a].p_adjusted.total_cmp(&tests[b].p_adjusted).then(a.cmp(&b)))
                .expect("at least one covariate");
            self.nodes[slot].test = Some(tests[best].clone());
            if tests[best].p_adjusted < self.config.alpha {
                let mut cfg = self.config.fit.clone();
                cfg.start = Some(model.params().clone());
                cfg.max_tie_order = Some(model.max_order());
                chosen = best_split(self.grouped, self.covariates, best, &groups, self.minsize, &cfg)?;
            }
        }

        match chosen {
            Some(split) => {
                let left = self.grow(split.left, depth + 1, Some(&model))?;
                let right = self.grow(split.right, depth + 1, Some(&model))?;
                self.nodes[slot].split = Some(split.rule);
                self.nodes[slot].children = Some((left, right));
            }
            None => self.nodes[slot].fit = Some(model),
        }
        Ok(id)
    }
}

/// Grows a Plackett-Luce tree over the groups of `grouped`.
pub fn grow_tree<T: Scalar>(grouped: &GroupedRankings<T>, covariates: &CovariateFrame, config: &TreeConfig<T>) -> Result<PLTree<T>> {
    let g = grouped.n_groups();
    if !covariates.columns.is_empty() && covariates.n_rows() != g {
        return Err(Error::Covariate(format!(
            "covariates have {} rows but there are {g} groups",
            covariates.n_rows()
        )));
    }
    if config.maxdepth == 0 {
        return Err(Error::Config("maxdepth must be at least 1".into()));
    }
    let minsize = config.minsize.unwrap_or_else(|| ((g as f64) * 0.05).ceil() as usize).max(1);
    let mut grower = Grower {
        grouped,
        covariates,
        config,
        minsize,
        nodes: Vec::new(),
    };
    grower.grow((0..g).collect(), 1, None)?;
    // children were pushed after their parent, so pre-order ids hold
    Ok(PLTree {
        nodes: grower.nodes,
        covariates: covariates.names.clone(),
        minsize,
        maxdepth: config.maxdepth,
        alpha: config.alpha,
        n_groups: g,
    })
}

impl<T: Scalar> PLTree<T> {
    pub fn node(&self, id: usize) -> &TreeNode<T> {
        &self.nodes[id - 1]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &TreeNode<T>> {
        self.nodes.iter().filter(|n| n.is_leaf())
    }

    pub fn leaf_sizes(&self) -> Vec<usize> {
        self.leaves().map(TreeNode::n).collect()
    }

    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    /// Sum of the leaf log-likelihoods.
    pub fn log_likelihood(&self) -> T {
        self.leaves().map(|n| n.log_likelihood).sum()
    }

    /// Routes a covariate row (by name) to its leaf.
    pub fn predict_node(&self, row: &HashMap<String, CovariateValue>) -> Result<&TreeNode<T>> {
        let mut node = self.node(1);
        while let (Some(rule), Some((l, r))) = (&node.split, node.children) {
            let value = row
                .get(rule.covariate())
                .ok_or_else(|| Error::Covariate(format!("missing covariate `{}`", rule.covariate())))?;
            node = self.node(if rule.goes_left(value)? { l } else { r });
        }
        Ok(node)
    }

    /// Leaf of training group `g` of `frame`.
    pub fn predict_group(&self, frame: &CovariateFrame, g: usize) -> Result<&TreeNode<T>> {
        let row = frame
            .names
            .iter()
            .enumerate()
            .map(|(c, name)| (name.clone(), frame.value(c, g)))
            .collect();
        self.predict_node(&row)
    }

    fn write_node(&self, f: &mut fmt::Formatter<'_>, id: usize, prefix: &str, label: &str) -> fmt::Result {
        let node = self.node(id);
        match (&node.split, node.children) {
            (Some(rule), Some((l, r))) => {
                writeln!(f, "{prefix}[{id}] {label}")?;
                let inner = format!("{prefix}|   ");
                self.write_node(f, l, &inner, &rule.describe(true))?;
                self.write_node(f, r, &inner, &rule.describe(false))
            }
            _ => {
                writeln!(f, "{prefix}[{id}] {label}: n = {}", node.n())?;
                if let Some(model) = &node.fit {
                    let parts: Vec<String> = model
                        .items()
                        .iter()
                        .zip(model.worth())
                        .map(|(i, w)| format!("{i} {:.4}", w.to_f64_lossy()))
                        .collect();
                    writeln!(f, "{prefix}    {}", parts.join(", "))?;
                }
                Ok(())
            }
        }
    }
}

impl<T: Scalar> fmt::Display for PLTree<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Plackett-Luce tree")?;
        self.write_node(f, 1, "", "root")?;
        write!(
            f,
            "Number of inner nodes: {}\nNumber of terminal nodes: {}",
            self.nodes.len() - self.leaves().count(),
            self.leaves().count()
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rankings::{group_rankings, RankingsTable};
    use crate::simulate::{sample_rankings, SamplerConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("i{}", i + 1)).collect()
    }

    #[test]
    fn p_value_approximation() {
        // 5% critical value for one parameter with 15% trimming
        let p = sup_lm_p_value(8.85, 1, 0.15, 0.85);
        assert!((p - 0.05).abs() < 0.01, "{p}");
        assert_eq!(sup_lm_p_value(0.0, 2, 0.1, 0.9), 1.0);
        assert!(sup_lm_p_value(100.0, 2, 0.1, 0.9) < 1e-15);
    }

    #[test]
    fn constant_covariate_has_unit_p() {
        let scores = Matrix::from_rows(&[vec![1.0], vec![-1.0], vec![0.5], vec![-0.5]]);
        let rows = [0, 1, 2, 3];
        let t = instability_test(&scores, &Covariate::Numeric(vec![1.0; 4]), &rows, 0.1);
        assert_eq!(t.p_value, 1.0);
        let cat = Covariate::Categorical {
            levels: vec!["a".into()],
            codes: vec![0; 4],
            ordered: false,
        };
        assert_eq!(instability_test(&scores, &cat, &rows, 0.1).p_value, 1.0);
    }

    fn two_regime(seed: u64, n_groups: usize) -> (GroupedRankings<f64>, CovariateFrame) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = [2.0, 1.0, 0.0, -1.0];
        let b = [-1.0, 0.0, 1.0, 2.0];
        let mut rows = Vec::new();
        let mut index = Vec::new();
        let mut x = Vec::new();
        for g in 0..n_groups {
            let xv: f64 = rng.random();
            x.push(xv);
            let lw = if xv <= 0.5 { &a } else { &b };
            let cfg = SamplerConfig::<f64>::plackett_luce(lw.to_vec());
            for r in sample_rankings(&cfg, 3, &mut rng) {
                rows.push(r);
                index.push(g + 1);
            }
        }
        let t = RankingsTable::from_code_rows(rows.clone(), names(4), vec![1.0; rows.len()]).unwrap();
        let grouped = group_rankings(t, &index).unwrap();
        let mut frame = CovariateFrame::new();
        frame.push_numeric("x", x).unwrap();
        (grouped, frame)
    }

    #[test]
    fn planted_split_is_found() {
        let (grouped, frame) = two_regime(7, 120);
        let cfg = TreeConfig {
            maxdepth: 2,
            ..TreeConfig::default()
        };
        let tree = grow_tree(&grouped, &frame, &cfg).unwrap();
        let root = tree.node(1);
        let Some(SplitRule::Numeric { cutpoint, .. }) = &root.split else {
            panic!("root did not split:\n{tree}");
        };
        let Covariate::Numeric(x) = &frame.columns()[0] else { unreachable!() };
        let below = x.iter().copied().filter(|&v| v <= 0.5).fold(f64::MIN, f64::max);
        let above = x.iter().copied().filter(|&v| v > 0.5).fold(f64::MAX, f64::min);
        assert!(*cutpoint > below && *cutpoint < above, "{cutpoint}");
        // leaves partition the groups and routing agrees
        let mut all: Vec<usize> = tree.leaves().flat_map(|n| n.groups.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..120).collect::<Vec<_>>());
        for leaf in tree.leaves() {
            for &g in &leaf.groups {
                assert_eq!(tree.predict_group(&frame, g).unwrap().id, leaf.id);
            }
        }
        assert!(tree.log_likelihood() >= tree.node(1).log_likelihood - 1e-8);
    }

    #[test]
    fn alpha_zero_gives_pooled_leaf() {
        let (grouped, frame) = two_regime(3, 40);
        let cfg = TreeConfig {
            alpha: 0.0,
            ..TreeConfig::default()
        };
        let tree = grow_tree(&grouped, &frame, &cfg).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        let pooled = fit(grouped.rankings(), &FitConfig::default()).unwrap();
        assert_eq!(tree.node(1).fit.as_ref().unwrap().params(), pooled.params());
        let row = HashMap::from([("x".to_string(), CovariateValue::Numeric(0.3))]);
        assert_eq!(tree.predict_node(&row).unwrap().id, 1);
    }

    #[test]
    fn scores_sum_to_zero_at_mle() {
        let (grouped, _) = two_regime(11, 30);
        let model = fit(grouped.rankings(), &FitConfig { npseudo: 0.0, tol: 1e-10, ..FitConfig::default() }).unwrap();
        let s = score_contributions(&grouped, &model).unwrap();
        for c in 0..s.ncols() {
            let total: f64 = (0..s.nrows()).map(|g| s[(g, c)]).sum();
            assert!(total.abs() < 1e-6);
        }
    }

    #[test]
    fn categorical_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let levels = ["a", "b", "c"];
        let mut rows = Vec::new();
        let mut index = Vec::new();
        let mut cat = Vec::new();
        for g in 0..90 {
            let l = levels[g % 3];
            cat.push(l.to_string());
            let lw = if l == "b" { vec![-1.5, 0.0, 1.5] } else { vec![1.5, 0.0, -1.5] };
            for r in sample_rankings(&SamplerConfig::plackett_luce(lw), 3, &mut rng) {
                rows.push(r);
                index.push(g + 1);
            }
        }
        let t: RankingsTable<f64> = RankingsTable::from_code_rows(rows.clone(), names(3), vec![1.0; rows.len()]).unwrap();
        let grouped = group_rankings(t, &index).unwrap();
        let mut frame = CovariateFrame::new();
        frame.push_categorical("season", cat.clone(), false, None).unwrap();
        let tree = grow_tree(&grouped, &frame, &TreeConfig { maxdepth: 2, ..TreeConfig::default() }).unwrap();
        match &tree.node(1).split {
            Some(SplitRule::Categorical { left, right, .. }) => {
                assert_eq!(left, &vec!["a".to_string(), "c".to_string()]);
                assert_eq!(right, &vec!["b".to_string()]);
            }
            other => panic!("unexpected split {other:?}"),
        }
        let unseen = HashMap::from([("season".to_string(), CovariateValue::Category("z".into()))]);
        assert!(matches!(tree.predict_node(&unseen), Err(Error::UnseenCategory { .. })));
        // ordered: only contiguous splits
        let mut ordered = CovariateFrame::new();
        ordered.push_categorical("season", cat, true, None).unwrap();
        let cands = candidate_splits("season", &ordered.columns()[0], &(0..90).collect::<Vec<_>>()).unwrap();
        assert_eq!(cands.len(), 2);
    }

    #[test]
    fn too_many_categories_rejected() {
        let values: Vec<String> = (0..13).map(|i| format!("l{i}")).collect();
        let mut frame = CovariateFrame::new();
        frame.push_categorical("c", values, false, None).unwrap();
        assert!(candidate_splits("c", &frame.columns()[0], &(0..13).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn numeric_cutpoints_are_midpoints() {
        let cov = Covariate::Numeric(vec![3.0, 1.0, 2.0, 2.0]);
        let c = candidate_splits("x", &cov, &[0, 1, 2, 3]).unwrap();
        let cuts: Vec<f64> = c
            .iter()
            .map(|(r, _)| match r {
                SplitRule::Numeric { cutpoint, .. } => *cutpoint,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(cuts, vec![1.5, 2.5]);
    }

    #[test]
    fn minsize_and_depth_respected() {
        let (grouped, frame) = two_regime(21, 60);
        let tree = grow_tree(
            &grouped,
            &frame,
            &TreeConfig {
                minsize: Some(25),
                maxdepth: 3,
                ..TreeConfig::default()
            },
        )
        .unwrap();
        assert!(tree.leaf_sizes().iter().all(|&n| n >= 25));
        assert!(tree.depth() <= 3);
    }
}
