//! Maximum likelihood fitting.
//!
//! The default method is iterative scaling (an MM algorithm) with Steffensen
//! extrapolation once the iterates are close to the solution. BFGS and
//! L-BFGS on the unconstrained log parameters are also available.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{choice_events, evaluate, observed_stats, ChoiceEvent, Evaluation, Parameters, SufficientStats};
use crate::linalg::Matrix;
use crate::network::{adjacency, augment_with_pseudo_rankings, connectivity};
use crate::rankings::RankingsTable;
use crate::scalar::Scalar;

/// Tie orders above this need [`FitConfig::allow_high_tie_order`].
pub const MAX_DEFAULT_TIE_ORDER: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    IterativeScaling,
    Bfgs,
    LBfgs,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::IterativeScaling => "iterative-scaling",
            Method::Bfgs => "bfgs",
            Method::LBfgs => "l-bfgs",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "iterative-scaling" | "is" => Ok(Method::IterativeScaling),
            "bfgs" => Ok(Method::Bfgs),
            "l-bfgs" | "lbfgs" => Ok(Method::LBfgs),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<T> {
    /// Weight of each pseudo-ranking against the ghost item; 0 disables them.
    pub npseudo: T,
    pub method: Method,
    pub maxit: usize,
    pub tol: T,
    /// Steffensen extrapolation starts once the convergence criterion is
    /// below this value.
    pub steffensen_threshold: T,
    /// Maximum tie order `D`; defaults to the largest observed tie.
    pub max_tie_order: Option<usize>,
    pub allow_high_tie_order: bool,
    /// Starting values (same layout as the fitted parameters).
    pub start: Option<Parameters<T>>,
    /// Overrides the table's ranking weights.
    pub weights: Option<Vec<T>>,
}

impl<T: Scalar> Default for FitConfig<T> {
    fn default() -> Self {
        Self {
            npseudo: T::lit(0.5),
            method: Method::IterativeScaling,
            maxit: 500,
            tol: T::lit(1e-6),
            steffensen_threshold: T::lit(0.1),
            max_tie_order: None,
            allow_high_tie_order: false,
            start: None,
            weights: None,
        }
    }
}

impl<T: Scalar> FitConfig<T> {
    fn validate(&self) -> Result<()> {
        if !(self.npseudo >= T::zero()) || !self.npseudo.is_finite() {
            return Err(Error::Config("npseudo must be a finite value >= 0".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::Config("tol must be positive".into()));
        }
        if self.maxit == 0 {
            return Err(Error::Config("maxit must be at least 1".into()));
        }
        Ok(())
    }
}

/// Starting value of every active tie parameter.
const TIE_START: f64 = 0.1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ModelFit<T> {
    items: Vec<String>,
    /// Log parameters, worths normalized to sum to one over the real items.
    /// When `has_ghost` the last log-worth belongs to the ghost item.
    params: Parameters<T>,
    has_ghost: bool,
    tie_active: Vec<bool>,
    converged: bool,
    iterations: usize,
    /// Final value of the convergence criterion.
    discrepancy: T,
    /// Log-likelihood of the data rows only.
    log_likelihood: T,
    npseudo: T,
    method: Method,
    data: Arc<RankingsTable<T>>,
    #[serde(skip)]
    information: OnceLock<Matrix<T>>,
}

impl<T: Scalar> Clone for ModelFit<T> {
    fn clone(&self) -> Self {
        let information = OnceLock::new();
        if let Some(m) = self.information.get() {
            let _ = information.set(m.clone());
        }
        Self {
            items: self.items.clone(),
            params: self.params.clone(),
            has_ghost: self.has_ghost,
            tie_active: self.tie_active.clone(),
            converged: self.converged,
            iterations: self.iterations,
            discrepancy: self.discrepancy,
            log_likelihood: self.log_likelihood,
            npseudo: self.npseudo,
            method: self.method,
            data: Arc::clone(&self.data),
            information,
        }
    }
}

impl<T: Scalar> PartialEq for ModelFit<T> {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
            && self.params == other.params
            && self.has_ghost == other.has_ghost
            && self.tie_active == other.tie_active
            && self.converged == other.converged
            && self.iterations == other.iterations
            && self.discrepancy == other.discrepancy
            && self.log_likelihood == other.log_likelihood
            && self.npseudo == other.npseudo
            && self.method == other.method
            && *self.data == *other.data
    }
}

impl<T: Scalar> ModelFit<T> {
    /// Real item names (no ghost).
    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// All fitted log parameters, ghost included.
    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn has_ghost(&self) -> bool {
        self.has_ghost
    }

    /// Worths of the real items, summing to one.
    pub fn worth(&self) -> Vec<T> {
        self.params.worth(self.n_items())
    }

    /// Log-worths of the real items (worths summing to one).
    pub fn log_worth(&self) -> &[T] {
        &self.params.log_worth[..self.n_items()]
    }

    pub fn max_order(&self) -> usize {
        self.params.max_order()
    }

    /// Whether tie order `n` (for `n = 2..=D`) was observed and estimated.
    pub fn tie_active(&self) -> &[bool] {
        &self.tie_active
    }

    /// `(order, delta_order)` for every estimated tie order.
    pub fn tie(&self) -> Vec<(usize, T)> {
        self.active_tie_orders()
            .into_iter()
            .map(|n| (n, self.params.log_delta(n).exp()))
            .collect()
    }

    pub fn active_tie_orders(&self) -> Vec<usize> {
        self.tie_active
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(k, _)| k + 2)
            .collect()
    }

    pub fn converged(&self) -> bool {
        self.converged
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn discrepancy(&self) -> T {
        self.discrepancy
    }

    pub fn log_likelihood(&self) -> T {
        self.log_likelihood
    }

    pub fn npseudo(&self) -> T {
        self.npseudo
    }

    pub fn method(&self) -> Method {
        self.method
    }

    /// The data the model was fitted to (weights applied, no pseudo-rankings).
    pub fn data(&self) -> &RankingsTable<T> {
        &self.data
    }

    /// Data plus pseudo-rankings, as used during fitting.
    pub fn augmented_data(&self) -> RankingsTable<T> {
        augment_with_pseudo_rankings(&self.data, self.npseudo)
    }

    /// Choice events of the augmented data.
    pub fn events(&self) -> Vec<ChoiceEvent<T>> {
        choice_events(&self.augmented_data(), self.max_order()).expect("events validated at fit time")
    }

    /// Observed information of the augmented log-likelihood over all log
    /// parameters (items incl. ghost, then tie orders `2..=D`). Computed on
    /// first use.
    pub fn information(&self) -> &Matrix<T> {
        self.information.get_or_init(|| {
            evaluate(&self.events(), &self.params, true)
                .information
                .expect("information requested")
        })
    }

    /// Number of free parameters: real items minus one plus estimated tie orders.
    pub fn n_parameters(&self) -> usize {
        self.n_items() - 1 + self.active_tie_orders().len()
    }
}

/// `max |obs - exp| / max(1, |obs|)` over item and tie statistics.
pub fn discrepancy<T: Scalar>(obs: &SufficientStats<T>, exp: &SufficientStats<T>) -> T {
    obs.item
        .iter()
        .zip(&exp.item)
        .chain(obs.tie.iter().zip(&exp.tie))
        .map(|(&o, &e)| (o - e).abs() / o.abs().max(T::one()))
        .fold(T::zero(), T::max)
}

pub fn convergence_check<T: Scalar>(obs: &SufficientStats<T>, exp: &SufficientStats<T>, tol: T) -> bool {
    discrepancy(obs, exp) <= tol
}

/// Fixed problem data shared by the optimizers.
pub struct Problem<T> {
    pub events: Vec<ChoiceEvent<T>>,
    pub obs: SufficientStats<T>,
    /// Number of real items; log-worths are normalized over these.
    pub n_real: usize,
    pub tie_active: Vec<bool>,
    pub item_names: Vec<String>,
}

impl<T: Scalar> Problem<T> {
    pub fn new(events: Vec<ChoiceEvent<T>>, n_items: usize, max_order: usize, n_real: usize, item_names: Vec<String>) -> Self {
        let obs = observed_stats(&events, n_items, max_order);
        let tie_active = obs.tie.iter().map(|&t| t > T::zero()).collect();
        Self {
            events,
            obs,
            n_real,
            tie_active,
            item_names,
        }
    }

    fn eval(&self, params: &Parameters<T>) -> Evaluation<T> {
        evaluate(&self.events, params, false)
    }
}

/// One MM sweep: worths are rescaled by `obs / exp` at `params` (whose
/// evaluation is `at`), renormalized, then the active tie parameters are
/// rescaled using expectations at the new worths.
pub fn iterative_scaling_step<T: Scalar>(problem: &Problem<T>, params: &Parameters<T>, at: &Evaluation<T>) -> Result<Parameters<T>> {
    let mut next = params.clone();
    for (i, lw) in next.log_worth.iter_mut().enumerate() {
        let (o, e) = (problem.obs.item[i], at.expected.item[i]);
        if e > T::zero() {
            *lw += o.ln() - e.ln();
        } else if o > T::zero() {
            let name = problem.item_names.get(i).cloned().unwrap_or_else(|| i.to_string());
            return Err(Error::ZeroExpectation(name));
        }
    }
    next.normalize(problem.n_real);
    if problem.tie_active.iter().any(|&a| a) {
        let mid = problem.eval(&next);
        for (k, lt) in next.log_tie.iter_mut().enumerate() {
            if problem.tie_active[k] {
                let (o, e) = (problem.obs.tie[k], mid.expected.tie[k]);
                if e > T::zero() {
                    *lt += o.ln() - e.ln();
                }
            }
        }
    }
    Ok(next)
}

/// Componentwise Steffensen (Aitken delta-squared) extrapolation of three
/// consecutive iterates. Components whose second difference vanishes take
/// the value of the third iterate.
pub fn steffensen_accelerate<T: Scalar>(x0: &[T], x1: &[T], x2: &[T]) -> Vec<T> {
    x0.iter()
        .zip(x1)
        .zip(x2)
        .map(|((&a, &b), &c)| {
            if !a.is_finite() || !b.is_finite() || !c.is_finite() {
                return c;
            }
            let d1 = b - a;
            let d2 = c - b - d1;
            let scale = a.abs().max(T::one());
            if d2.abs() <= T::epsilon() * T::lit(16.0) * scale || !d2.is_finite() {
                return c;
            }
            let x = a - d1 * d1 / d2;
            if x.is_finite() {
                x
            } else {
                c
            }
        })
        .collect()
}

fn flatten<T: Scalar>(p: &Parameters<T>) -> Vec<T> {
    p.log_worth.iter().chain(&p.log_tie).copied().collect()
}

fn unflatten<T: Scalar>(v: &[T], n_items: usize) -> Parameters<T> {
    Parameters::new(v[..n_items].to_vec(), v[n_items..].to_vec())
}

/// Outcome of an optimizer run on a [`Problem`].
pub struct Solution<T> {
    pub params: Parameters<T>,
    pub converged: bool,
    pub iterations: usize,
    pub discrepancy: T,
}

pub fn iterative_scaling<T: Scalar>(problem: &Problem<T>, start: Parameters<T>, config: &FitConfig<T>) -> Result<Solution<T>> {
    let mut x = start;
    let mut ev = problem.eval(&x);
    let mut crit = discrepancy(&problem.obs, &ev.expected);
    let mut iterations = 0;
    while crit > config.tol && iterations < config.maxit {
        iterations += 1;
        let x1 = iterative_scaling_step(problem, &x, &ev)?;
        let ev1 = problem.eval(&x1);
        let crit1 = discrepancy(&problem.obs, &ev1.expected);
        if crit1 <= config.tol || crit1 >= config.steffensen_threshold {
            x = x1;
            ev = ev1;
            crit = crit1;
            continue;
        }
        let x2 = iterative_scaling_step(problem, &x1, &ev1)?;
        let ev2 = problem.eval(&x2);
        let x3 = iterative_scaling_step(problem, &x2, &ev2)?;
        let ev3 = problem.eval(&x3);
        let mut proposal = unflatten(&steffensen_accelerate(&flatten(&x1), &flatten(&x2), &flatten(&x3)), x.n_items());
        proposal.normalize(problem.n_real);
        let evp = problem.eval(&proposal);
        if evp.log_likelihood.is_finite() && evp.log_likelihood >= ev3.log_likelihood {
            x = proposal;
            ev = evp;
        } else {
            x = x3;
            ev = ev3;
        }
        crit = discrepancy(&problem.obs, &ev.expected);
    }
    Ok(Solution {
        params: x,
        converged: crit <= config.tol,
        iterations,
        discrepancy: crit,
    })
}

/// Maps between the full log parameters and the free vector used by the
/// quasi-Newton methods: the first item's log-worth is pinned to zero and
/// inactive tie orders are left out.
struct FreeMap {
    n_items: usize,
    active_ties: Vec<usize>,
}

impl FreeMap {
    fn dim(&self) -> usize {
        self.n_items - 1 + self.active_ties.len()
    }

    fn to_free<T: Scalar>(&self, p: &Parameters<T>) -> Vec<T> {
        let base = p.log_worth[0];
        let mut v: Vec<T> = p.log_worth[1..].iter().map(|&l| l - base).collect();
        v.extend(self.active_ties.iter().map(|&k| p.log_tie[k]));
        v
    }

    fn to_params<T: Scalar>(&self, v: &[T], template: &Parameters<T>) -> Parameters<T> {
        let mut p = template.clone();
        p.log_worth[0] = T::zero();
        p.log_worth[1..].copy_from_slice(&v[..self.n_items - 1]);
        for (m, &k) in self.active_ties.iter().enumerate() {
            p.log_tie[k] = v[self.n_items - 1 + m];
        }
        p
    }

    /// Gradient of the negative log-likelihood in free coordinates.
    fn gradient<T: Scalar>(&self, obs: &SufficientStats<T>, exp: &SufficientStats<T>) -> Vec<T> {
        let mut g: Vec<T> = (1..self.n_items).map(|i| exp.item[i] - obs.item[i]).collect();
        g.extend(self.active_ties.iter().map(|&k| exp.tie[k] - obs.tie[k]));
        g
    }
}

struct Point<T> {
    x: Vec<T>,
    f: T,
    g: Vec<T>,
    crit: T,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn axpy<T: Scalar>(x: &[T], a: T, p: &[T]) -> Vec<T> {
    x.iter().zip(p).map(|(&xi, &pi)| xi + a * pi).collect()
}

struct Objective<'a, T> {
    problem: &'a Problem<T>,
    map: FreeMap,
    template: Parameters<T>,
}

impl<T: Scalar> Objective<'_, T> {
    fn at(&self, x: Vec<T>) -> Point<T> {
        let params = self.map.to_params(&x, &self.template);
        let ev = self.problem.eval(&params);
        let g = self.map.gradient(&self.problem.obs, &ev.expected);
        let f = -ev.log_likelihood;
        let crit = discrepancy(&self.problem.obs, &ev.expected);
        Point {
            x,
            f: if f.is_nan() { T::infinity() } else { f },
            g,
            crit,
        }
    }
}

/// Line search for the strong Wolfe conditions (bracketing + zoom). Near
/// the optimum function differences are dominated by rounding, so a step is
/// also accepted when it satisfies the curvature condition together with the
/// approximate Wolfe decrease test on the directional derivative.
fn line_search<T: Scalar>(obj: &Objective<'_, T>, p0: &Point<T>, dir: &[T], step0: T) -> Option<Point<T>> {
    let c1 = T::lit(1e-4);
    let c2 = T::lit(0.9);
    let d0 = dot(&p0.g, dir);
    if !(d0 < T::zero()) {
        return None;
    }
    let f_tol = T::epsilon() * T::lit(10.0) * p0.f.abs().max(T::one());
    let accept = |pt: &Point<T>, a: T| -> (bool, T) {
        let d = dot(&pt.g, dir);
        let armijo = pt.f <= p0.f + c1 * a * d0;
        let approx = pt.f <= p0.f + f_tol && d <= (T::lit(2.0) * c1 - T::one()) * d0;
        let curvature = d.abs() <= -c2 * d0;
        ((armijo || approx) && curvature, d)
    };

    let mut a_prev = T::zero();
    let mut f_prev = p0.f;
    let mut d_prev = d0;
    let mut a = step0;
    let a_max = T::lit(1e6);
    for i in 0..40 {
        let pt = obj.at(axpy(&p0.x, a, dir));
        let (ok, d) = accept(&pt, a);
        if ok {
            return Some(pt);
        }
        let sufficient = pt.f <= p0.f + c1 * a * d0 || pt.f <= p0.f + f_tol;
        if !sufficient || (i > 0 && pt.f >= f_prev) {
            return zoom(obj, p0, dir, a_prev, f_prev, d_prev, a, pt.f, d, &accept);
        }
        if d >= T::zero() {
            return zoom(obj, p0, dir, a, pt.f, d, a_prev, f_prev, d_prev, &accept);
        }
        a_prev = a;
        f_prev = pt.f;
        d_prev = d;
        a = (a * T::lit(2.0)).min(a_max);
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn zoom<T: Scalar>(
    obj: &Objective<'_, T>,
    p0: &Point<T>,
    dir: &[T],
    mut lo: T,
    mut f_lo: T,
    mut d_lo: T,
    mut hi: T,
    mut f_hi: T,
    mut d_hi: T,
    accept: &dyn Fn(&Point<T>, T) -> (bool, T),
) -> Option<Point<T>> {
    let c1 = T::lit(1e-4);
    let d0 = dot(&p0.g, dir);
    let f_tol = T::epsilon() * T::lit(10.0) * p0.f.abs().max(T::one());
    for _ in 0..60 {
        // cubic interpolation, safeguarded towards bisection
        let mut a = cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi);
        let (left, right) = if lo < hi { (lo, hi) } else { (hi, lo) };
        let width = right - left;
        let margin = width * T::lit(0.1);
        if !a.is_finite() || a <= left + margin || a >= right - margin {
            a = (lo + hi) * T::lit(0.5);
        }
        if width <= T::epsilon() * right.abs().max(T::one()) {
            return None;
        }
        let pt = obj.at(axpy(&p0.x, a, dir));
        let (ok, d) = accept(&pt, a);
        if ok {
            return Some(pt);
        }
        let sufficient = pt.f <= p0.f + c1 * a * d0 || pt.f <= p0.f + f_tol;
        if !sufficient || pt.f >= f_lo {
            hi = a;
            f_hi = pt.f;
            d_hi = d;
        } else {
            if d * (hi - lo) >= T::zero() {
                hi = lo;
                f_hi = f_lo;
                d_hi = d_lo;
            }
            lo = a;
            f_lo = pt.f;
            d_lo = d;
        }
    }
    None
}

fn cubic_min<T: Scalar>(a: T, fa: T, da: T, b: T, fb: T, db: T) -> T {
    let d1 = da + db - T::lit(3.0) * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if !(disc >= T::zero()) || !fb.is_finite() {
        return T::nan();
    }
    let d2 = (b - a).signum() * disc.sqrt();
    b - (b - a) * (db + d2 - d1) / (db - da + T::lit(2.0) * d2)
}

pub fn quasi_newton<T: Scalar>(problem: &Problem<T>, start: Parameters<T>, config: &FitConfig<T>, limited: bool) -> Result<Solution<T>> {
    let map = FreeMap {
        n_items: start.n_items(),
        active_ties: (0..start.log_tie.len()).filter(|&k| problem.tie_active[k]).collect(),
    };
    let obj = Objective {
        problem,
        map,
        template: start.clone(),
    };
    let n = obj.map.dim();
    let mut cur = obj.at(obj.map.to_free(&start));
    let mut h_inv = if limited { Matrix::zeros(0, 0) } else { Matrix::identity(n) };
    let mut memory: VecDeque<(Vec<T>, Vec<T>, T)> = VecDeque::new();
    let m = 10;
    let mut iterations = 0;
    let mut first = true;
    while cur.crit > config.tol && iterations < config.maxit {
        iterations += 1;
        let dir: Vec<T> = if limited {
            lbfgs_direction(&cur.g, &memory)
        } else {
            h_inv.mul_vec(&cur.g).into_iter().map(|v| -v).collect()
        };
        let gnorm = cur.g.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
        let step0 = if first { (T::one() / gnorm.max(T::epsilon())).min(T::one()) } else { T::one() };
        let next = match line_search(&obj, &cur, &dir, step0) {
            Some(pt) => pt,
            None => {
                return Err(Error::LineSearch {
                    iterations,
                    reason: "no step satisfying the Wolfe conditions".into(),
                    discrepancy: cur.crit.to_f64_lossy(),
                })
            }
        };
        let s: Vec<T> = next.x.iter().zip(&cur.x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = next.g.iter().zip(&cur.g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::epsilon() * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            let rho = T::one() / sy;
            if limited {
                if memory.len() == m {
                    memory.pop_front();
                }
                memory.push_back((s, y, rho));
            } else {
                if first {
                    let scale = sy / dot(&y, &y);
                    h_inv = Matrix::identity(n);
                    for i in 0..n {
                        h_inv[(i, i)] = scale;
                    }
                }
                bfgs_update(&mut h_inv, &s, &y, rho);
            }
        }
        first = false;
        cur = next;
    }
    let mut params = obj.map.to_params(&cur.x, &start);
    params.normalize(problem.n_real);
    Ok(Solution {
        params,
        converged: cur.crit <= config.tol,
        iterations,
        discrepancy: cur.crit,
    })
}

fn bfgs_update<T: Scalar>(h: &mut Matrix<T>, s: &[T], y: &[T], rho: T) {
    let n = s.len();
    let hy = h.mul_vec(y);
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[(i, j)] += rho * ((T::one() + rho * yhy) * s[i] * s[j] - hy[i] * s[j] - s[i] * hy[j]);
        }
    }
}

fn lbfgs_direction<T: Scalar>(g: &[T], memory: &VecDeque<(Vec<T>, Vec<T>, T)>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.iter().rev() {
        let a = *rho * dot(s, &q);
        for (qi, &yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
        let b = *rho * dot(y, &q);
        for (qi, &si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    q.into_iter().map(|v| -v).collect()
}

/// Fits the model to `table`.
pub fn fit<T: Scalar>(table: &RankingsTable<T>, config: &FitConfig<T>) -> Result<ModelFit<T>> {
    config.validate()?;
    table.check_no_reserved_names()?;
    let data = match &config.weights {
        Some(w) => table.clone().with_weights(w.clone())?,
        None => table.clone(),
    };
    if data.active_rows().next().is_none() {
        return Err(Error::EmptyData);
    }
    let observed_max = data.max_tie_size();
    let max_order = config.max_tie_order.unwrap_or(observed_max).max(1);
    if max_order > MAX_DEFAULT_TIE_ORDER && !config.allow_high_tie_order {
        return Err(Error::TieOrderGuard(max_order));
    }
    if observed_max > max_order {
        return Err(Error::TieOrderExceeded {
            size: observed_max,
            max: max_order,
        });
    }
    let ghost = config.npseudo > T::zero();
    if !ghost {
        let report = connectivity(&adjacency(&data));
        if !report.strongly_connected {
            return Err(Error::NotConnected(report));
        }
    }
    let augmented = augment_with_pseudo_rankings(&data, config.npseudo);
    let n_real = data.n_items();
    let n_all = augmented.n_items();
    let events = choice_events(&augmented, max_order)?;
    let problem = Problem::new(events, n_all, max_order, n_real, augmented.items().to_vec());

    let start = start_values(config.start.as_ref(), n_all, max_order, n_real, &problem.tie_active)?;
    let solution = match config.method {
        Method::IterativeScaling => iterative_scaling(&problem, start, config)?,
        Method::Bfgs => quasi_newton(&problem, start, config, false)?,
        Method::LBfgs => quasi_newton(&problem, start, config, true)?,
    };
    if !solution.converged {
        log::warn!("Iterations have not converged.");
    }
    let data_events = choice_events(&data, max_order)?;
    let mut data_params = solution.params.clone();
    data_params.log_worth.truncate(n_real);
    let log_likelihood = evaluate(&data_events, &data_params, false).log_likelihood;

    Ok(ModelFit {
        items: data.items().to_vec(),
        params: solution.params,
        has_ghost: ghost,
        tie_active: problem.tie_active,
        converged: solution.converged,
        iterations: solution.iterations,
        discrepancy: solution.discrepancy,
        log_likelihood,
        npseudo: config.npseudo,
        method: config.method,
        data: Arc::new(data),
        information: OnceLock::new(),
    })
}

fn start_values<T: Scalar>(
    given: Option<&Parameters<T>>,
    n_all: usize,
    max_order: usize,
    n_real: usize,
    tie_active: &[bool],
) -> Result<Parameters<T>> {
    let mut p = match given {
        Some(s) => {
            if s.n_items() != n_all || s.max_order() != max_order {
                return Err(Error::Config(format!(
                    "start values have {} items and tie order {}, expected {} and {}",
                    s.n_items(),
                    s.max_order(),
                    n_all,
                    max_order
                )));
            }
            let mut s = s.clone();
            for l in &mut s.log_worth {
                if !l.is_finite() {
                    *l = T::zero();
                }
            }
            s
        }
        None => Parameters::uniform(n_all, max_order, T::lit(TIE_START)),
    };
    for (k, lt) in p.log_tie.iter_mut().enumerate() {
        if !tie_active[k] {
            *lt = T::neg_infinity();
        } else if !lt.is_finite() {
            *lt = T::lit(TIE_START).ln();
        }
    }
    p.normalize(n_real);
    Ok(p)
}
