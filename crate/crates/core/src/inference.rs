//! Standard errors, reference contrasts, goodness-of-fit metrics and
//! quasi-variances.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::fit::ModelFit;
use crate::likelihood::choice_events;
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// What the item log-worths are contrasted with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reference {
    /// A single item (zero-based index).
    Item(usize),
    /// The mean log-worth of a set of items.
    Items(Vec<usize>),
    /// The mean log-worth of all items.
    Mean,
}

impl Default for Reference {
    fn default() -> Self {
        Reference::Item(0)
    }
}

impl Reference {
    /// Parses `"mean"`, an item name, or a comma-separated list of names.
    pub fn parse(spec: &str, items: &[String]) -> Result<Self> {
        if spec.eq_ignore_ascii_case("mean") {
            return Ok(Reference::Mean);
        }
        let lookup = |name: &str| {
            items
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::UnknownReference(name.to_string()))
        };
        if let Ok(i) = lookup(spec) {
            return Ok(Reference::Item(i));
        }
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        if parts.len() > 1 {
            let idx = parts.into_iter().map(lookup).collect::<Result<Vec<_>>>()?;
            return Ok(Reference::Items(idx));
        }
        Err(Error::UnknownReference(spec.to_string()))
    }

    fn weights(&self, n: usize) -> Result<Vec<f64>> {
        let mut w = vec![0.0; n];
        match self {
            Reference::Item(i) => {
                *w.get_mut(*i).ok_or_else(|| Error::UnknownReference(i.to_string()))? = 1.0;
            }
            Reference::Items(set) => {
                if set.is_empty() {
                    return Err(Error::UnknownReference("empty set".into()));
                }
                for &i in set {
                    if i >= n {
                        return Err(Error::UnknownReference(i.to_string()));
                    }
                    w[i] += 1.0 / set.len() as f64;
                }
            }
            Reference::Mean => w.iter_mut().for_each(|x| *x = 1.0 / n as f64),
        }
        Ok(w)
    }
}

/// Covariance of the contrast parameters: real items (contrasted with the
/// reference), then the estimated tie orders on the log scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Vcov<T> {
    pub labels: Vec<String>,
    pub matrix: Matrix<T>,
    pub reference: Reference,
}

pub fn tie_label(order: usize) -> String {
    format!("tie{order}")
}

/// Item contrasts `log alpha_i - mean_{k in ref} log alpha_k`.
pub fn contrasts<T: Scalar>(fit: &ModelFit<T>, reference: &Reference) -> Result<Vec<T>> {
    let lw = fit.log_worth();
    let w = reference.weights(lw.len())?;
    let base: T = lw.iter().zip(&w).map(|(&l, &wk)| l * T::lit(wk)).sum();
    Ok(lw.iter().map(|&l| l - base).collect())
}

pub fn vcov<T: Scalar>(fit: &ModelFit<T>, reference: &Reference) -> Result<Vcov<T>> {
    let j = fit.n_items();
    let w = reference.weights(j)?;
    let n_all = fit.params().n_items();
    let ties = fit.active_tie_orders();
    let info = fit.information();
    let pin = match reference {
        Reference::Item(i) => *i,
        _ => 0,
    };
    // free parameters: every item but the pinned one (ghost included), active ties
    let free: Vec<usize> = (0..n_all)
        .filter(|&i| i != pin)
        .chain(ties.iter().map(|&n| n_all + n - 2))
        .collect();
    let sub = info.select(&free, &free);
    let inv = sub.cholesky().ok_or(Error::SingularInformation)?.inverse();

    // covariance of (theta_i - theta_pin) for real items, then ties
    let dim = j + ties.len();
    let pos = |k: usize| -> Option<usize> {
        if k < j {
            if k == pin {
                None
            } else {
                Some(if k < pin { k } else { k - 1 })
            }
        } else {
            // tie index among active orders
            Some(n_all - 1 + (k - j))
        }
    };
    let base = Matrix::from_fn(dim, dim, |a, b| match (pos(a), pos(b)) {
        (Some(p), Some(q)) => inv[(p, q)],
        _ => T::zero(),
    });
    // contrast transform: items c = (I - 1 w') u, ties unchanged
    let m = Matrix::from_fn(dim, dim, |a, b| {
        if a < j && b < j {
            let id = if a == b { T::one() } else { T::zero() };
            id - T::lit(w[b])
        } else if a == b {
            T::one()
        } else {
            T::zero()
        }
    });
    let mut matrix = m.matmul(&base).matmul(&m.transpose());
    matrix.symmetrize();
    let labels = fit
        .items()
        .iter()
        .cloned()
        .chain(ties.iter().map(|&n| tie_label(n)))
        .collect();
    Ok(Vcov {
        labels,
        matrix,
        reference: reference.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Coefficient<T> {
    pub name: String,
    pub estimate: T,
    /// `None` for a single reference item, whose contrast is fixed at zero.
    pub se: Option<T>,
    pub z: Option<T>,
    pub p: Option<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Summary<T> {
    pub reference: Reference,
    pub coefficients: Vec<Coefficient<T>>,
    pub metrics: Metrics<T>,
    pub converged: bool,
    pub iterations: usize,
}

fn two_sided_p<T: Scalar>(z: T) -> T {
    let n = Normal::standard();
    T::lit(2.0 * n.sf(z.to_f64_lossy().abs()))
}

/// Z tests for the item contrasts and log tie parameters.
pub fn summarize<T: Scalar>(fit: &ModelFit<T>, reference: &Reference) -> Result<Summary<T>> {
    let v = vcov(fit, reference)?;
    let est = contrasts(fit, reference)?;
    let j = fit.n_items();
    let ties = fit.active_tie_orders();
    let mut coefficients = Vec::with_capacity(j + ties.len());
    let values = est
        .into_iter()
        .chain(ties.iter().map(|&n| fit.params().log_delta(n)));
    for (k, estimate) in values.enumerate() {
        let fixed = matches!(reference, Reference::Item(r) if *r == k);
        let (se, z, p) = if fixed {
            (None, None, None)
        } else {
            let se = v.matrix[(k, k)].max(T::zero()).sqrt();
            let z = estimate / se;
            (Some(se), Some(z), Some(two_sided_p(z)))
        };
        coefficients.push(Coefficient {
            name: v.labels[k].clone(),
            estimate,
            se,
            z,
            p,
        });
    }
    Ok(Summary {
        reference: reference.clone(),
        coefficients,
        metrics: model_metrics(fit),
        converged: fit.converged(),
        iterations: fit.iterations(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Metrics<T> {
    pub log_likelihood: T,
    pub deviance: T,
    pub aic: T,
    pub n_parameters: usize,
    pub df_residual: T,
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Deviance, AIC and residual degrees of freedom of the data (pseudo-rankings
/// excluded). Each choice event over `A` has `sum_{k <= min(|A|, D)} C(|A|, k)`
/// possible outcomes.
pub fn model_metrics<T: Scalar>(fit: &ModelFit<T>) -> Metrics<T> {
    let d = fit.max_order();
    let events = choice_events(fit.data(), d).expect("data validated at fit time");
    let cells: T = events
        .iter()
        .map(|e| {
            let a = e.alternatives.len();
            let outcomes: f64 = (1..=a.min(d)).map(|k| binomial(a, k)).sum();
            e.weight * T::lit(outcomes - 1.0)
        })
        .sum();
    let p = fit.n_parameters();
    let deviance = T::lit(-2.0) * fit.log_likelihood();
    Metrics {
        log_likelihood: fit.log_likelihood(),
        deviance,
        aic: deviance + T::from_usize_lossy(2 * p),
        n_parameters: p,
        df_residual: cells - T::from_usize_lossy(p),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QuasiVariances<T> {
    pub items: Vec<String>,
    pub reference: Reference,
    pub estimate: Vec<T>,
    /// Standard error of each contrast under `reference`.
    pub se: Vec<T>,
    pub quasi_var: Vec<T>,
    pub quasi_se: Vec<T>,
    /// Smallest and largest relative error `sqrt(q_i + q_j) / sqrt(v_ij) - 1`
    /// over all simple contrasts.
    pub simple_error: (T, T),
    /// Extreme relative errors over all contrasts.
    pub all_error: (T, T),
}

/// Variances of all simple contrasts, `v_ij = V_ii + V_jj - 2 V_ij`.
pub fn simple_contrast_variances<T: Scalar>(v: &Matrix<T>, j: usize) -> Matrix<T> {
    Matrix::from_fn(j, j, |a, b| {
        if a == b {
            T::zero()
        } else {
            v[(a, a)] + v[(b, b)] - T::lit(2.0) * v[(a, b)]
        }
    })
}

/// Fits quasi-variances to the simple-contrast variances `v` by least
/// squares on the log scale (Levenberg-Marquardt in `log q`).
pub fn fit_quasi_variances<T: Scalar>(v: &Matrix<T>) -> Result<Vec<T>> {
    let j = v.nrows();
    if j < 2 {
        return Err(Error::Config("quasi-variances need at least two items".into()));
    }
    let mut pairs = Vec::with_capacity(j * (j - 1) / 2);
    for a in 0..j {
        for b in (a + 1)..j {
            if !(v[(a, b)] > T::zero()) {
                return Err(Error::SingularInformation);
            }
            pairs.push((a, b, v[(a, b)].ln()));
        }
    }
    let mut u: Vec<T> = (0..j)
        .map(|a| {
            let m: T = (0..j).filter(|&b| b != a).map(|b| v[(a, b)]).sum::<T>() / T::from_usize_lossy(j - 1);
            (m * T::lit(0.5)).ln()
        })
        .collect();
    let objective = |u: &[T]| -> T {
        pairs
            .iter()
            .map(|&(a, b, lv)| {
                let r = (u[a].exp() + u[b].exp()).ln() - lv;
                r * r
            })
            .sum()
    };
    let mut f = objective(&u);
    let mut lambda = T::lit(1e-3);
    for _ in 0..200 {
        let mut jtj = Matrix::zeros(j, j);
        let mut jtr = vec![T::zero(); j];
        for &(a, b, lv) in &pairs {
            let (qa, qb) = (u[a].exp(), u[b].exp());
            let s = qa + qb;
            let r = s.ln() - lv;
            let (ga, gb) = (qa / s, qb / s);
            jtj[(a, a)] += ga * ga;
            jtj[(b, b)] += gb * gb;
            jtj[(a, b)] += ga * gb;
            jtj[(b, a)] += ga * gb;
            jtr[a] += ga * r;
            jtr[b] += gb * r;
        }
        let grad = jtr.iter().fold(T::zero(), |m, &g| m.max(g.abs()));
        if grad <= T::lit(1e-12) {
            break;
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj.clone();
            for a in 0..j {
                damped[(a, a)] += lambda * (jtj[(a, a)] + T::lit(1e-12));
            }
            let Some(ch) = damped.cholesky() else {
                lambda *= T::lit(10.0);
                continue;
            };
            let step = ch.solve(&jtr);
            let trial: Vec<T> = u.iter().zip(&step).map(|(&x, &s)| x - s).collect();
            let ft = objective(&trial);
            if ft <= f {
                let done = f - ft <= T::lit(1e-16) * (T::one() + f);
                u = trial;
                f = ft;
                lambda = (lambda * T::lit(0.3)).max(T::lit(1e-12));
                improved = !done;
                break;
            }
            lambda *= T::lit(10.0);
        }
        if !improved {
            break;
        }
    }
    let floor = T::lit(1e-300).max(T::min_positive_value());
    Ok(u.into_iter().map(|x| x.exp().max(floor)).collect())
}

/// Extreme relative errors of quasi-standard errors over all contrasts.
///
/// A contrast `c` (with `sum c = 0`) has true variance `c' V c` and
/// quasi-variance approximation `c' diag(q) c`. Writing `c = C z` with
/// `C = [-1'; I]`, the ratio of the two quadratic forms ranges over the
/// generalized eigenvalues of `(C' diag(q) C, V_0)`, where `V_0` is the
/// covariance of the contrasts with item 0. The reported errors are
/// `sqrt(lambda) - 1` at the extreme eigenvalues.
pub fn all_contrast_errors<T: Scalar>(v0: &Matrix<T>, q: &[T]) -> Result<(T, T)> {
    let m = q.len() - 1;
    let cqc = Matrix::from_fn(m, m, |a, b| q[0] + if a == b { q[a + 1] } else { T::zero() });
    let ch = v0.cholesky().ok_or(Error::SingularInformation)?;
    // A = L^-1 (C'QC) L^-T
    let mut half = Matrix::zeros(m, m);
    for col in 0..m {
        let column: Vec<T> = (0..m).map(|r| cqc[(r, col)]).collect();
        let y = ch.solve_lower(&column);
        for r in 0..m {
            half[(r, col)] = y[r];
        }
    }
    let half_t = half.transpose();
    let mut a = Matrix::zeros(m, m);
    for col in 0..m {
        let column: Vec<T> = (0..m).map(|r| half_t[(r, col)]).collect();
        let y = ch.solve_lower(&column);
        for r in 0..m {
            a[(r, col)] = y[r];
        }
    }
    let (values, _) = a.symmetric_eigen();
    let lo = values.first().copied().unwrap_or(T::one()).max(T::zero());
    let hi = values.last().copied().unwrap_or(T::one()).max(T::zero());
    Ok((lo.sqrt() - T::one(), hi.sqrt() - T::one()))
}

/// Signed extreme relative errors over all simple contrasts.
pub fn simple_contrast_errors<T: Scalar>(v: &Matrix<T>, q: &[T]) -> (T, T) {
    let j = q.len();
    let mut lo = T::infinity();
    let mut hi = T::neg_infinity();
    for a in 0..j {
        for b in (a + 1)..j {
            let e = ((q[a] + q[b]) / v[(a, b)]).sqrt() - T::one();
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    (lo, hi)
}

pub fn quasi_variances<T: Scalar>(fit: &ModelFit<T>, reference: &Reference) -> Result<QuasiVariances<T>> {
    let j = fit.n_items();
    let base = vcov(fit, &Reference::Item(0))?;
    let v_items = base.matrix.select(&(0..j).collect::<Vec<_>>(), &(0..j).collect::<Vec<_>>());
    let simple = simple_contrast_variances(&v_items, j);
    let q = fit_quasi_variances(&simple)?;
    let v0 = v_items.select(&(1..j).collect::<Vec<_>>(), &(1..j).collect::<Vec<_>>());
    let all_error = if j > 1 { all_contrast_errors(&v0, &q)? } else { (T::zero(), T::zero()) };
    let under_ref = vcov(fit, reference)?;
    Ok(QuasiVariances {
        items: fit.items().to_vec(),
        reference: reference.clone(),
        estimate: contrasts(fit, reference)?,
        se: (0..j).map(|a| under_ref.matrix[(a, a)].max(T::zero()).sqrt()).collect(),
        quasi_se: q.iter().map(|x| x.sqrt()).collect(),
        simple_error: simple_contrast_errors(&simple, &q),
        all_error,
        quasi_var: q,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ComparisonInterval<T> {
    pub item: String,
    pub estimate: T,
    pub se: T,
    pub quasi_se: T,
    pub lower: T,
    pub upper: T,
}

/// `estimate +/- z * quasi_se` with `z` the normal quantile for `level`.
pub fn comparison_intervals<T: Scalar>(qv: &QuasiVariances<T>, level: f64) -> Result<Vec<ComparisonInterval<T>>> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("level must lie in (0, 1), got {level}")));
    }
    let z = T::lit(Normal::standard().inverse_cdf(0.5 + level / 2.0));
    Ok(qv
        .items
        .iter()
        .enumerate()
        .map(|(i, item)| ComparisonInterval {
            item: item.clone(),
            estimate: qv.estimate[i],
            se: qv.se[i],
            quasi_se: qv.quasi_se[i],
            lower: qv.estimate[i] - z * qv.quasi_se[i],
            upper: qv.estimate[i] + z * qv.quasi_se[i],
        })
        .collect())
}
