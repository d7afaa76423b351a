//! Acceptance checks. Prints one PASS/FAIL line per criterion.
//!
//! Checks that need an external dataset look for it in `PLACKETT_DATA_DIR`
//! (default: this crate's `data/` directory) and report FAIL with a notice
//! when it is absent. Only failures on data that is present make the target
//! exit with an error.

mod common;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use common::*;
use plackett::fit::{fit, FitConfig, Method, ModelFit};
use plackett::inference::{model_metrics, quasi_variances, simple_contrast_variances, summarize, vcov, Reference};
use plackett::io::{read_paired_counts_csv, read_preflib_soc, read_rank_csv_path, read_rank_csv_with, RankCsvOptions};
use plackett::likelihood::{choice_events, enumerate_tied_rankings, evaluate, observed_stats, ranking_log_probability, Parameters};
use plackett::network::{adjacency, connectivity};
use plackett::rankings::{group_rankings, RankingsTable};
use plackett::simulate::{sample_ranking_of, sample_rankings, sample_subset_rankings, SamplerConfig};
use plackett::tree::{grow_tree, CovariateFrame, SplitRule, TreeConfig};
use plackett::{Error, NOT_CONNECTED_MESSAGE};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

enum Outcome {
    Pass(String),
    Fail(String),
    NoData(String),
}

use Outcome::*;

fn data_dir() -> PathBuf {
    std::env::var_os("PLACKETT_DATA_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data"))
}

fn data_file(name: &str) -> Option<PathBuf> {
    let p = data_dir().join(name);
    p.exists().then_some(p)
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Collects failed sub-checks.
#[derive(Default)]
struct Checks(Vec<String>);

impl Checks {
    fn check(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.0.push(what.into());
        }
    }

    fn near(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        self.check(close(got, want, tol), format!("{what}: got {got:.7}, want {want} (tol {tol:e})"));
    }

    fn finish(self, summary: String) -> Outcome {
        if self.0.is_empty() {
            Pass(summary)
        } else {
            Fail(self.0.join("; "))
        }
    }
}

fn timed<R>(f: impl FnOnce() -> R) -> (R, Duration) {
    let t = Instant::now();
    let r = f();
    (r, t.elapsed())
}

fn pudding() -> Option<RankingsTable<f64>> {
    let path = data_file("pudding.csv")?;
    Some(read_paired_counts_csv(std::fs::File::open(path).ok()?).expect("pudding.csv is malformed"))
}

const NO_PUDDING: &str = "pudding.csv (15 paired-comparison rows) not available";

fn pudding_model(table: &RankingsTable<f64>) -> ModelFit<f64> {
    let cfg = FitConfig {
        npseudo: 0.0,
        maxit: 7,
        ..FitConfig::default()
    };
    fit(table, &cfg).expect("pudding fit")
}

fn criterion_1() -> Outcome {
    let Some(table) = pudding() else { return NoData(NO_PUDDING.into()) };
    let (model, elapsed) = timed(|| pudding_model(&table));
    let mut c = Checks::default();
    let want = [0.1388005, 0.1729985, 0.1617420, 0.1653930, 0.1586805, 0.2023855];
    for (k, (&g, w)) in model.worth().iter().zip(want).enumerate() {
        c.near(&format!("worth {}", k + 1), g, w, 1e-5);
    }
    c.near("tie2", model.tie()[0].1, 0.7468147, 1e-5);
    c.check(!model.converged(), "expected a non-convergence warning");
    c.check(elapsed < Duration::from_millis(100), format!("took {elapsed:?}"));
    c.finish(format!("worths and delta within 1e-5, not converged after 7 iterations, {elapsed:.1?}"))
}

fn criterion_2() -> Outcome {
    let Some(table) = pudding() else { return NoData(NO_PUDDING.into()) };
    let model = pudding_model(&table);
    let mut c = Checks::default();
    let first = summarize(&model, &Reference::Item(0)).unwrap();
    // estimate, se, p
    let want_first = [
        (0.2202, 0.1872, 0.239429),
        (0.1530, 0.1935, 0.429271),
        (0.1753, 0.1882, 0.351683),
        (0.1339, 0.1927, 0.487298),
        (0.3771, 0.1924, 0.049983),
        (-0.2919, 0.0825, 0.000402),
    ];
    for (coef, (e, se, p)) in first.coefficients[1..].iter().zip(want_first) {
        c.near(&format!("{} estimate", coef.name), coef.estimate, e, 1e-3);
        c.near(&format!("{} se", coef.name), coef.se.unwrap_or(f64::NAN), se, 1e-3);
        c.near(&format!("{} p", coef.name), coef.p.unwrap_or(f64::NAN), p, 1e-3);
    }
    let mean = summarize(&model, &Reference::Mean).unwrap();
    let want_mean = [
        (-0.176581, 0.121949),
        (0.043664, 0.121818),
        (-0.023617, 0.126823),
        (-0.001295, 0.122003),
        (-0.042726, 0.127054),
        (0.200555, 0.126594),
        (-0.291938, 0.082499),
    ];
    for (coef, (e, se)) in mean.coefficients.iter().zip(want_mean) {
        c.near(&format!("mean-ref {} estimate", coef.name), coef.estimate, e, 1e-4);
        c.near(&format!("mean-ref {} se", coef.name), coef.se.unwrap_or(f64::NAN), se, 1e-4);
    }
    let m = model_metrics(&model);
    c.near("deviance", m.deviance, 1619.4, 0.1);
    c.near("df", m.df_residual, 1484.0, 0.1);
    c.near("AIC", m.aic, 1631.4, 0.1);
    c.finish("item-1 and mean reference tables, deviance, df and AIC match".into())
}

fn criterion_3() -> Outcome {
    let Some(table) = pudding() else { return NoData(NO_PUDDING.into()) };
    let model = pudding_model(&table);
    let qv = quasi_variances(&model, &Reference::Item(0)).unwrap();
    let mut c = Checks::default();
    let want = [0.1328950, 0.1327373, 0.1395740, 0.1330240, 0.1399253, 0.1392047];
    for (k, (&g, w)) in qv.quasi_se.iter().zip(want).enumerate() {
        c.near(&format!("quasi-SE {}", k + 1), g, w, 1e-4);
    }
    let worst = worst_simple_error(&model, &qv.quasi_var);
    c.check(worst.0.abs() < 0.008 && worst.1.abs() < 0.008, format!("worst simple-contrast errors {worst:?}"));
    c.finish(format!("quasi-SEs within 1e-4, worst simple-contrast error {:.2}%", 100.0 * worst.0.abs().max(worst.1.abs())))
}

/// Recomputed from the covariance directly: extreme values of
/// `sqrt(q_i + q_j) / sd(theta_i - theta_j) - 1`.
fn worst_simple_error(model: &ModelFit<f64>, q: &[f64]) -> (f64, f64) {
    let v = vcov(model, &Reference::Item(0)).unwrap();
    let j = model.n_items();
    let simple = simple_contrast_variances(&v.matrix, j);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for a in 0..j {
        for b in a + 1..j {
            let e = ((q[a] + q[b]) / simple[(a, b)]).sqrt() - 1.0;
            lo = lo.min(e);
            hi = hi.max(e);
        }
    }
    (lo, hi)
}

fn criterion_4() -> Outcome {
    let mut c = Checks::default();
    // (a)
    let mle = fit(&abc(), &FitConfig { npseudo: 0.0, ..FitConfig::default() }).unwrap();
    let s = summarize(&mle, &Reference::Item(0)).unwrap();
    c.near("B", s.coefficients[1].estimate, 0.8392, 1e-3);
    c.near("C", s.coefficients[2].estimate, 0.4196, 1e-3);
    c.near("se B", s.coefficients[1].se.unwrap(), 1.3596, 1e-3);
    c.near("se C", s.coefficients[2].se.unwrap(), 1.5973, 1e-3);
    c.check(s.coefficients[0].se.is_none(), "reference has a standard error");
    let m = model_metrics(&mle);
    c.near("deviance", m.deviance, 5.1356, 1e-3);
    c.near("df", m.df_residual, 2.0, 1e-3);
    c.near("AIC", m.aic, 9.1356, 1e-3);
    c.check(mle.iterations() == 3, format!("{} iterations", mle.iterations()));
    // (b)
    let pseudo = fit(&abcd(), &FitConfig::default()).unwrap();
    let got = contrasts(pseudo.log_worth());
    for (k, w) in [0.0, 0.5184185, 0.1354707, -1.1537565].into_iter().enumerate() {
        c.near(&format!("pseudo {}", k), got[k], w, 1e-5);
    }
    // (c)
    match fit(&abcd(), &FitConfig { npseudo: 0.0, ..FitConfig::default() }) {
        Err(e @ Error::NotConnected(_)) => c.check(e.to_string() == NOT_CONNECTED_MESSAGE, format!("message `{e}`")),
        other => c.check(false, format!("expected a connectivity error, got {:?}", other.map(|m| m.worth()))),
    }
    // (d)
    let adj = adjacency(&abcd());
    let want = [[0., 1., 0., 1.], [1., 0., 1., 0.], [1., 0., 0., 0.], [0., 0., 0., 0.]];
    for (i, row) in want.iter().enumerate() {
        c.check(adj.row(i) == row, format!("adjacency row {i}: {:?}", adj.row(i)));
    }
    let rep = connectivity(&adj);
    c.check(rep.membership == [1, 1, 1, 2], format!("membership {:?}", rep.membership));
    c.check(rep.csize == [3, 1], format!("csize {:?}", rep.csize));
    c.check(rep.no == 2 && !rep.strongly_connected, format!("no = {}", rep.no));
    c.finish("MLE on A,B,C, pseudo-ranking fit, connectivity error, adjacency and clusters".into())
}

fn criterion_5() -> Outcome {
    let Some(path) = data_file("nascar.csv") else {
        return NoData("nascar.csv (36 races x 87 drivers rank table) not available".into());
    };
    let table: RankingsTable<f64> = read_rank_csv_path(path, None).expect("nascar.csv is malformed");
    let mut c = Checks::default();
    let items = table.items().to_vec();
    let mut order: Vec<usize> = (0..items.len()).collect();
    let avg = |i: usize| {
        let ranks: Vec<f64> = table.rows().filter(|r| r[i] > 0).map(|r| r[i] as f64).collect();
        ranks.iter().sum::<f64>() / ranks.len() as f64
    };
    order.sort_by(|&a, &b| avg(a).total_cmp(&avg(b)));
    let top: Vec<usize> = order[..3].to_vec();

    let ((mle, full), elapsed) = timed(|| {
        let (sub, _) = table.subset_items(&items[..83]).unwrap();
        let mle = fit(&sub, &FitConfig { npseudo: 0.0, ..FitConfig::default() }).unwrap();
        let full = fit(&table, &FitConfig::default()).unwrap();
        (mle, full)
    });
    let round2 = |x: f64| (x * 100.0).round() / 100.0;
    for (&i, want) in top.iter().zip([4.15, 3.62, 2.08]) {
        c.near(&format!("83-driver {}", items[i]), round2(contrasts(mle.log_worth())[i]), want, 1e-9);
    }
    for (&i, want) in top.iter().zip([3.20, 2.77, 1.91]) {
        c.near(&format!("87-driver {}", items[i]), round2(contrasts(full.log_worth())[i]), want, 1e-9);
    }
    let s = summarize(&full, &Reference::Item(0)).unwrap();
    let new = [(-2.171065, 1.812994), (-1.744754, 1.855365), (-1.590764, 1.881708), (-1.768629, 1.904871)];
    for (coef, (e, se)) in s.coefficients[83..87].iter().zip(new) {
        c.near(&format!("{} estimate", coef.name), coef.estimate, e, 1e-3);
        c.near(&format!("{} se", coef.name), coef.se.unwrap_or(f64::NAN), se, 1e-3);
    }
    let qv = quasi_variances(&full, &Reference::Item(0)).unwrap();
    let (lo, hi) = worst_simple_error(&full, &qv.quasi_var);
    c.check(close(lo, -0.007, 0.005) && close(hi, 0.067, 0.005), format!("simple-contrast errors [{lo:.4}, {hi:.4}]"));
    c.check(elapsed < Duration::from_secs(2), format!("took {elapsed:?}"));
    c.finish(format!("top drivers, new-driver rows, quasi-SE error range, {elapsed:.2?}"))
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for j in 2..=5 {
        for d in 1..=3usize.min(j) {
            let rankings = enumerate_tied_rankings(j, d).unwrap();
            for _ in 0..100 {
                let p = Parameters::new(random_vec(&mut rng, j, 2.0), random_vec(&mut rng, d - 1, 1.5));
                let total: f64 = rankings.iter().map(|r| ranking_log_probability(r, &p).unwrap().exp()).sum();
                worst = worst.max((total - 1.0).abs());
            }
        }
    }
    if worst < 1e-10 {
        Pass(format!("100 draws per (J, D), max |sum - 1| = {worst:.1e}"))
    } else {
        Fail(format!("max |sum - 1| = {worst:e}"))
    }
}

fn criterion_7() -> Outcome {
    let h = 1e-5;
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(700 + seed);
        let j = rng.random_range(2..=5);
        let table = random_table(&mut rng, j, 10, 3);
        let d = table.max_tie_size();
        let p = Parameters::new(random_vec(&mut rng, j, 1.5), random_vec(&mut rng, d - 1, 1.0));
        let events = choice_events(&table, d).unwrap();
        let grad = |p: &Parameters<f64>| -> Vec<f64> {
            let obs = observed_stats(&events, j, d).to_vec();
            let exp = evaluate(&events, p, false).expected.to_vec();
            obs.iter().zip(&exp).map(|(o, e)| o - e).collect()
        };
        let x: Vec<f64> = p.log_worth.iter().chain(&p.log_tie).copied().collect();
        let at = |x: &[f64]| Parameters::new(x[..j].to_vec(), x[j..].to_vec());
        let g = grad(&p);
        let info = evaluate(&events, &p, true).information.unwrap();
        for k in 0..x.len() {
            let (mut xp, mut xm) = (x.clone(), x.clone());
            xp[k] += h;
            xm[k] -= h;
            let fd = (oracle_log_likelihood(&table, &xp[..j], &xp[j..]) - oracle_log_likelihood(&table, &xm[..j], &xm[j..])) / (2.0 * h);
            worst_g = worst_g.max((g[k] - fd).abs() / g[k].abs().max(1.0));
            let (gp, gm) = (grad(&at(&xp)), grad(&at(&xm)));
            for i in 0..x.len() {
                let fd = -(gp[i] - gm[i]) / (2.0 * h);
                worst_h = worst_h.max((info[(i, k)] - fd).abs() / info[(i, k)].abs().max(1.0));
            }
        }
    }
    if worst_g < 1e-6 && worst_h < 1e-4 {
        Pass(format!("50 instances, gradient rel. error {worst_g:.1e}, information rel. error {worst_h:.1e}"))
    } else {
        Fail(format!("gradient {worst_g:e}, information {worst_h:e}"))
    }
}

fn method_gap(table: &RankingsTable<f64>, npseudo: f64) -> f64 {
    let cfg = |method| FitConfig {
        method,
        npseudo,
        tol: 1e-10,
        maxit: 10_000,
        ..FitConfig::default()
    };
    let base = contrasts(fit(table, &cfg(Method::IterativeScaling)).unwrap().log_worth());
    [Method::Bfgs, Method::LBfgs]
        .into_iter()
        .map(|m| max_abs_diff(&contrasts(fit(table, &cfg(m)).unwrap().log_worth()), &base))
        .fold(0.0, f64::max)
}

fn criterion_8() -> Outcome {
    let mut worst = method_gap(&abc(), 0.0).max(method_gap(&abcd(), 0.5));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let j = rng.random_range(3..=8);
        worst = worst.max(method_gap(&random_table(&mut rng, j, 40, 3), 0.5));
    }
    let pudding = pudding();
    if let Some(t) = &pudding {
        worst = worst.max(method_gap(t, 0.0));
    }
    if worst >= 1e-6 {
        Fail(format!("max contrast gap {worst:e}"))
    } else if pudding.is_none() {
        NoData(format!("{NO_PUDDING}; toy and 20 random instances agree (max gap {worst:.1e})"))
    } else {
        Pass(format!("pudding, toy and 20 random instances, max gap {worst:.1e}"))
    }
}

fn criterion_9() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut models = vec![
        fit(&abc(), &FitConfig { npseudo: 0.0, tol: 1e-12, ..FitConfig::default() }).unwrap(),
        fit(&abcd(), &FitConfig { tol: 1e-12, ..FitConfig::default() }).unwrap(),
    ];
    for _ in 0..20 {
        let j = rng.random_range(2..=4);
        let t = random_table(&mut rng, j, 15, 3);
        models.push(fit(&t, &FitConfig { tol: 1e-12, maxit: 5000, ..FitConfig::default() }).unwrap());
    }
    for model in &models {
        let v = vcov(model, &Reference::Item(0)).unwrap();
        let oracle = poisson_vcov(model);
        for a in 1..v.matrix.nrows() {
            for b in 1..v.matrix.nrows() {
                let want = oracle[a - 1][b - 1];
                worst = worst.max((v.matrix[(a, b)] - want).abs() / want.abs().max(1.0));
            }
        }
    }
    if worst < 1e-8 {
        Pass(format!("{} models with at most 4 items, max difference {worst:.1e}", models.len()))
    } else {
        Fail(format!("max difference {worst:e}"))
    }
}

const PLANTED_RUNS: u64 = 100;
const NULL_RUNS: u64 = 1000;

/// 500 groups with one ranking of five items each. Covariate `x` takes 20
/// evenly spaced values and the worths switch regime at `x = 0.5`; `z` and
/// `f` are noise.
fn planted_run(seed: u64) -> (bool, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let low = SamplerConfig::plackett_luce(vec![1.0, 0.5, 0.0, -0.5, -1.0]);
    let high = SamplerConfig::plackett_luce(vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
    let n = 500;
    let x: Vec<f64> = (0..n).map(|_| (rng.random_range(0..20) as f64 + 0.5) / 20.0).collect();
    let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let f: Vec<String> = (0..n).map(|_| ["a", "b", "c", "d"][rng.random_range(0..4)].to_string()).collect();
    let items: Vec<usize> = (0..5).collect();
    let rows: Vec<Vec<u32>> = x
        .iter()
        .map(|&xi| sample_ranking_of(if xi <= 0.5 { &low } else { &high }, &items, &mut rng))
        .collect();
    let table = RankingsTable::from_code_rows(rows, letters(5), vec![1.0; n]).unwrap();
    let grouped = group_rankings(table, &(1..=n).collect::<Vec<_>>()).unwrap();
    let mut frame = CovariateFrame::new();
    frame.push_numeric("x", x.clone()).unwrap();
    frame.push_numeric("z", z).unwrap();
    frame.push_categorical("f", f, false, None).unwrap();
    let cfg = TreeConfig {
        maxdepth: 2,
        ..TreeConfig::default()
    };
    let tree = grow_tree(&grouped, &frame, &cfg).unwrap();
    let lo = x.iter().copied().filter(|&v| v <= 0.5).fold(f64::NEG_INFINITY, f64::max);
    let hi = x.iter().copied().filter(|&v| v > 0.5).fold(f64::INFINITY, f64::min);
    match &tree.node(1).split {
        Some(SplitRule::Numeric { covariate, cutpoint }) if covariate == "x" => (true, *cutpoint >= lo && *cutpoint < hi),
        _ => (false, false),
    }
}

/// Homogeneous data: 200 groups, one ranking of four equally good items
/// each, one numeric and one categorical covariate.
fn null_run(seed: u64) -> bool {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200;
    let cfg = SamplerConfig::plackett_luce(vec![0.0; 4]);
    let rows = sample_rankings(&cfg, n, &mut rng);
    let table = RankingsTable::from_code_rows(rows, letters(4), vec![1.0; n]).unwrap();
    let grouped = group_rankings(table, &(1..=n).collect::<Vec<_>>()).unwrap();
    let mut frame = CovariateFrame::new();
    frame.push_numeric("x", (0..n).map(|_| rng.random::<f64>()).collect()).unwrap();
    frame
        .push_categorical("f", (0..n).map(|_| ["a", "b", "c"][rng.random_range(0..3)].to_string()).collect(), false, None)
        .unwrap();
    let tree = grow_tree(&grouped, &frame, &TreeConfig { maxdepth: 2, ..TreeConfig::default() }).unwrap();
    tree.node(1).split.is_some()
}

fn criterion_10() -> Outcome {
    let mut c = Checks::default();
    let planted: Vec<(bool, bool)> = (0..PLANTED_RUNS).into_par_iter().map(|s| planted_run(10_000 + s)).collect();
    let covariate_hits = planted.iter().filter(|r| r.0).count() as f64 / PLANTED_RUNS as f64;
    let cut_hits = planted.iter().filter(|r| r.1).count() as f64 / PLANTED_RUNS as f64;
    c.check(covariate_hits >= 0.95, format!("split covariate recovered in {:.0}% of runs", 100.0 * covariate_hits));
    c.check(cut_hits >= 0.95, format!("cutpoint in the planted gap in {:.0}% of runs", 100.0 * cut_hits));
    let rejections = (0..NULL_RUNS).into_par_iter().filter(|&s| null_run(20_000 + s)).count();
    let rate = rejections as f64 / NULL_RUNS as f64;
    c.check((0.03..=0.07).contains(&rate), format!("null rejection rate {:.1}%", 100.0 * rate));
    let beans = beans_check();
    if let Some(Err(msg)) = &beans {
        c.check(false, msg.clone());
    }
    let notice = match beans {
        None => "; beans data absent, beans sub-check skipped",
        Some(_) => "; beans tree reproduced",
    };
    c.finish(format!(
        "planted split: covariate {:.0}%, cutpoint {:.0}% of {PLANTED_RUNS} runs; null rejection {:.1}% of {NULL_RUNS}{notice}",
        100.0 * covariate_hits,
        100.0 * cut_hits,
        100.0 * rate
    ))
}

/// Prepared beans data: `beans_rankings.csv` (rank table with a `group`
/// column) and `beans_covariates.csv` (`season`, `year`, `maxTN`).
fn beans_check() -> Option<Result<(), String>> {
    let rankings = data_file("beans_rankings.csv")?;
    let covariates = data_file("beans_covariates.csv")?;
    let opts = RankCsvOptions {
        weight_col: None,
        group_col: Some("group".into()),
    };
    let (table, groups) = read_rank_csv_with::<f64>(std::fs::File::open(rankings).ok()?, &opts).ok()?;
    let grouped = group_rankings(table, &groups?).ok()?;
    let frame = plackett::io::read_covariates_csv(std::fs::File::open(covariates).ok()?, &["year".into()], &[]).ok()?;
    let cfg = TreeConfig {
        maxdepth: 3,
        ..TreeConfig::default()
    };
    let tree = match grow_tree(&grouped, &frame, &cfg) {
        Ok(t) => t,
        Err(e) => return Some(Err(format!("beans tree failed: {e}"))),
    };
    let mut c = Checks::default();
    let maxtn = frame.names().iter().position(|n| n == "maxTN")?;
    let values: Vec<f64> = (0..frame.n_rows())
        .filter_map(|g| match frame.value(maxtn, g) {
            plackett::tree::CovariateValue::Numeric(x) => Some(x),
            _ => None,
        })
        .collect();
    let next_above = values.iter().copied().filter(|&v| v > 18.7175).fold(f64::INFINITY, f64::min);
    match &tree.node(1).split {
        Some(SplitRule::Numeric { covariate, cutpoint }) => {
            c.check(covariate == "maxTN" && *cutpoint >= 18.7175 - 1e-9 && *cutpoint < next_above, format!("root split {covariate} <= {cutpoint}"))
        }
        other => c.check(false, format!("root split {other:?}")),
    }
    match &tree.node(2).split {
        Some(SplitRule::Categorical { covariate, left, right }) => {
            let pr16 = vec!["Pr - 16".to_string()];
            c.check(covariate == "season" && (left == &pr16 || right == &pr16), format!("second split {covariate}: {left:?} | {right:?}"))
        }
        other => c.check(false, format!("second split {other:?}")),
    }
    let mut sizes = tree.leaf_sizes();
    sizes.sort_unstable();
    c.check(sizes == [47, 306, 489], format!("leaf sizes {sizes:?}"));
    let want: [(usize, [f64; 11]); 3] = [
        (47, [0.0, -1.1402562056, -0.7356643306, -1.1986768665, -0.8016667298, 0.1226994334, 0.6378654995, 0.0003316762, 0.4788504910, -1.0636844356, -1.2405493189]),
        (489, [0.0, 0.12989016, 0.21133555, 0.08487525, 0.14435409, -0.16024617, 0.11497038, 0.50611822, 0.63702034, -0.11244954, 0.15430957]),
        (306, [0.0, 0.38374777, 0.43829266, 0.01041950, 0.16107300, 0.02310481, 0.10892957, 0.49692201, 0.26238130, 0.26594548, -0.07345855]),
    ];
    for (n, coefs) in want {
        if let Some(leaf) = tree.leaves().find(|l| l.n() == n) {
            let got = contrasts(leaf.fit.as_ref()?.log_worth());
            c.check(max_abs_diff(&got[..11], &coefs) < 1e-3, format!("leaf n = {n} coefficients {got:?}"));
        }
    }
    Some(match c.finish(String::new()) {
        Pass(_) => Ok(()),
        Fail(m) | NoData(m) => Err(m),
    })
}

/// Aggregates identical rows into weights.
fn aggregate(rows: Vec<Vec<u32>>, items: Vec<String>) -> RankingsTable<f64> {
    let mut counts: std::collections::BTreeMap<Vec<u32>, f64> = Default::default();
    for r in rows {
        *counts.entry(r).or_default() += 1.0;
    }
    let (rows, weights): (Vec<_>, Vec<_>) = counts.into_iter().unzip();
    RankingsTable::from_code_rows(rows, items, weights).unwrap()
}

fn criterion_11() -> Outcome {
    let mut c = Checks::default();
    let (sushi, label) = match data_file("sushi.soc") {
        Some(p) => (read_preflib_soc(p).unwrap().to_rankings::<f64>().unwrap(), "Sushi SOC"),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let cfg = SamplerConfig::plackett_luce(random_vec(&mut rng, 10, 0.5));
            (aggregate(sample_rankings(&cfg, 5000, &mut rng), letters(10)), "sushi.soc absent; synthetic stand-in of the same shape")
        }
    };
    let (model, sushi_time) = timed(|| fit(&sushi, &FitConfig::default()).unwrap());
    c.check(model.converged(), "sushi-shaped fit did not converge");
    c.check(sushi_time <= Duration::from_secs(2), format!("10-item fit took {sushi_time:?}"));

    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let names: Vec<String> = (1..=100).map(|i| format!("item{i}")).collect();
    let cfg = SamplerConfig::with_ties(random_vec(&mut rng, 100, 1.0), vec![(0.3f64).ln(), (0.2f64).ln(), (0.1f64).ln()]);
    let rows = sample_subset_rankings(&cfg, 5000, 10, &mut rng);
    let stress = RankingsTable::from_code_rows(rows, names, vec![1.0; 5000]).unwrap();
    c.check(stress.max_tie_size() == 4, format!("stress data has ties up to {}", stress.max_tie_size()));
    let (result, stress_time) = timed(|| fit(&stress, &FitConfig::default()));
    c.check(result.is_ok(), "stress fit failed");
    c.check(stress_time <= Duration::from_secs(18), format!("stress fit took {stress_time:?}"));
    c.finish(format!(
        "{} unique 10-item rankings in {sushi_time:.2?} ({label}); 5000 sub-rankings of 10 from 100 items, ties up to 4, in {stress_time:.2?}",
        sushi.n_rows()
    ))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("pudding regression", criterion_1),
        ("pudding inference", criterion_2),
        ("pudding quasi-variances", criterion_3),
        ("toy ABCD", criterion_4),
        ("NASCAR", criterion_5),
        ("normalization", criterion_6),
        ("gradient and information", criterion_7),
        ("cross-method consistency", criterion_8),
        ("vcov vs Poisson expansion", criterion_9),
        ("tree properties", criterion_10),
        ("performance", criterion_11),
    ];
    let mut failures = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let line = match run() {
            Pass(msg) => format!("PASS {:>2} {name}: {msg}", k + 1),
            NoData(msg) => format!("FAIL {:>2} {name}: missing data: {msg}", k + 1),
            Fail(msg) => {
                failures += 1;
                format!("FAIL {:>2} {name}: {msg}", k + 1)
            }
        };
        println!("{line}");
    }
    if failures > 0 {
        std::process::exit(1);
    }
}
