mod common;

use common::*;
use plackett::fit::{fit, FitConfig, Method};
use plackett::rankings::RankingsTable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn exact(method: Method, npseudo: f64) -> FitConfig<f64> {
    FitConfig {
        method,
        npseudo,
        tol: 1e-10,
        maxit: 10_000,
        ..FitConfig::default()
    }
}

fn agree(table: &RankingsTable<f64>, npseudo: f64) {
    let base = fit(table, &exact(Method::IterativeScaling, npseudo)).unwrap();
    assert!(base.converged());
    let c0 = contrasts(base.log_worth());
    for method in [Method::Bfgs, Method::LBfgs] {
        let other = fit(table, &exact(method, npseudo)).unwrap();
        let c = contrasts(other.log_worth());
        assert!(max_abs_diff(&c, &c0) < 1e-6, "{method}: {c:?} vs {c0:?}");
        let t0: Vec<f64> = base.tie().iter().map(|t| t.1).collect();
        let t: Vec<f64> = other.tie().iter().map(|t| t.1).collect();
        assert!(max_abs_diff(&t, &t0) < 1e-6, "{method}: ties {t:?} vs {t0:?}");
    }
}

#[test]
fn methods_agree_on_toy_data() {
    agree(&abc(), 0.0);
    agree(&abcd(), 0.5);
}

#[test]
fn methods_agree_on_random_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..20 {
        let j = rng.random_range(3..=8);
        let table = random_table(&mut rng, j, 40, 3);
        agree(&table, 0.5);
    }
}

#[test]
fn item_order_does_not_matter() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let table = random_table(&mut rng, 6, 60, 2);
    let perm = [3usize, 0, 5, 1, 4, 2];
    let rows: Vec<Vec<i64>> = table.rows().map(|r| perm.iter().map(|&p| r[p] as i64).collect()).collect();
    let items: Vec<String> = perm.iter().map(|&p| table.items()[p].clone()).collect();
    let permuted = RankingsTable::from_rank_matrix(&rows, items).unwrap().with_weights(table.weights().to_vec()).unwrap();
    let a = fit(&table, &exact(Method::IterativeScaling, 0.5)).unwrap();
    let b = fit(&permuted, &exact(Method::IterativeScaling, 0.5)).unwrap();
    for (k, &p) in perm.iter().enumerate() {
        assert!((b.worth()[k] - a.worth()[p]).abs() < 1e-9);
    }
}

#[test]
fn integer_weights_equal_repeated_rows() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let table = random_table(&mut rng, 5, 30, 2);
    let mut rows = Vec::new();
    for r in 0..table.n_rows() {
        for _ in 0..table.weight(r) as usize {
            rows.push(table.row(r).iter().map(|&c| c as i64).collect::<Vec<i64>>());
        }
    }
    let expanded = RankingsTable::from_rank_matrix(&rows, table.items().to_vec()).unwrap();
    let a = fit(&table, &exact(Method::IterativeScaling, 0.5)).unwrap();
    let b = fit(&expanded, &exact(Method::IterativeScaling, 0.5)).unwrap();
    assert!(max_abs_diff(&a.worth(), &b.worth()) < 1e-9);
    assert!((a.log_likelihood() - b.log_likelihood()).abs() < 1e-8);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let table = random_table(&mut rng, 10, 2000, 3);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| fit(&table, &FitConfig::default()).unwrap())
    };
    let one = run(1);
    for threads in [2, 4, 7] {
        let many = run(threads);
        assert_eq!(one.log_worth(), many.log_worth());
        assert_eq!(one.log_likelihood().to_bits(), many.log_likelihood().to_bits());
        assert_eq!(one.iterations(), many.iterations());
    }
}

#[test]
fn single_precision_tracks_double() {
    let t64 = abcd();
    let rows: Vec<Vec<i64>> = t64.rows().map(|r| r.iter().map(|&c| c as i64).collect()).collect();
    let t32 = RankingsTable::<f32>::from_rank_matrix(&rows, t64.items().to_vec()).unwrap();
    let a = fit(&t64, &FitConfig::default()).unwrap();
    let b = fit(&t32, &FitConfig::default()).unwrap();
    for (x, y) in a.log_worth().iter().zip(b.log_worth()) {
        assert!((x - *y as f64).abs() < 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn scaling_all_weights_keeps_the_estimate(seed in 0u64..1000, scale in 0.25f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_table(&mut rng, 4, 20, 2);
        let scaled = table.clone().with_weights(table.weights().iter().map(|w| w * scale).collect()).unwrap();
        let cfg = exact(Method::IterativeScaling, 0.0);
        if let (Ok(a), Ok(b)) = (fit(&table, &cfg), fit(&scaled, &cfg)) {
            prop_assert!(max_abs_diff(&a.worth(), &b.worth()) < 1e-7);
        }
    }

    #[test]
    fn fitted_worths_are_normalized(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let table = random_table(&mut rng, 5, 15, 3);
        let f = fit(&table, &FitConfig::default()).unwrap();
        let total: f64 = f.worth().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }
}
