mod common;

use common::*;
use plackett::fit::{fit, FitConfig, ModelFit};
use plackett::inference::{vcov, Reference};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn check(model: &ModelFit<f64>) {
    let v = vcov(model, &Reference::Item(0)).unwrap();
    let oracle = poisson_vcov(model);
    let j = model.n_items();
    let dim = v.matrix.nrows();
    for a in 1..dim {
        for b in 1..dim {
            let got = v.matrix[(a, b)];
            let want = oracle[a - 1][b - 1];
            assert!((got - want).abs() < 1e-8 * want.abs().max(1.0), "({a},{b}) {got} vs {want}; J={j}");
        }
    }
    for b in 0..dim {
        assert_eq!(v.matrix[(0, b)], 0.0);
    }
}

#[test]
fn toy_maximum_likelihood() {
    check(&fit(&abc(), &FitConfig { npseudo: 0.0, tol: 1e-12, ..FitConfig::default() }).unwrap());
}

#[test]
fn toy_with_pseudo_rankings() {
    check(&fit(&abcd(), &FitConfig { tol: 1e-12, ..FitConfig::default() }).unwrap());
}

#[test]
fn random_small_datasets_with_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let j = rng.random_range(2..=4);
        let table = random_table(&mut rng, j, 15, 3);
        let model = fit(&table, &FitConfig { tol: 1e-12, maxit: 5000, ..FitConfig::default() }).unwrap();
        assert!(model.converged());
        check(&model);
    }
}
