mod common;

use std::sync::Arc;

use clipreg::adversary::{
    ascend, ascend_values, correlation, invisibility_audit, sigma_dr, Budget, DictSpec,
};
use clipreg::measure::{
    build_quadrature, sigma_l1, Constant, FnOracle, FunctionOracle, Quadrature,
};
use clipreg::netcore::{ClipUnit, DomainSpec, RepNet};
use common::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn domain(n: usize) -> DomainSpec {
    DomainSpec::new(n, 1.0).unwrap()
}

fn ld(n: usize, size: usize) -> Quadrature {
    build_quadrature(&domain(n), "low-discrepancy", size, 5).unwrap()
}

fn budget(restarts: usize) -> Budget {
    Budget {
        restarts,
        ..Budget::default()
    }
}

fn planted(n: usize, seed: u64) -> RepNet {
    RepNet::random(n, 1.0, &[], &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

/// `max |⟨β(a·w + c), t⟩|` over `a ∈ [-1,1]`, `c ∈ [-2,2]` at step 0.005.
fn brute_force_unit(quad: &Quadrature, t: &dyn Fn(f64) -> f64) -> f64 {
    let xs: Vec<f64> = quad.nodes().map(|x| x[0]).collect();
    let tv: Vec<f64> = xs.iter().map(|&x| t(x)).collect();
    let mut best: f64 = 0.0;
    for i in 0..=400 {
        let a = -1.0 + 0.005 * i as f64;
        for j in 0..=800 {
            let c = -2.0 + 0.005 * j as f64;
            let mut s = 0.0;
            for ((x, tv), mu) in xs.iter().zip(&tv).zip(quad.weights()) {
                s += mu * clamp1(a * x + c) * tv;
            }
            best = best.max(s.abs());
        }
    }
    best
}

#[test]
fn correlation_examples() {
    let q = build_quadrature(&domain(1), "tensor-grid", 16, 0).unwrap();
    let w1 = RepNet::single(1, 1.0, ClipUnit::new(vec![1.0], 0.0, 1.0).unwrap()).unwrap();
    let zero = Constant { n: 1, value: 0.0 };
    assert_eq!(correlation(&q, &w1, &zero).unwrap(), 0.0);
    assert!((correlation(&q, &w1, &w1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let one = RepNet::constant(1, 1.0, 1.0).unwrap();
    let odd = FnOracle::new(1, "odd", |w: &[f64]| w[0].powi(3));
    assert!(correlation(&q, &one, &odd).unwrap().abs() < 1e-15);
}

#[test]
fn zero_target_gives_zero() {
    let q = ld(2, 512);
    let spec = DictSpec::new(2, 1, domain(2)).unwrap();
    let r = ascend(&q, &spec, &Constant { n: 2, value: 0.0 }, &budget(4), 1).unwrap();
    assert_eq!(r.value, 0.0);
    assert_eq!(r.estimate, "lower-bound");
}

#[test]
fn planted_unit_is_matched() {
    let q = ld(2, 4096);
    let spec = DictSpec::new(1, 0, domain(2)).unwrap();
    for seed in [1, 2, 3] {
        let phi = planted(2, seed);
        let planted_value = naive_norm_sq(&q, &phi);
        let r = ascend(&q, &spec, &phi, &budget(64), seed).unwrap();
        assert!(
            r.value >= planted_value - 0.01,
            "seed {seed}: {} < {planted_value} - 0.01",
            r.value
        );
    }
}

#[test]
fn oscillating_target_matches_brute_force_grid() {
    let q = ld(1, 1024);
    let t = |x: f64| (8.0 * std::f64::consts::PI * x).sin();
    let target = FnOracle::new(1, "sin(8 pi w)", move |w: &[f64]| t(w[0]));
    let spec = DictSpec::new(1, 0, domain(1)).unwrap();
    let r = ascend(&q, &spec, &target, &budget(64), 8).unwrap();
    let grid = brute_force_unit(&q, &t);
    assert!(
        (r.value - grid).abs() <= 0.01,
        "ascent {} vs grid {grid}",
        r.value
    );
}

#[test]
fn distinct_piecewise_constants_are_separated() {
    // f − g is the indicator-like step on [0.2, 0.6); some unit must see it.
    let q = ld(1, 1024);
    let f = |x: f64| if x < 0.2 { -0.5 } else { 0.5 };
    let g = |x: f64| if x < 0.6 { -0.5 } else { 0.5 };
    let fo: FunctionOracle = Arc::new(FnOracle::new(1, "f", move |w: &[f64]| f(w[0])));
    let go: FunctionOracle = Arc::new(FnOracle::new(1, "g", move |w: &[f64]| g(w[0])));
    let spec = DictSpec::new(1, 0, domain(1)).unwrap();
    let r = sigma_dr(&q, &spec, fo, go, &budget(16), 3).unwrap();
    let grid = brute_force_unit(&q, &|x| f(x) - g(x));
    assert!(grid > 0.0);
    assert!(r.value > 0.0);
    assert!(r.value >= grid - 0.01);
}

#[test]
fn witness_is_valid_and_reproducible() {
    let q = ld(3, 2048);
    let spec = DictSpec::new(2, 1, domain(3)).unwrap();
    let target = FnOracle::new(3, "t", |w: &[f64]| (w[0] * w[1] * 3.0).sin());
    let r = ascend(&q, &spec, &target, &budget(6), 4).unwrap();
    assert!(r.witness.satisfies(&spec.cert()));
    assert_eq!(r.per_restart_values.len(), 6);
    assert_eq!(r.restarts_run, 6);
    let best = r
        .per_restart_values
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(r.value, best);
    let recomputed = naive_inner(&q, &r.witness, &target);
    assert!(recomputed >= 0.0, "witness must be oriented");
    assert!((recomputed - r.value).abs() <= 1e-10);
}

#[test]
fn injected_witness_makes_dictionary_growth_monotone() {
    let q = ld(2, 2048);
    let target = FnOracle::new(
        2,
        "t",
        |w: &[f64]| if w[0] * w[1] > 0.1 { 1.0 } else { -0.3 },
    );
    let values = q.sample(&target).unwrap();
    let b = budget(4);
    let small = DictSpec::new(1, 1, domain(2)).unwrap();
    let r_small = ascend_values(&q, &small, &values, &b, 9, &[]).unwrap();
    for (d, r) in [(2, 1), (3, 1), (2, 2)] {
        let big = DictSpec::new(d, r, domain(2)).unwrap();
        let r_big = ascend_values(
            &q,
            &big,
            &values,
            &b,
            9,
            std::slice::from_ref(&r_small.witness),
        )
        .unwrap();
        assert!(
            r_big.value >= r_small.value - 1e-12,
            "({d}|{r}): {} < {}",
            r_big.value,
            r_small.value
        );
    }
}

#[test]
fn audit_examples() {
    let q = ld(2, 4096);
    let spec = DictSpec::new(1, 0, domain(2)).unwrap();
    let zero = Constant { n: 2, value: 0.0 };
    for eps in [0.0, 0.1, 1.0] {
        let a = invisibility_audit(&q, &spec, &zero, eps, &budget(4), 1).unwrap();
        assert!(a.invisible_up_to_budget);
        assert!(a.verdict.contains("not a proof"));
    }
    let phi = RepNet::single(2, 1.0, ClipUnit::new(vec![1.0, 0.0], 0.0, 1.0).unwrap()).unwrap();
    assert!((naive_norm_sq(&q, &phi) - 1.0 / 3.0).abs() < 1e-3);
    let a = invisibility_audit(&q, &spec, &phi, 0.1, &budget(16), 1).unwrap();
    assert!(!a.invisible_up_to_budget);
    assert!(a.result.value >= 1.0 / 3.0 - 0.01);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let q = ld(2, 2048);
    let spec = DictSpec::new(2, 1, domain(2)).unwrap();
    let target = FnOracle::new(2, "t", |w: &[f64]| (3.0 * w[0] - w[1]).cos());
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| ascend(&q, &spec, &target, &budget(6), 77).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one, four);
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&four).unwrap()
    );
}

fn random_pair(seed: u64, n: usize) -> (FunctionOracle, FunctionOracle) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hidden = random_hidden(&mut rng, 1, 2);
    let f: FunctionOracle = Arc::new(RepNet::random(n, 1.0, &hidden, &mut rng).unwrap());
    let k = 1.0 + (seed % 5) as f64;
    let g: FunctionOracle = Arc::new(FnOracle::new(n, "g", move |w: &[f64]| (k * w[0]).sin()));
    (f, g)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn sigma_dr_is_symmetric_and_below_twice_sigma(seed in any::<u64>(), n in 1usize..3) {
        let q = ld(n, 512);
        let spec = DictSpec::new(1, 0, domain(n)).unwrap();
        let (f, g) = random_pair(seed, n);
        let b = Budget { restarts: 4, iterations: 100, ..Budget::default() };
        let fg = sigma_dr(&q, &spec, f.clone(), g.clone(), &b, seed).unwrap();
        let gf = sigma_dr(&q, &spec, g.clone(), f.clone(), &b, seed).unwrap();
        prop_assert_eq!(fg.value, gf.value);
        let l1 = sigma_l1(&q, f.as_ref(), g.as_ref()).unwrap();
        prop_assert!(fg.value <= 2.0 * l1 + 1e-9);
        prop_assert!(fg.value >= 0.0);
    }

    #[test]
    fn identical_functions_are_at_distance_zero(seed in any::<u64>()) {
        let q = ld(2, 256);
        let spec = DictSpec::new(1, 0, domain(2)).unwrap();
        let (f, _) = random_pair(seed, 2);
        let b = Budget { restarts: 2, iterations: 20, ..Budget::default() };
        prop_assert_eq!(sigma_dr(&q, &spec, f.clone(), f, &b, 1).unwrap().value, 0.0);
    }
}
