mod common;

use std::f64::consts::{E, LN_2};

use common::*;
use majorizing::evaluate::saddle_value;
use majorizing::solve::{project_truncated_simplex, subgradient, TRUNCATION};
use majorizing::{gamma_value, solve_saddle_point, ChainingFunctional, Error, Measure, SolverParams};
use proptest::prelude::*;
use rand::Rng;

fn exp1() -> ChainingFunctional {
    ChainingFunctional::exponential(1.0).unwrap()
}

fn feasible(w: &[f64], alpha: f64) -> bool {
    let lo = alpha / w.len() as f64;
    w.iter().sum::<f64>() <= 1.0 + 1e-12 && w.iter().all(|&x| x >= lo - 1e-12)
}

/// Random point of the truncated simplex with every weight ≥ (1 − 1/e)/n.
fn interior(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw = random_measure_weights(rng, n);
    let lo = TRUNCATION / n as f64;
    raw.iter().map(|w| lo + (1.0 - TRUNCATION) * w).collect()
}

fn random_measure_weights(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

#[test]
fn projection_examples() {
    assert_eq!(project_truncated_simplex(&[0.25, 0.75], 0.0), vec![0.25, 0.75]);
    assert_eq!(project_truncated_simplex(&[0.4, 0.25, 0.35], TRUNCATION), vec![0.4, 0.25, 0.35]);
    assert_eq!(project_truncated_simplex(&[2.0, 0.0], 0.0), vec![1.0, 0.0]);
    let p = project_truncated_simplex(&[1.0, 0.0], TRUNCATION);
    let half = TRUNCATION / 2.0;
    assert!((half - 0.3161).abs() < 1e-4);
    assert!((p[0] - (1.0 - half)).abs() < 1e-12 && (p[1] - half).abs() < 1e-12, "{p:?}");
}

#[test]
fn projection_matches_brute_force_grid() {
    let mut r = rng(5);
    let steps = 2000;
    for _ in 0..20 {
        let v = [r.random_range(-1.0..2.0), r.random_range(-1.0..2.0)];
        let p = project_truncated_simplex(&v, TRUNCATION);
        let lo = TRUNCATION / 2.0;
        let dist = |w: [f64; 2]| (w[0] - v[0]).powi(2) + (w[1] - v[1]).powi(2);
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps {
                let w = [lo + (1.0 - 2.0 * lo) * i as f64 / steps as f64, lo + (1.0 - 2.0 * lo) * j as f64 / steps as f64];
                if w[0] + w[1] <= 1.0 {
                    best = best.min(dist(w));
                }
            }
        }
        assert!(feasible(&p, TRUNCATION));
        assert!(dist([p[0], p[1]]) <= best + 1e-12);
        assert!(best - dist([p[0], p[1]]) < 1e-3);
    }
}

#[test]
fn subgradient_examples() {
    let h = exp1();
    let (gm, gn) = subgradient(&h, &two_point(1.0), &[0.5, 0.5], &[0.9, 0.1]).unwrap();
    assert!((gn[0] - LN_2).abs() < 1e-15 && (gn[1] - LN_2).abs() < 1e-15);
    assert_eq!(gm.len(), 2);
    assert_eq!(subgradient(&h, &single_point(), &[1.0], &[1.0]).unwrap(), (vec![0.0], vec![0.0]));
    assert!(matches!(subgradient(&h, &two_point(1.0), &[1.0, 0.0], &[0.5, 0.5]), Err(Error::Barrier(_))));
}

#[test]
fn subgradient_matches_finite_differences() {
    let mut r = rng(17);
    for h in [exp1(), ChainingFunctional::gaussian()] {
        for trial in 0..5 {
            let n = 2 + trial % 5;
            let x = random_space(&mut r, trial, n);
            let mu = interior(&mut r, n);
            let nu = random_measure_weights(&mut r, n);
            let (gm, gn) = subgradient(&h, &x, &mu, &nu).unwrap();
            let scale = gm.iter().fold(0.0f64, |a, g| a.max(g.abs()));
            for t in 0..n {
                let step = 1e-6;
                let mut up = mu.clone();
                let mut down = mu.clone();
                up[t] += step;
                down[t] -= step;
                let fd = (saddle_value(&h, &x, &up, &nu) - saddle_value(&h, &x, &down, &nu)) / (2.0 * step);
                assert!((fd - gm[t]).abs() <= 1e-4 * gm[t].abs().max(1e-3 * scale), "{h} t={t}: fd {fd} vs {}", gm[t]);

                let mut e = vec![0.0; n];
                e[t] = step;
                let nu_up: Vec<f64> = nu.iter().zip(&e).map(|(a, b)| a + b).collect();
                let nu_down: Vec<f64> = nu.iter().zip(&e).map(|(a, b)| a - b).collect();
                let fd = (saddle_value(&h, &x, &mu, &nu_up) - saddle_value(&h, &x, &mu, &nu_down)) / (2.0 * step);
                assert!((fd - gn[t]).abs() <= 1e-6 * gn[t].abs().max(1.0));
            }
        }
    }
}

#[test]
fn lipschitz_sanity() {
    let mut r = rng(23);
    let h = exp1();
    for trial in 0..30 {
        let n = 2 + trial % 20;
        let x = random_space(&mut r, trial, n);
        let mu = interior(&mut r, n);
        let nu = random_measure_weights(&mut r, n);
        let (gm, gn) = subgradient(&h, &x, &mu, &nu).unwrap();
        let norm = gm.iter().chain(&gn).map(|g| g * g).sum::<f64>().sqrt();
        assert!(norm <= 10.0 * (n as f64).powf(1.5) * x.diameter());
    }
}

#[test]
fn truncation_costs_at_most_one_diameter() {
    let mut r = rng(29);
    let cost = (1.0 / (1.0 - TRUNCATION)).ln();
    assert!((cost - 1.0).abs() < 1e-15);
    for h in [exp1(), ChainingFunctional::gaussian()] {
        for trial in 0..100 {
            let n = 1 + trial % 16;
            let x = random_space(&mut r, trial, n);
            let mu = random_measure(&mut r, n, trial % 2 == 0);
            let mixed: Vec<f64> = mu.weights().iter().map(|w| (1.0 - TRUNCATION) * w + TRUNCATION / n as f64).collect();
            let mixed = Measure::normalized(mixed).unwrap();
            let before = gamma_value(&h, &x, &mu).unwrap();
            let after = gamma_value(&h, &x, &mixed).unwrap();
            assert!(after <= before + x.diameter() * cost + 1e-9);
        }
    }
}

#[test]
fn single_point_needs_no_iterations() {
    let sol = solve_saddle_point(&exp1(), &single_point(), &SolverParams::default()).unwrap();
    assert_eq!(sol.primal_value, 0.0);
    assert_eq!(sol.iterations, 0);
    assert!(sol.converged);
}

#[test]
fn symmetric_instances_reach_the_uniform_optimum() {
    let h = exp1();
    let cases = [(two_point(1.0), 2usize), (uniform_metric(3), 3), (uniform_metric(8), 8), (uniform_metric(16), 16), (two_point(2.5), 2)];
    for (x, n) in cases {
        let sol = solve_saddle_point(&h, &x, &SolverParams::default()).unwrap();
        let worst = sol.mu_star.weights().iter().map(|w| (w - 1.0 / n as f64).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.02, "n={n}: {worst}");
        let optimum = x.diameter() * (n as f64).ln();
        assert!((sol.primal_value - optimum).abs() <= 0.1 * x.diameter(), "n={n}: {}", sol.primal_value);
        assert!(sol.primal_value - sol.dual_proxy <= sol.gap_estimate + 1e-12);
        assert!(sol.converged);
    }
}

#[test]
fn solver_output_is_feasible_and_deterministic() {
    let mut r = rng(31);
    let h = exp1();
    let params = SolverParams { max_iters: 300, trace_every: 50, ..SolverParams::default() };
    for trial in 0..6 {
        let n = 3 + 4 * trial;
        let x = random_space(&mut r, trial, n);
        let a = solve_saddle_point(&h, &x, &params).unwrap();
        let b = solve_saddle_point(&h, &x, &params).unwrap();
        assert_eq!(a.mu_star, b.mu_star);
        assert_eq!(a.primal_value, b.primal_value);
        assert!(a.mu_star.weights().iter().all(|&w| w >= TRUNCATION / n as f64 - 1e-12));
        assert!((a.primal_value - gamma_value(&h, &x, &a.mu_star).unwrap()).abs() <= 1e-12);
        assert!(a.primal_value >= a.dual_proxy - 1e-9);
        assert_eq!(a.trace.len(), 6);
        assert!(a.trace.windows(2).all(|w| w[1].primal <= w[0].primal));
        let proxy = ((majorizing::entropic_dual_value(&h, &x, &a.nu_star).unwrap().aggregate - x.diameter() / E) / 2.0).max(0.0);
        assert!((proxy - a.dual_proxy).abs() <= 1e-12);
    }
}

proptest! {
    #[test]
    fn projection_is_feasible_and_idempotent(v in prop::collection::vec(-3.0f64..3.0, 1..12), alpha in 0.0f64..0.99) {
        let p = project_truncated_simplex(&v, alpha);
        prop_assert!(feasible(&p, alpha));
        let q = project_truncated_simplex(&p, alpha);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn projection_is_nearest_among_random_feasible_points(v in prop::collection::vec(-2.0f64..2.0, 2..6), seed in 0u64..1000) {
        let mut r = rng(seed);
        let alpha = TRUNCATION;
        let n = v.len();
        let p = project_truncated_simplex(&v, alpha);
        let d = |w: &[f64]| w.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        for _ in 0..50 {
            let s = r.random_range(0.0..1.0);
            let w: Vec<f64> = random_measure_weights(&mut r, n).iter().map(|x| alpha / n as f64 + s * (1.0 - alpha) * x).collect();
            prop_assert!(d(&p) <= d(&w) + 1e-12);
        }
    }
}
