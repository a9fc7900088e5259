//! Instance generators shared by the integration tests.
#![allow(dead_code)]

use majorizing::{ChainingFunctional, Measure, MetricOptions, MetricSpace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn matrix(n: usize, d: &[f64]) -> MetricSpace {
    MetricSpace::from_matrix(n, d.to_vec(), MetricOptions::default()).unwrap()
}

pub fn two_point(d: f64) -> MetricSpace {
    matrix(2, &[0.0, d, d, 0.0])
}

pub fn single_point() -> MetricSpace {
    matrix(1, &[0.0])
}

/// All pairwise distances equal to 1.
pub fn uniform_metric(n: usize) -> MetricSpace {
    let d: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
    matrix(n, &d)
}

/// Hub 0 at distance 1 from `leaves` leaves, which are pairwise 2 apart.
pub fn star(leaves: usize) -> MetricSpace {
    let n = leaves + 1;
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                d[i * n + j] = if i == 0 || j == 0 { 1.0 } else { 2.0 };
            }
        }
    }
    matrix(n, &d)
}

/// Random points in the unit cube.
pub fn euclidean(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> MetricSpace {
    let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    MetricSpace::from_points(&pts, MetricOptions::default()).unwrap()
}

/// Shortest-path metric of a random connected weighted graph.
pub fn graph_metric(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    let inf = f64::INFINITY;
    let mut d = vec![inf; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
    }
    let connect = |d: &mut Vec<f64>, i: usize, j: usize, w: f64| {
        d[i * n + j] = d[i * n + j].min(w);
        d[j * n + i] = d[j * n + i].min(w);
    };
    for i in 1..n {
        let j = rng.random_range(0..i);
        let w = rng.random_range(0.1..1.0);
        connect(&mut d, i, j, w);
    }
    for _ in 0..n {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            let w = rng.random_range(0.1..1.0);
            connect(&mut d, i, j, w);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = d[i * n + k] + d[k * n + j];
                if via < d[i * n + j] {
                    d[i * n + j] = via;
                }
            }
        }
    }
    matrix(n, &d)
}

/// Points in the plane arranged in three nested cluster scales.
pub fn clustered(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    let mut pts = Vec::with_capacity(n);
    let top: Vec<[f64; 2]> = (0..3).map(|_| [rng.random::<f64>() * 10.0, rng.random::<f64>() * 10.0]).collect();
    while pts.len() < n {
        let c = top[rng.random_range(0..top.len())];
        let mid = [c[0] + rng.random::<f64>() * 0.4, c[1] + rng.random::<f64>() * 0.4];
        let k = rng.random_range(1..4).min(n - pts.len());
        for _ in 0..k {
            pts.push(vec![mid[0] + rng.random::<f64>() * 0.01, mid[1] + rng.random::<f64>() * 0.01]);
        }
    }
    MetricSpace::from_points(&pts, MetricOptions::default()).unwrap()
}

/// One of the three random families, chosen by `kind % 3`.
pub fn random_space(rng: &mut ChaCha8Rng, kind: usize, n: usize) -> MetricSpace {
    match kind % 3 {
        0 => euclidean(rng, n, 2),
        1 => graph_metric(rng, n),
        _ => clustered(rng, n),
    }
}

/// Random probability vector; with `sparse` about half the weights are zero.
pub fn random_measure(rng: &mut ChaCha8Rng, n: usize, sparse: bool) -> Measure {
    let mut w: Vec<f64> = (0..n)
        .map(|_| if sparse && rng.random::<f64>() < 0.5 { 0.0 } else { -rng.random::<f64>().max(1e-12).ln() })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.random_range(0..n)] = 1.0;
    }
    Measure::normalized(w).unwrap()
}

/// Distances drawn from `[1, 1.2]`; the triangle inequality holds automatically.
pub fn near_uniform(rng: &mut ChaCha8Rng, n: usize) -> MetricSpace {
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = rng.random_range(1.0..1.2);
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    matrix(n, &d)
}

/// `Σ_x ν(x) h(μ(B(x, r)))` and its gradient in `μ`.
pub fn scale_objective(h: &ChainingFunctional, x: &MetricSpace, nu: &[f64], mu: &[f64], r: f64) -> (f64, Vec<f64>) {
    let n = mu.len();
    let mut value = 0.0;
    let mut grad = vec![0.0; n];
    for p in (0..n).filter(|&p| nu[p] > 0.0) {
        let ball: Vec<usize> = (0..n).filter(|&t| x.d(p, t) <= r).collect();
        let mass: f64 = ball.iter().map(|&t| mu[t]).sum();
        value += nu[p] * h.value(mass);
        let slope = if mass >= 1.0 { 0.0 } else { h.slope(mass) };
        for t in ball {
            grad[t] += nu[p] * slope;
        }
    }
    (value, grad)
}

/// Minimizes the right-hand side over `μ` by projected gradient with backtracking.
pub fn minimize_scale(h: &ChainingFunctional, x: &MetricSpace, nu: &[f64], r: f64) -> Measure {
    use majorizing::solve::project_truncated_simplex;
    let n = nu.len();
    let floor = 1e-9 * n as f64;
    let mut mu = vec![1.0 / n as f64; n];
    let (mut f, mut g) = scale_objective(h, x, nu, &mu, r);
    let mut step = 1.0;
    for _ in 0..400 {
        loop {
            let trial: Vec<f64> = mu.iter().zip(&g).map(|(m, d)| m - step * d).collect();
            let trial = project_truncated_simplex(&trial, floor);
            let s: f64 = trial.iter().sum();
            let trial: Vec<f64> = trial.iter().map(|w| w / s).collect();
            let (ft, gt) = scale_objective(h, x, nu, &trial, r);
            if ft <= f - 1e-14 {
                mu = trial;
                f = ft;
                g = gt;
                step *= 2.0;
                break;
            }
            step *= 0.5;
            if step < 1e-18 {
                return Measure::normalized(mu).unwrap();
            }
        }
    }
    Measure::normalized(mu).unwrap()
}
