//! Projected subgradient descent/ascent for `min_μ max_ν φ(μ, ν)` with `μ`
//! in the truncated simplex and `ν` in the simplex.

use std::f64::consts::E;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::evaluate::{entropic_dual_value, gamma_value, potentials};
use crate::functional::ChainingFunctional;
use crate::metric::{Measure, MetricSpace};

/// Truncation level of the primal feasible set.
pub const TRUNCATION: f64 = 1.0 - 1.0 / E;

/// Documented bound `gap_estimate ≤ C_GAP · diam` used as the default gap target.
pub const C_GAP: f64 = 3.0;

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SolverParams {
    pub max_iters: usize,
    /// Constant `c` in the step `c·r / (L·√t)`.
    pub step_c: f64,
    /// Stop early once `gap_estimate ≤ gap_target`. `None` runs the full budget.
    pub gap_target: Option<f64>,
    /// Record a trace row every this many iterations (0 disables tracing).
    pub trace_every: usize,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self { max_iters: 1500, step_c: 1.0, gap_target: None, trace_every: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub primal: f64,
    pub dual_proxy: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SaddleSolution {
    pub mu_star: Measure,
    pub nu_star: Measure,
    /// `gamma_value(mu_star)`.
    pub primal_value: f64,
    /// `max(0, (entropic(ν*) − diam/e) / 2)`, a lower bound on `min_μ φ(μ, ν*)`.
    pub dual_proxy: f64,
    pub iterations: usize,
    /// `primal_value − dual_proxy`.
    pub gap_estimate: f64,
    /// Whether `gap_estimate` met the target (`C_GAP · diam` when none was given).
    pub converged: bool,
    pub trace: Vec<TraceRow>,
}

/// Euclidean projection onto `{w : Σw ≤ 1, wᵢ ≥ α/n}`.
pub fn project_truncated_simplex(v: &[f64], alpha: f64) -> Vec<f64> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let lo = alpha / n as f64;
    if v.iter().all(|&x| x >= lo) && v.iter().sum::<f64>() <= 1.0 {
        return v.to_vec();
    }
    let cap = 1.0 - alpha;
    let shifted: Vec<f64> = v.iter().map(|x| x - lo).collect();
    let clipped: Vec<f64> = shifted.iter().map(|x| x.max(0.0)).collect();
    let u = if clipped.iter().sum::<f64>() <= cap {
        clipped
    } else {
        project_simplex_sum(&shifted, cap)
    };
    u.into_iter().map(|x| x + lo).collect()
}

/// Projection onto `{u ≥ 0, Σu = s}` by sorting.
fn project_simplex_sum(v: &[f64], s: f64) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        acc += x;
        let t = (acc - s) / (i + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// Subgradients `(∇_μ φ, ∇_ν φ)` at `(μ, ν)`. `grad_nu[t] = H(μ, t)`.
pub fn subgradient(
    h: &ChainingFunctional,
    space: &MetricSpace,
    mu: &[f64],
    nu: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = space.len();
    let grad_nu = potentials(h, space, mu);
    let rows: Vec<Result<Vec<(u32, f64)>>> = (0..n)
        .into_par_iter()
        .filter(|&x| nu[x] > 0.0)
        .map(|x| mu_row(h, space, mu, x).map(|r| r.into_iter().map(|(t, g)| (t, nu[x] * g)).collect()))
        .collect();
    let mut grad_mu = vec![0.0; n];
    for row in rows {
        for (t, g) in row? {
            grad_mu[t as usize] += g;
        }
    }
    Ok((grad_mu, grad_nu))
}

/// `∂H(μ, x)/∂μ(t)` for every `t`: the suffix sum of `h'(mass)·Δr` over the
/// intervals whose ball already contains `t`.
fn mu_row(h: &ChainingFunctional, space: &MetricSpace, mu: &[f64], x: usize) -> Result<Vec<(u32, f64)>> {
    let radii = space.levels(x);
    let ends = space.level_ends(x);
    let order = space.sorted_neighbors(x);
    let masses = space.cumulative(mu, x);
    let k = radii.len() - 1;
    let mut suffix = vec![0.0; k + 1];
    for j in (0..k).rev() {
        if masses[j] <= 0.0 {
            return Err(Error::Barrier(format!(
                "ball of radius {} around point {x} has zero primal mass",
                radii[j]
            )));
        }
        let slope = if masses[j] >= 1.0 { 0.0 } else { h.slope(masses[j]) };
        suffix[j] = suffix[j + 1] + slope * (radii[j + 1] - radii[j]);
    }
    let mut out = Vec::with_capacity(order.len());
    let mut level = 0;
    for (pos, &t) in order.iter().enumerate() {
        while pos >= ends[level] as usize {
            level += 1;
        }
        out.push((t, suffix[level]));
    }
    Ok(out)
}

/// `max(0, (entropic(ν) − diam/e)/2)`.
pub fn dual_proxy(h: &ChainingFunctional, space: &MetricSpace, nu: &Measure) -> Result<f64> {
    let ent = entropic_dual_value(h, space, nu)?.aggregate;
    Ok(((ent - space.diameter() / E) / 2.0).max(0.0))
}

pub fn solve_saddle_point(h: &ChainingFunctional, space: &MetricSpace, params: &SolverParams) -> Result<SaddleSolution> {
    let n = space.len();
    let diam = space.diameter();
    let uniform = Measure::uniform(n);
    let target = params.gap_target.unwrap_or(C_GAP * diam);
    if n == 1 || diam == 0.0 {
        return Ok(SaddleSolution {
            mu_star: uniform.clone(),
            nu_star: uniform,
            primal_value: 0.0,
            dual_proxy: 0.0,
            iterations: 0,
            gap_estimate: 0.0,
            converged: true,
            trace: Vec::new(),
        });
    }

    // Diameter of the simplex, the `r` in the step rule.
    let radius = std::f64::consts::SQRT_2;
    let mut mu = uniform.weights().to_vec();
    let mut nu = uniform.weights().to_vec();
    let mut mu_sum = vec![0.0; n];
    let mut nu_sum = vec![0.0; n];
    let mut lipschitz = 0.0f64;

    let mut best_mu = uniform.clone();
    let mut best_primal = gamma_value(h, space, &uniform)?;
    let mut nu_bar = uniform.clone();
    let mut proxy = dual_proxy(h, space, &nu_bar)?;
    let mut trace = Vec::new();
    let mut iterations = 0;

    for t in 1..=params.max_iters {
        iterations = t;
        let (gm, gn) = subgradient(h, space, &mu, &nu)?;
        for i in 0..n {
            mu_sum[i] += mu[i];
            nu_sum[i] += nu[i];
        }
        let norm = gm.iter().chain(&gn).map(|g| g * g).sum::<f64>().sqrt();
        // Running estimate of the Lipschitz constant from observed subgradients.
        lipschitz = lipschitz.max(norm);
        if lipschitz == 0.0 {
            break;
        }
        let step = params.step_c * radius / (lipschitz * (t as f64).sqrt());
        let mu_next: Vec<f64> = mu.iter().zip(&gm).map(|(m, g)| m - step * g).collect();
        let nu_next: Vec<f64> = nu.iter().zip(&gn).map(|(v, g)| v + step * g).collect();
        mu = project_truncated_simplex(&mu_next, TRUNCATION);
        nu = project_truncated_simplex(&nu_next, 0.0);

        let mu_avg = Measure::normalized(mu_sum.clone())?;
        let primal = gamma_value(h, space, &mu_avg)?;
        if primal < best_primal {
            best_primal = primal;
            best_mu = mu_avg;
        }
        let record = params.trace_every > 0 && t % params.trace_every == 0;
        let check = params.gap_target.is_some() || record || t == params.max_iters;
        if check {
            nu_bar = Measure::normalized(nu_sum.clone())?;
            proxy = dual_proxy(h, space, &nu_bar)?;
        }
        if record {
            trace.push(TraceRow { iteration: t, primal: best_primal, dual_proxy: proxy });
        }
        if params.gap_target.is_some() && best_primal - proxy <= target {
            break;
        }
    }
    if iterations > 0 {
        nu_bar = Measure::normalized(nu_sum)?;
        proxy = dual_proxy(h, space, &nu_bar)?;
    }
    let gap = best_primal - proxy;
    Ok(SaddleSolution {
        mu_star: best_mu,
        nu_star: nu_bar,
        primal_value: best_primal,
        dual_proxy: proxy,
        iterations,
        gap_estimate: gap,
        converged: gap <= target,
        trace,
    })
}
