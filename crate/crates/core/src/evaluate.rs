//! The pointwise potential `H(μ, t) = ∫₀^∞ h(μ(B(t, r))) dr` and the primal
//! and dual values built from it.

use rayon::prelude::*;

use crate::error::Result;
use crate::functional::ChainingFunctional;
use crate::metric::{Measure, MetricSpace};

/// Per-point potentials over the support and their aggregate.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct DualValueBreakdown {
    /// `(x, H(ν, x))` for `x` in the support, increasing `x`.
    pub per_point: Vec<(usize, f64)>,
    pub aggregate: f64,
}

/// `H(w, t)` for arbitrary nonnegative weights `w` (not necessarily summing
/// to 1). Exact piecewise integration over the levels of `t`; returns `+∞`
/// when a zero-mass interval of positive length meets an unbounded `h`.
pub fn potential(h: &ChainingFunctional, space: &MetricSpace, w: &[f64], t: usize) -> f64 {
    let radii = space.levels(t);
    let ends = space.level_ends(t);
    let order = space.sorted_neighbors(t);
    let mut total = 0.0;
    let mut mass = 0.0;
    let mut pos = 0usize;
    for j in 0..radii.len() - 1 {
        while pos < ends[j] as usize {
            mass += w[order[pos] as usize];
            pos += 1;
        }
        let v = h.value(mass);
        if v == 0.0 {
            // h vanishes at mass ≥ 1 and stays there, so the remaining terms are zero.
            break;
        }
        if v.is_infinite() {
            return f64::INFINITY;
        }
        total += v * (radii[j + 1] - radii[j]);
    }
    total
}

/// `H(μ, t)`; `+∞` is the zero-mass sentinel.
pub fn h_point(h: &ChainingFunctional, space: &MetricSpace, mu: &Measure, t: usize) -> Result<f64> {
    mu.check_len(space.len())?;
    Ok(potential(h, space, mu.weights(), t))
}

/// Potentials at every point, computed in parallel.
pub fn potentials(h: &ChainingFunctional, space: &MetricSpace, w: &[f64]) -> Vec<f64> {
    (0..space.len()).into_par_iter().map(|t| potential(h, space, w, t)).collect()
}

/// `max_x H(μ, x)`.
pub fn gamma_value(h: &ChainingFunctional, space: &MetricSpace, mu: &Measure) -> Result<f64> {
    mu.check_len(space.len())?;
    Ok(potentials(h, space, mu.weights()).into_iter().fold(0.0, f64::max))
}

fn support_potentials(h: &ChainingFunctional, space: &MetricSpace, nu: &Measure) -> Vec<(usize, f64)> {
    let w = nu.weights();
    nu.support().into_par_iter().map(|x| (x, potential(h, space, w, x))).collect()
}

/// `Σ_x ν(x) H(ν, x)`.
pub fn entropic_dual_value(h: &ChainingFunctional, space: &MetricSpace, nu: &Measure) -> Result<DualValueBreakdown> {
    nu.check_len(space.len())?;
    let per_point = support_potentials(h, space, nu);
    let aggregate = per_point.iter().map(|&(x, v)| nu.weights()[x] * v).sum();
    Ok(DualValueBreakdown { per_point, aggregate })
}

/// `min_{x ∈ supp ν} H(ν, x)`.
pub fn simplified_dual_value(h: &ChainingFunctional, space: &MetricSpace, nu: &Measure) -> Result<DualValueBreakdown> {
    nu.check_len(space.len())?;
    let per_point = support_potentials(h, space, nu);
    let aggregate = per_point.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    Ok(DualValueBreakdown { per_point, aggregate })
}

/// `φ(μ, ν) = Σ_x ν(x) H(μ, x)` for raw weight vectors.
pub fn saddle_value(h: &ChainingFunctional, space: &MetricSpace, mu: &[f64], nu: &[f64]) -> f64 {
    (0..space.len())
        .into_par_iter()
        .filter(|&x| nu[x] > 0.0)
        .map(|x| nu[x] * potential(h, space, mu, x))
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}
