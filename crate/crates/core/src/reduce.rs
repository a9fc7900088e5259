//! Dual simplification: greedy conditioning of `ν` onto a subset whose
//! simplified dual tracks the entropic dual, the principal sequence of a
//! weighted bipartite graph, and the per-scale comparison it certifies.

use std::f64::consts::E;

use crate::error::{domain, validation, Error, Result};
use crate::evaluate::potential;
use crate::functional::ChainingFunctional;
use crate::metric::{Measure, MetricSpace};

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConditioningResult {
    /// The retained subset `S ⊆ supp ν`, increasing.
    pub set: Vec<usize>,
    /// `ν` conditioned on `S`.
    pub nu_s: Measure,
    /// `min_{x ∈ S} H(ν_S, x)`.
    pub achieved_min: f64,
    /// Evicted points in eviction order.
    pub removed_order: Vec<usize>,
    /// `H(ν_S, ν_S)` before each eviction and at termination; `history[0] = H(ν, ν)`.
    pub history: Vec<f64>,
}

impl ConditioningResult {
    pub fn initial_entropic(&self) -> f64 {
        self.history[0]
    }

    /// Largest drop of `H(ν_S, ν_S)` between consecutive steps (0 if monotone).
    pub fn worst_decrease(&self) -> f64 {
        self.history.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
    }
}

/// Repeatedly evicts the point of smallest potential while
/// `H(ν_S, ν_S) > min_{x ∈ S} H(ν_S, x) + diam`.
pub fn condition_dual(h: &ChainingFunctional, space: &MetricSpace, nu: &Measure) -> Result<ConditioningResult> {
    nu.check_len(space.len())?;
    let mut set = nu.support();
    if set.is_empty() {
        return Err(domain("conditioning needs a measure with nonempty support"));
    }
    let diam = space.diameter();
    let mut removed_order = Vec::new();
    let mut history = Vec::new();
    loop {
        let nu_s = nu.condition(&set)?;
        let w = nu_s.weights();
        let per: Vec<f64> = {
            use rayon::prelude::*;
            set.par_iter().map(|&x| potential(h, space, w, x)).collect()
        };
        let ent: f64 = set.iter().zip(&per).map(|(&x, v)| w[x] * v).sum();
        history.push(ent);
        // Strict `<` keeps the smallest index among tied minimizers.
        let (arg, min) = per.iter().enumerate().fold((0, f64::INFINITY), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
        if ent <= min + diam {
            return Ok(ConditioningResult { set, nu_s, achieved_min: min, removed_order, history });
        }
        removed_order.push(set.remove(arg));
    }
}

/// Bipartite graph with left part `X₁` and right part `X₂`.
#[derive(Debug, Clone)]
pub struct Bipartite {
    pub right: usize,
    /// `adj[x]` lists the right neighbours of left vertex `x`.
    pub adj: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct PrincipalSequence {
    /// `S₁ ⊂ S₂ ⊂ … ⊂ S_k = X₁`, each increasing.
    pub sets: Vec<Vec<usize>>,
    pub betas: Vec<f64>,
}

/// Default cap on `|X₁|` for exhaustive enumeration.
pub const PRINCIPAL_CAP: usize = 14;

struct Tables {
    nbr: Vec<u64>,
    mass: Vec<f64>,
}

fn tables(g: &Bipartite, mu: &[f64]) -> Tables {
    let m = g.adj.len();
    let mut nbr = vec![0u64; 1 << m];
    let mut mass = vec![0.0; 1 << m];
    let single: Vec<u64> = g.adj.iter().map(|a| a.iter().fold(0u64, |acc, &y| acc | 1 << y)).collect();
    for s in 1usize..1 << m {
        let low = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        nbr[s] = nbr[rest] | single[low];
        mass[s] = mass[rest] + mu[low];
    }
    Tables { nbr, mass }
}

fn right_mass(nu: &[f64], mut mask: u64) -> f64 {
    let mut total = 0.0;
    while mask != 0 {
        total += nu[mask.trailing_zeros() as usize];
        mask &= mask - 1;
    }
    total
}

fn mask_to_vec(mask: usize) -> Vec<usize> {
    (0..usize::BITS as usize).filter(|&i| mask >> i & 1 == 1).collect()
}

/// Nonempty submasks of `r`.
fn submasks(r: usize) -> impl Iterator<Item = usize> {
    let mut s = r;
    let mut done = r == 0;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let out = s;
        s = (s - 1) & r;
        done = s == 0;
        Some(out)
    })
}

fn check_bipartite(g: &Bipartite, mu: &[f64], nu: &[f64], cap: usize) -> Result<()> {
    let m = g.adj.len();
    if m > cap || m > 20 {
        return Err(Error::Size(format!("|X₁| = {m} exceeds the enumeration cap {}", cap.min(20))));
    }
    if g.right > 64 {
        return Err(Error::Size(format!("|X₂| = {} exceeds 64", g.right)));
    }
    if mu.len() != m || nu.len() != g.right {
        return Err(domain("measure lengths do not match the bipartite graph"));
    }
    let mut seen = vec![false; g.right];
    for (x, a) in g.adj.iter().enumerate() {
        if a.is_empty() {
            return Err(domain(format!("left vertex {x} is isolated")));
        }
        for &y in a {
            if y >= g.right {
                return Err(domain(format!("edge ({x}, {y}) leaves the right part")));
            }
            seen[y] = true;
        }
    }
    if let Some(y) = seen.iter().position(|s| !s) {
        return Err(domain(format!("right vertex {y} is isolated")));
    }
    if mu.iter().any(|&w| !(w > 0.0)) || nu.iter().any(|&w| !(w > 0.0)) {
        return Err(domain("μ must be positive on X₁ and ν positive on X₂"));
    }
    Ok(())
}

/// Builds the principal sequence by exhaustive enumeration: at each step
/// `βᵢ` is the least ratio `ν(N(S') ∖ N(S_{i−1})) / μ(S')` over nonempty
/// `S' ⊆ X₁ ∖ S_{i−1}`, and the union of all minimizers is added.
pub fn principal_sequence(g: &Bipartite, mu: &[f64], nu: &[f64], cap: usize) -> Result<PrincipalSequence> {
    check_bipartite(g, mu, nu, cap)?;
    let m = g.adj.len();
    let t = tables(g, mu);
    let full = (1usize << m) - 1;
    let mut done = 0usize;
    let mut sets = Vec::new();
    let mut betas = Vec::new();
    while done != full {
        let rest = full & !done;
        let blocked = t.nbr[done];
        let ratio = |s: usize| right_mass(nu, t.nbr[s] & !blocked) / t.mass[s];
        let beta = submasks(rest).map(ratio).fold(f64::INFINITY, f64::min);
        let slack = 1e-12 * beta.max(f64::MIN_POSITIVE);
        let union = submasks(rest).filter(|&s| ratio(s) <= beta + slack).fold(0, |a, s| a | s);
        let attained = ratio(union);
        if (attained - beta).abs() > 1e-9 * beta.max(1e-300) {
            return Err(validation(format!(
                "union of minimizers {:?} has ratio {attained}, not the minimum {beta}",
                mask_to_vec(union)
            )));
        }
        done |= union;
        sets.push(mask_to_vec(done));
        betas.push(beta);
    }
    Ok(PrincipalSequence { sets, betas })
}

/// Worst violations of the two defining properties, checked over every subset.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PrincipalCheck {
    /// `max_i |βᵢ μ(Sᵢ∖S_{i−1}) − ν(N(Sᵢ)∖N(S_{i−1}))|`.
    pub property1: f64,
    /// `max (βᵢ μ(A) − ν(N(A)∖N(S_{i−1})))` over all `A ⊆ X₁∖S_{i−1}`, floored at 0.
    pub property2: f64,
    pub betas_increasing: bool,
    /// `Σᵢ μ(Sᵢ∖S_{i−1})`.
    pub covered_mass: f64,
}

pub fn verify_principal_sequence(g: &Bipartite, mu: &[f64], nu: &[f64], seq: &PrincipalSequence) -> PrincipalCheck {
    let t = tables(g, mu);
    let m = g.adj.len();
    let full = (1usize << m) - 1;
    let to_mask = |s: &[usize]| s.iter().fold(0usize, |a, &x| a | 1 << x);
    let mut prev = 0usize;
    let mut p1 = 0.0f64;
    let mut p2 = 0.0f64;
    let mut covered = 0.0;
    for (set, &beta) in seq.sets.iter().zip(&seq.betas) {
        let cur = to_mask(set);
        let blocked = t.nbr[prev];
        let fresh = cur & !prev;
        covered += t.mass[fresh];
        p1 = p1.max((beta * t.mass[fresh] - right_mass(nu, t.nbr[cur] & !blocked)).abs());
        for a in submasks(full & !prev) {
            p2 = p2.max(beta * t.mass[a] - right_mass(nu, t.nbr[a] & !blocked));
        }
        prev = cur;
    }
    PrincipalCheck {
        property1: p1,
        property2: p2,
        betas_increasing: seq.betas.windows(2).all(|w| w[0] < w[1]),
        covered_mass: covered,
    }
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct PerScale {
    pub holds: bool,
    /// `rhs − lhs`.
    pub slack: f64,
    /// `Σ ν(x) h(ν(B(x, 2r)))`.
    pub lhs: f64,
    /// `Σ ν(x) h(μ(B(x, r))) + 1/e`.
    pub rhs: f64,
    /// Set when some supported `x` has `μ(B(x, r)) = 0`, making the bound vacuous.
    pub rhs_infinite: bool,
}

/// Per-scale comparison of the conditioned dual against an arbitrary `μ`.
pub fn per_scale_certificate(
    h: &ChainingFunctional,
    space: &MetricSpace,
    nu: &Measure,
    mu: &Measure,
    r: f64,
) -> Result<PerScale> {
    nu.check_len(space.len())?;
    mu.check_len(space.len())?;
    if !(r > 0.0) {
        return Err(domain(format!("scale must be positive, got {r}")));
    }
    let mut lhs = 0.0;
    let mut rhs = 1.0 / E;
    for x in nu.support() {
        let w = nu.weights()[x];
        lhs += w * h.value(space.ball_mass(nu, x, 2.0 * r));
        rhs += w * h.value(space.ball_mass(mu, x, r));
    }
    let slack = rhs - lhs;
    Ok(PerScale { holds: lhs <= rhs + 1e-9, slack, lhs, rhs, rhs_infinite: rhs.is_infinite() })
}
