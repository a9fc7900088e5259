//! Admissible nets derived from labelled nets.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::LabelledNet;
use crate::error::{validation, Result};
use crate::metric::MetricSpace;
use crate::text::sig9;

/// A sequence of partitions `𝒜₀, 𝒜₁, …` of the points, each refining the
/// previous, with `|𝒜_i| ≤ 2^{2^i}` and singleton parts at the last level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibleNet {
    pub n: usize,
    /// `levels[i]` lists the parts of `𝒜_i`, each increasing.
    pub levels: Vec<Vec<Vec<u32>>>,
}

/// Bound on `val₂(admissible) / val₂(labelled)` for the conversion below,
/// `√2 (2 − α) / ((1 − α)² (1 − 2^{−1/2}))`.
pub fn admissible_constant(alpha: f64) -> f64 {
    std::f64::consts::SQRT_2 * (2.0 - alpha) / ((1.0 - alpha).powi(2) * (1.0 - std::f64::consts::FRAC_1_SQRT_2))
}

/// `√ln(2^{2^i})`, the weight of level `i`.
fn level_weight(i: usize) -> f64 {
    (2f64.powi(i as i32) * std::f64::consts::LN_2).sqrt()
}

impl AdmissibleNet {
    /// Part of `𝒜_i` containing each point.
    fn owners(&self, level: &[Vec<u32>]) -> Result<Vec<usize>> {
        let mut owner = vec![usize::MAX; self.n];
        for (k, part) in level.iter().enumerate() {
            if part.is_empty() {
                return Err(validation("admissible net contains an empty part"));
            }
            for &x in part {
                let slot = owner
                    .get_mut(x as usize)
                    .ok_or_else(|| validation(format!("point {x} is outside the space")))?;
                if *slot != usize::MAX {
                    return Err(validation(format!("point {x} lies in two parts of one level")));
                }
                *slot = k;
            }
        }
        if owner.contains(&usize::MAX) {
            return Err(validation("a level does not cover every point"));
        }
        Ok(owner)
    }

    /// Partition, size, refinement and final-singleton checks.
    pub fn validate(&self, space: &MetricSpace) -> Result<()> {
        if self.n != space.len() {
            return Err(validation("admissible net does not match the metric space"));
        }
        if self.levels.is_empty() {
            return Err(validation("admissible net has no levels"));
        }
        let mut prev: Option<Vec<usize>> = None;
        for (i, level) in self.levels.iter().enumerate() {
            if i < 6 && level.len() as u64 > 1u64 << (1u32 << i) {
                return Err(validation(format!("level {i} has {} parts, more than 2^(2^{i})", level.len())));
            }
            let owner = self.owners(level)?;
            if let Some(up) = &prev {
                for part in level {
                    let first = up[part[0] as usize];
                    if part.iter().any(|&x| up[x as usize] != first) {
                        return Err(validation(format!("level {i} does not refine level {}", i - 1)));
                    }
                }
            }
            prev = Some(owner);
        }
        if self.levels.last().is_some_and(|l| l.iter().any(|p| p.len() != 1)) {
            return Err(validation("last level of an admissible net must consist of singletons"));
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph admissible_net {\n  node [shape=box];\n");
        for (i, level) in self.levels.iter().enumerate() {
            for (k, part) in level.iter().enumerate() {
                let _ = writeln!(out, "  a{i}_{k} [label=\"𝒜{i} {}\"];", super::dot_set(part));
            }
        }
        for i in 1..self.levels.len() {
            let mut owner = vec![0usize; self.n];
            for (k, part) in self.levels[i - 1].iter().enumerate() {
                for &x in part {
                    owner[x as usize] = k;
                }
            }
            for (k, part) in self.levels[i].iter().enumerate() {
                let _ = writeln!(out, "  a{}_{} -> a{i}_{k};", i - 1, owner[part[0] as usize]);
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn summary(&self, space: &MetricSpace) -> String {
        let sizes: Vec<String> = self.levels.iter().map(|l| l.len().to_string()).collect();
        format!("admissible net: {} levels, sizes [{}], value {}\n", self.levels.len(), sizes.join(", "), sig9(val_admissible(self, space)))
    }
}

/// Cuts a labelled net into an admissible net using the potential
/// `Ψ(V) = Π (2σ(W))²` over the non-root nodes `W` on the path to `V`.
///
/// At level `i` a node is eligible when `Ψ < 2^{2^i}`; eligible nodes form a
/// rooted subtree. Every eligible leaf is a part, and for every eligible
/// internal node the union of its ineligible children is a part.
pub fn labelled_to_admissible(net: &LabelledNet, space: &MetricSpace) -> Result<AdmissibleNet> {
    net.validate(space)?;
    let nodes = &net.nodes;
    let mut log_psi = vec![0.0f64; nodes.len()];
    for v in 0..nodes.len() {
        for &c in &nodes[v].children {
            log_psi[c] = log_psi[v] + 2.0 * (2.0 * nodes[c].sigma as f64).log2();
        }
    }
    let deepest = nodes
        .iter()
        .enumerate()
        .filter(|(_, v)| v.children.is_empty())
        .map(|(i, _)| log_psi[i])
        .fold(0.0, f64::max);

    let mut levels = Vec::new();
    for i in 0.. {
        let cut = 2f64.powi(i);
        let eligible = |v: usize| log_psi[v] < cut;
        let mut parts = Vec::new();
        let mut stack = vec![0usize];
        while let Some(v) = stack.pop() {
            let node = &nodes[v];
            if node.children.is_empty() {
                parts.push(node.points.clone());
                continue;
            }
            let mut rest: Vec<u32> = Vec::new();
            for &c in &node.children {
                if eligible(c) {
                    stack.push(c);
                } else {
                    rest.extend_from_slice(&nodes[c].points);
                }
            }
            if !rest.is_empty() {
                rest.sort_unstable();
                parts.push(rest);
            }
        }
        parts.sort();
        levels.push(parts);
        if deepest < cut {
            break;
        }
    }
    Ok(AdmissibleNet { n: space.len(), levels })
}

/// `max_x Σ_i √(2^i ln 2) · diam(𝒜_i(x))`.
pub fn val_admissible(net: &AdmissibleNet, space: &MetricSpace) -> f64 {
    let mut acc = vec![0.0; net.n];
    for (i, level) in net.levels.iter().enumerate() {
        let w = level_weight(i);
        for part in level {
            let term = w * space.subset_diameter(part);
            for &x in part {
                acc[x as usize] += term;
            }
        }
    }
    acc.into_iter().fold(0.0, f64::max)
}
