//! Labelled nets built by greedy ball partitioning.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{carve, check_alpha, dot_set, reject_duplicates, DIAMETER_SLACK};
use crate::error::{validation, Result};
use crate::evaluate::potential;
use crate::functional::ChainingFunctional;
use crate::metric::{BallProfiles, Measure, MetricSpace};
use crate::text::sig9;

/// One node of a labelled net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetNode {
    /// Members, increasing.
    pub points: Vec<u32>,
    /// Label at which the node was created; `diam(V) ≤ α^m · diam(X)`.
    pub m: u32,
    /// Label at which the node was split into its children. Equal to `m`
    /// unless a chain of single-child levels was compressed into this node.
    pub m_split: u32,
    /// Position among its siblings, starting at 1; 0 for the root.
    pub sigma: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// An `α`-labelled net. `nodes[0]` is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledNet {
    pub alpha: f64,
    pub diameter: f64,
    pub nodes: Vec<NetNode>,
}

impl LabelledNet {
    pub fn root(&self) -> &NetNode {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    /// Weight `α^{m_split(V)} · diam(X)` of the edges leaving `V`.
    pub fn scale(&self, v: usize) -> f64 {
        self.alpha.powi(self.nodes[v].m_split as i32) * self.diameter
    }

    /// For every node, `Σ α^{m_split(parent)} · diam · h(1/σ)` along its root path.
    pub fn path_sums(&self, h: &ChainingFunctional) -> Vec<f64> {
        let mut acc = vec![0.0; self.nodes.len()];
        for v in 0..self.nodes.len() {
            for &c in &self.nodes[v].children {
                acc[c] = acc[v] + self.scale(v) * h.value(1.0 / self.nodes[c].sigma as f64);
            }
        }
        acc
    }

    /// Checks the net against `space`: partition, singleton leaves, label
    /// monotonicity, diameter bounds and sibling orders.
    pub fn validate(&self, space: &MetricSpace) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.diameter != space.diameter() {
            return Err(validation("net diameter does not match the metric space"));
        }
        let n = space.len();
        if self.nodes.is_empty() || self.nodes[0].parent.is_some() {
            return Err(validation("net must start with a root node"));
        }
        if self.nodes[0].points != (0..n as u32).collect::<Vec<_>>() {
            return Err(validation("root of a labelled net must be the whole space"));
        }
        for (v, node) in self.nodes.iter().enumerate() {
            if node.points.is_empty() || node.points.windows(2).any(|w| w[0] >= w[1]) {
                return Err(validation(format!("node {v} must hold a nonempty increasing point list")));
            }
            if node.m_split < node.m {
                return Err(validation(format!("node {v} has m_split < m")));
            }
            let bound = self.alpha.powi(node.m as i32) * self.diameter;
            if space.subset_diameter(&node.points) > bound * (1.0 + DIAMETER_SLACK) {
                return Err(validation(format!("node {v} exceeds its diameter bound α^{}·diam", node.m)));
            }
            if node.children.is_empty() {
                if node.points.len() != 1 {
                    return Err(validation(format!("leaf {v} is not a singleton")));
                }
                continue;
            }
            let mut union = Vec::with_capacity(node.points.len());
            let mut sigmas = Vec::with_capacity(node.children.len());
            for &c in &node.children {
                let child = self.nodes.get(c).ok_or_else(|| validation(format!("node {v} has a dangling child {c}")))?;
                if c <= v || child.parent != Some(v) {
                    return Err(validation(format!("parent link of node {c} is inconsistent")));
                }
                if child.m < node.m_split + 1 {
                    return Err(validation(format!("child {c} must have m ≥ m_split(parent) + 1")));
                }
                union.extend_from_slice(&child.points);
                sigmas.push(child.sigma);
            }
            union.sort_unstable();
            if union != node.points {
                return Err(validation(format!("children of node {v} do not partition it")));
            }
            sigmas.sort_unstable();
            if sigmas.iter().enumerate().any(|(i, &s)| s as usize != i + 1) {
                return Err(validation(format!("sibling orders under node {v} are not 1..k")));
            }
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph labelled_net {\n  node [shape=box];\n");
        for (v, node) in self.nodes.iter().enumerate() {
            let label = if node.m_split != node.m {
                format!("m={}..{} {}", node.m, node.m_split, dot_set(&node.points))
            } else {
                format!("m={} {}", node.m, dot_set(&node.points))
            };
            let _ = writeln!(out, "  n{v} [label=\"{label}\"];");
        }
        for (v, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                let _ = writeln!(out, "  n{v} -> n{c} [label=\"σ={}\"];", self.nodes[c].sigma);
            }
        }
        out.push_str("}\n");
        out
    }

    /// Text summary with 9 significant digits.
    pub fn summary(&self, h: &ChainingFunctional) -> String {
        let leaves = self.leaves().count();
        let depth = self.depths().into_iter().max().unwrap_or(0);
        format!(
            "labelled net: {} nodes, {} leaves, depth {}, value {}\n",
            self.nodes.len(),
            leaves,
            depth,
            sig9(val_labelled(self, h))
        )
    }

    fn depths(&self) -> Vec<usize> {
        let mut depth = vec![0; self.nodes.len()];
        for v in 0..self.nodes.len() {
            for &c in &self.nodes[v].children {
                depth[c] = depth[v] + 1;
            }
        }
        depth
    }
}

/// Greedy ball partitioning of `space` driven by `ρ`.
///
/// At label `m` a node `R` is carved into balls of radius `½α^{m+1}·diam`
/// around centers of maximal `ρ(B(x, ½α^{m+2}·diam))`. When a single ball
/// covers `R`, the label is incremented in place instead of creating a child.
pub fn greedy_ball_partition(space: &MetricSpace, rho: &Measure, alpha: f64) -> Result<LabelledNet> {
    check_alpha(alpha)?;
    rho.check_len(space.len())?;
    reject_duplicates(space, "greedy ball partitioning")?;
    let diam = space.diameter();
    let profiles = BallProfiles::new(space, rho.weights());
    let radius = |m: u32| 0.5 * alpha.powi(m as i32) * diam;

    let mut nodes: Vec<NetNode> = Vec::new();
    let mut stack = vec![((0..space.len() as u32).collect::<Vec<u32>>(), 0u32, None::<usize>, 0u32)];
    while let Some((points, m0, parent, sigma)) = stack.pop() {
        let id = nodes.len();
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        let mut m = m0;
        let mut parts = Vec::new();
        if points.len() > 1 {
            loop {
                let ecc = space.eccentricity(points[0] as usize, &points);
                while 2.0 * ecc <= radius(m + 1) {
                    m += 1;
                }
                parts = carve(space, &profiles, &points, radius(m + 2), radius(m + 1));
                if parts.len() > 1 {
                    break;
                }
                m += 1;
            }
        }
        nodes.push(NetNode { points, m: m0, m_split: m, sigma, parent, children: Vec::new() });
        for (i, (_, part)) in parts.into_iter().enumerate().rev() {
            stack.push((part, m + 1, Some(id), i as u32 + 1));
        }
    }
    Ok(LabelledNet { alpha, diameter: diam, nodes })
}

/// `max` over leaves of `Σ α^{m(V)} · diam · h(1/σ(W))` along the root path.
pub fn val_labelled(net: &LabelledNet, h: &ChainingFunctional) -> f64 {
    let sums = net.path_sums(h);
    net.leaves().map(|v| sums[v]).fold(0.0, f64::max)
}

/// Largest value over leaves `x` of
/// `½α²(1−α) · Σ α^{m(V)} · diam · h(1/σ(W)) − H(ρ, x)`;
/// nonpositive whenever the per-path greedy inequality holds.
pub fn per_path_slack(net: &LabelledNet, space: &MetricSpace, h: &ChainingFunctional, rho: &Measure) -> f64 {
    let a = net.alpha;
    let factor = 0.5 * a * a * (1.0 - a);
    let sums = net.path_sums(h);
    net.leaves()
        .map(|v| {
            let x = net.nodes[v].points[0] as usize;
            factor * sums[v] - potential(h, space, rho.weights(), x)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
