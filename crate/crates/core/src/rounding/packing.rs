//! Packing trees built by greedy separated ball partitioning.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{carve, check_alpha, dot_set, reject_duplicates};
use crate::error::{validation, Result};
use crate::evaluate::simplified_dual_value;
use crate::functional::ChainingFunctional;
use crate::metric::{BallProfiles, Measure, MetricSpace};
use crate::text::sig9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingNode {
    /// Members, increasing.
    pub points: Vec<u32>,
    pub chi: u32,
    /// Label of the node in the auxiliary tree it came from.
    pub m: u32,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
}

/// An `α`-packing tree. `nodes[0]` is the root; children of a node are
/// disjoint subsets of it and leaves are singletons.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingTree {
    pub alpha: f64,
    pub diameter: f64,
    pub nodes: Vec<PackingNode>,
}

/// Output of [`greedy_separated_partition`].
#[derive(Debug, Clone, Serialize)]
pub struct SeparatedPartition {
    pub tree: PackingTree,
    /// Whether the large-dual shortcut produced the two-leaf tree.
    pub trivial: bool,
    /// `min_x H(ρ, x)`.
    pub simplified_dual: f64,
    /// Value of the auxiliary tree with its `m` labels, when it was built.
    pub pre_tree_value: Option<f64>,
}

impl PackingTree {
    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].children.is_empty())
    }

    /// Checks the packing-tree axioms with exact comparisons.
    pub fn validate(&self, space: &MetricSpace) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.diameter != space.diameter() {
            return Err(validation("packing tree diameter does not match the metric space"));
        }
        if self.nodes.is_empty() || self.nodes[0].parent.is_some() {
            return Err(validation("packing tree must start with a root node"));
        }
        let n = space.len() as u32;
        for (v, node) in self.nodes.iter().enumerate() {
            if node.points.is_empty()
                || node.points.windows(2).any(|w| w[0] >= w[1])
                || node.points.last().is_some_and(|&x| x >= n)
            {
                return Err(validation(format!("node {v} must hold a nonempty increasing list of points")));
            }
            if node.children.is_empty() {
                if node.points.len() != 1 {
                    return Err(validation(format!("leaf {v} is not a singleton")));
                }
                continue;
            }
            let scale = self.alpha.powi(node.chi as i32) * self.diameter;
            let mut seen: Vec<u32> = Vec::new();
            for (i, &c) in node.children.iter().enumerate() {
                let child = self.nodes.get(c).ok_or_else(|| validation(format!("node {v} has a dangling child {c}")))?;
                if c <= v || child.parent != Some(v) {
                    return Err(validation(format!("parent link of node {c} is inconsistent")));
                }
                if child.points.iter().any(|x| node.points.binary_search(x).is_err()) {
                    return Err(validation(format!("child {c} is not a subset of node {v}")));
                }
                if space.subset_diameter(&child.points) > self.alpha * scale {
                    return Err(validation(format!("child {c} exceeds the diameter bound α^(χ+1)·diam of node {v}")));
                }
                for &d in &node.children[..i] {
                    if space.set_distance(&child.points, &self.nodes[d].points) < 0.1 * scale {
                        return Err(validation(format!("children {d} and {c} of node {v} are closer than α^χ·diam/10")));
                    }
                }
                seen.extend_from_slice(&child.points);
            }
            let total = seen.len();
            seen.sort_unstable();
            seen.dedup();
            if seen.len() != total {
                return Err(validation(format!("children of node {v} overlap")));
            }
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph packing_tree {\n  node [shape=box];\n");
        for (v, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(out, "  n{v} [label=\"χ={} {}\"];", node.chi, dot_set(&node.points));
        }
        for (v, node) in self.nodes.iter().enumerate() {
            for &c in &node.children {
                let _ = writeln!(out, "  n{v} -> n{c};");
            }
        }
        out.push_str("}\n");
        out
    }

    pub fn summary(&self, h: &ChainingFunctional) -> String {
        format!(
            "packing tree: {} nodes, {} leaves, value {}\n",
            self.nodes.len(),
            self.leaves().count(),
            sig9(val_packing(self, h))
        )
    }
}

/// `inf` over leaves of `Σ α^{χ(V)} · diam · h(1/deg(V))` along the root path.
pub fn val_packing(tree: &PackingTree, h: &ChainingFunctional) -> f64 {
    let mut acc = vec![0.0; tree.nodes.len()];
    for v in 0..tree.nodes.len() {
        let node = &tree.nodes[v];
        if node.children.is_empty() {
            continue;
        }
        let term =
            tree.alpha.powi(node.chi as i32) * tree.diameter * h.value(1.0 / node.children.len() as f64);
        for &c in &node.children {
            acc[c] = acc[v] + term;
        }
    }
    tree.leaves().map(|v| acc[v]).fold(f64::INFINITY, f64::min)
}

/// Root holding the lexicographically first diametral pair, with both as leaves.
pub fn trivial_packing_tree(space: &MetricSpace) -> PackingTree {
    let diam = space.diameter();
    let n = space.len();
    let leaf = |x: usize| PackingNode { points: vec![x as u32], chi: 0, m: 0, parent: Some(0), children: Vec::new() };
    let pair = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).find(|&(a, b)| space.d(a, b) == diam);
    let nodes = match pair {
        Some((a, b)) => vec![
            PackingNode { points: vec![a as u32, b as u32], chi: 0, m: 0, parent: None, children: vec![1, 2] },
            leaf(a),
            leaf(b),
        ],
        None => vec![PackingNode { points: vec![0], chi: 0, m: 0, parent: None, children: Vec::new() }],
    };
    PackingTree { alpha: super::DEFAULT_ALPHA, diameter: diam, nodes }
}

struct PreNode {
    points: Vec<u32>,
    m: u32,
    children: Vec<usize>,
}

/// Greedy separated ball partitioning of `space` driven by `ρ`.
///
/// When the simplified dual of `ρ` is at least `60α⁻²·diam·h(1/2)` the
/// two-leaf tree is returned. Otherwise an auxiliary tree is grown by
/// carving each node at label `m` into balls of radius `¼α^{m+1}·diam`,
/// either descending into one heavy part (label `m+1`) or branching into the
/// full balls of radius `¼α^{m+2}·diam` around the `L` heaviest centers
/// (label `m+2`). Each node is then closed under the union of its children,
/// single-child chains are contracted, and `χ = m + 1` except at the root,
/// which takes `χ = 0` when its children satisfy the constraints for it.
pub fn greedy_separated_partition(
    space: &MetricSpace,
    rho: &Measure,
    h: &ChainingFunctional,
    alpha: f64,
) -> Result<SeparatedPartition> {
    check_alpha(alpha)?;
    rho.check_len(space.len())?;
    reject_duplicates(space, "greedy separated partitioning")?;
    let simplified = simplified_dual_value(h, space, rho)?.aggregate;
    let diam = space.diameter();
    if space.len() > 1 && simplified >= 60.0 / (alpha * alpha) * diam * h.value(0.5) {
        let mut tree = trivial_packing_tree(space);
        tree.alpha = alpha;
        return Ok(SeparatedPartition { tree, trivial: true, simplified_dual: simplified, pre_tree_value: None });
    }
    let pre = auxiliary_tree(space, rho, h, alpha);
    let pre_value = pre_tree_value(&pre, h, alpha, diam);
    let tree = contract(space, &pre, alpha);
    Ok(SeparatedPartition { tree, trivial: false, simplified_dual: simplified, pre_tree_value: Some(pre_value) })
}

fn auxiliary_tree(space: &MetricSpace, rho: &Measure, h: &ChainingFunctional, alpha: f64) -> Vec<PreNode> {
    let diam = space.diameter();
    let w = rho.weights();
    let profiles = BallProfiles::new(space, w);
    let radius = |m: u32| 0.25 * alpha.powi(m as i32) * diam;
    let mass = |set: &[u32]| set.iter().map(|&x| w[x as usize]).sum::<f64>();
    let threshold = 4.0 / (alpha * alpha);

    let mut nodes: Vec<PreNode> = Vec::new();
    let mut stack = vec![((0..space.len() as u32).collect::<Vec<u32>>(), 0u32, None::<usize>)];
    while let Some((mut set, mut m, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        let mut balls = Vec::new();
        while set.len() > 1 {
            let ecc = space.eccentricity(set[0] as usize, &set);
            while 2.0 * ecc <= radius(m + 1) {
                m += 1;
            }
            let mut parts = carve(space, &profiles, &set, radius(m + 2), radius(m + 1));
            if parts.len() == 1 {
                m += 1;
                continue;
            }
            let total = mass(&set);
            let masses: Vec<f64> = parts.iter().map(|(_, a)| mass(a)).collect();
            let mut idx: Vec<usize> = (0..parts.len()).collect();
            idx.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]).then(a.cmp(&b)));
            if !(total > 0.0) {
                // A massless node has no heavy part; descend into the first one.
                set = std::mem::take(&mut parts[idx[0]].1);
                m += 1;
                continue;
            }
            let big_l = idx
                .iter()
                .enumerate()
                .position(|(i, &j)| masses[j] / total >= 6.0 / (PI * PI) / ((i + 1) * (i + 1)) as f64)
                .map_or(idx.len(), |i| i + 1);
            let small = radius(m + 2);
            let heavy = idx[..big_l].iter().copied().find(|&j| {
                let (t, _) = parts[j];
                let inner = profiles.mass(t as usize, small);
                h.value(inner / masses[j]) >= threshold * h.value(masses[j] / total)
            });
            if let Some(j) = heavy {
                set = std::mem::take(&mut parts[j].1);
                m += 1;
                continue;
            }
            balls = idx[..big_l].iter().map(|&j| space.ball(parts[j].0 as usize, small).to_vec()).collect();
            break;
        }
        for ball in balls.iter_mut() {
            ball.sort_unstable();
        }
        let label = m;
        nodes.push(PreNode { points: set, m: label, children: Vec::new() });
        for ball in balls.into_iter().rev() {
            stack.push((ball, label + 2, Some(id)));
        }
    }
    nodes
}

/// `inf` over leaves of `Σ α^{m(V)} · diam · h(1/deg(V))` on the auxiliary tree.
fn pre_tree_value(nodes: &[PreNode], h: &ChainingFunctional, alpha: f64, diam: f64) -> f64 {
    let mut acc = vec![0.0; nodes.len()];
    let mut best = f64::INFINITY;
    for v in 0..nodes.len() {
        let node = &nodes[v];
        if node.children.is_empty() {
            best = best.min(acc[v]);
            continue;
        }
        let term = alpha.powi(node.m as i32) * diam * h.value(1.0 / node.children.len() as f64);
        for &c in &node.children {
            acc[c] = acc[v] + term;
        }
    }
    best
}

fn merge(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

/// Laminar closure, contraction of single-child chains and `χ` labels.
fn contract(space: &MetricSpace, pre: &[PreNode], alpha: f64) -> PackingTree {
    let diam = space.diameter();
    let mut closed: Vec<Vec<u32>> = pre.iter().map(|p| p.points.clone()).collect();
    for v in (0..pre.len()).rev() {
        for &c in &pre[v].children {
            let merged = merge(&closed[v], &closed[c]);
            closed[v] = merged;
        }
    }
    let settle = |mut v: usize| {
        while pre[v].children.len() == 1 {
            v = pre[v].children[0];
        }
        v
    };

    let mut nodes: Vec<PackingNode> = Vec::new();
    let mut stack = vec![(settle(0), None::<usize>)];
    while let Some((v, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some(p) = parent {
            nodes[p].children.push(id);
        }
        nodes.push(PackingNode {
            points: std::mem::take(&mut closed[v]),
            chi: pre[v].m + 1,
            m: pre[v].m,
            parent,
            children: Vec::new(),
        });
        for &c in pre[v].children.iter().rev() {
            stack.push((settle(c), Some(id)));
        }
    }

    // The root may use χ = 0 when its children are separated and small enough for it.
    let root = &nodes[0];
    let fits_zero = root.children.iter().enumerate().all(|(i, &c)| {
        space.subset_diameter(&nodes[c].points) <= alpha * diam
            && root.children[..i]
                .iter()
                .all(|&d| space.set_distance(&nodes[c].points, &nodes[d].points) >= 0.1 * diam)
    });
    if fits_zero {
        nodes[0].chi = 0;
    }
    PackingTree { alpha, diameter: diam, nodes }
}
