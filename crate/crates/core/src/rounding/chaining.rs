//! Chaining trees: conversion from labelled nets, the Dudley baseline, and
//! the measure induced by a tree.

use std::f64::consts::PI;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{reject_duplicates, LabelledNet};
use crate::error::{validation, Result};
use crate::functional::ChainingFunctional;
use crate::metric::{Measure, MetricSpace};
use crate::text::sig9;

/// Allowance for rounding in `Σ p_e ≤ 1/2`.
const PROBABILITY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainingEdge {
    pub parent: u32,
    pub child: u32,
    pub p: f64,
    /// `d(parent, child) · h(p)`.
    pub length: f64,
}

/// A rooted spanning tree on the points with probability-labelled edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainingTree {
    pub n: usize,
    pub root: u32,
    pub edges: Vec<ChainingEdge>,
}

impl ChainingTree {
    fn edge(space: &MetricSpace, h: &ChainingFunctional, parent: u32, child: u32, p: f64) -> ChainingEdge {
        ChainingEdge { parent, child, p, length: space.d(parent as usize, child as usize) * h.value(p) }
    }

    pub fn probability_sum(&self) -> f64 {
        self.edges.iter().map(|e| e.p).sum()
    }

    /// Edges grouped by parent.
    fn children(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n];
        for (i, e) in self.edges.iter().enumerate() {
            out[e.parent as usize].push(i);
        }
        out
    }

    /// Sum of edge lengths from the root to every point.
    pub fn path_lengths(&self) -> Vec<f64> {
        let children = self.children();
        let mut acc = vec![0.0; self.n];
        let mut stack = vec![self.root as usize];
        while let Some(u) = stack.pop() {
            for &i in &children[u] {
                let e = &self.edges[i];
                acc[e.child as usize] = acc[u] + e.length;
                stack.push(e.child as usize);
            }
        }
        acc
    }

    /// Recomputes every edge length from `(d, p, h)`.
    pub fn relabel(&mut self, space: &MetricSpace, h: &ChainingFunctional) {
        for e in &mut self.edges {
            *e = Self::edge(space, h, e.parent, e.child, e.p);
        }
    }

    /// Spanning-tree structure, probability labels and bit-exact lengths.
    pub fn validate(&self, space: &MetricSpace, h: &ChainingFunctional) -> Result<()> {
        let n = space.len();
        if self.n != n || self.root as usize >= n {
            return Err(validation("chaining tree does not match the metric space"));
        }
        if self.edges.len() + 1 != n {
            return Err(validation(format!("a spanning tree on {n} points needs {} edges", n - 1)));
        }
        let mut has_parent = vec![false; n];
        has_parent[self.root as usize] = true;
        for e in &self.edges {
            let (u, v) = (e.parent as usize, e.child as usize);
            if u >= n || v >= n {
                return Err(validation(format!("edge ({u}, {v}) leaves the space")));
            }
            if has_parent[v] {
                return Err(validation(format!("point {v} has more than one parent")));
            }
            has_parent[v] = true;
            if !(e.p > 0.0 && e.p <= 0.5) {
                return Err(validation(format!("edge ({u}, {v}) has p = {} outside (0, 1/2]", e.p)));
            }
            let expected = Self::edge(space, h, e.parent, e.child, e.p).length;
            if e.length.to_bits() != expected.to_bits() {
                return Err(validation(format!("edge ({u}, {v}) length {} differs from d·h(p) = {expected}", e.length)));
            }
        }
        let sum = self.probability_sum();
        if sum > 0.5 + PROBABILITY_SLACK {
            return Err(validation(format!("edge probabilities sum to {sum} > 1/2")));
        }
        let children = self.children();
        let mut seen = vec![false; n];
        let mut stack = vec![self.root as usize];
        let mut count = 0;
        while let Some(u) = stack.pop() {
            if std::mem::replace(&mut seen[u], true) {
                return Err(validation("chaining tree contains a cycle"));
            }
            count += 1;
            stack.extend(children[u].iter().map(|&i| self.edges[i].child as usize));
        }
        if count != n {
            return Err(validation("chaining tree is not connected"));
        }
        Ok(())
    }

    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph chaining_tree {\n");
        let _ = writeln!(out, "  n{} [shape=doublecircle];", self.root);
        for e in &self.edges {
            let _ = writeln!(out, "  n{} -> n{} [label=\"p={} l={}\"];", e.parent, e.child, sig9(e.p), sig9(e.length));
        }
        out.push_str("}\n");
        out
    }

    pub fn summary(&self) -> String {
        format!(
            "chaining tree: {} points, root {}, Σp = {}, value {}\n",
            self.n,
            self.root,
            sig9(self.probability_sum()),
            sig9(val_chaining(self))
        )
    }
}

/// `max_x` of the total edge length on the root path of `x`.
pub fn val_chaining(tree: &ChainingTree) -> f64 {
    tree.path_lengths().into_iter().fold(0.0, f64::max)
}

/// Converts a labelled net into a chaining tree. Each node `C` is
/// represented by its parent's point when it contains it and by its
/// smallest point otherwise; the latter case adds an edge with probability
/// `(3/(2π²)) · 2^{−m(C)} · Π (2σ(V))^{−2}` over the nodes `V ≠ root` on the
/// path to `C`.
pub fn labelled_to_chaining(net: &LabelledNet, space: &MetricSpace, h: &ChainingFunctional) -> Result<ChainingTree> {
    net.validate(space)?;
    let nodes = &net.nodes;
    let mut rep = vec![0u32; nodes.len()];
    let mut weight = vec![1.0f64; nodes.len()];
    rep[0] = nodes[0].points[0];
    let mut edges = Vec::with_capacity(space.len().saturating_sub(1));
    for v in 0..nodes.len() {
        for &c in &nodes[v].children {
            let child = &nodes[c];
            let s = 2.0 * child.sigma as f64;
            weight[c] = weight[v] / (s * s);
            if child.points.binary_search(&rep[v]).is_ok() {
                rep[c] = rep[v];
            } else {
                rep[c] = child.points[0];
                let p = 1.5 / (PI * PI) * 0.5f64.powi(child.m as i32) * weight[c];
                edges.push(ChainingTree::edge(space, h, rep[v], rep[c], p));
            }
        }
    }
    Ok(ChainingTree { n: space.len(), root: rep[0], edges })
}

/// The measure with mass `1/2` at the root and `p_e` at the child end of each
/// edge, after scaling the probabilities so that they sum to exactly `1/2`.
pub fn chaining_to_measure(tree: &ChainingTree) -> Result<Measure> {
    let mut w = vec![0.0; tree.n];
    if tree.edges.is_empty() {
        w[tree.root as usize] = 1.0;
        return Measure::new(w);
    }
    let sum = tree.probability_sum();
    if !(sum > 0.0) {
        return Err(validation("edge probabilities must be positive"));
    }
    w[tree.root as usize] = 0.5;
    for e in &tree.edges {
        w[e.child as usize] += e.p * (0.5 / sum);
    }
    Measure::new(w)
}

/// Dudley's construction: farthest-point nets `N_k` at scales `2^{−k}·diam`,
/// each new point of `N_k` attached to its nearest point of `N_{k−1}` with
/// probability `2^{−(k+1)} / |N_k|`.
pub fn dudley_tree(space: &MetricSpace, h: &ChainingFunctional) -> Result<ChainingTree> {
    reject_duplicates(space, "the Dudley construction")?;
    let n = space.len();
    let diam = space.diameter();
    // Farthest-point traversal from point 0; `radius[i]` is the distance of
    // the i-th inserted point to the points inserted before it.
    let mut order = vec![0usize];
    let mut radius = vec![f64::INFINITY];
    let mut gap: Vec<f64> = space.row(0).to_vec();
    let mut inserted = vec![false; n];
    inserted[0] = true;
    for _ in 1..n {
        let (next, r) = (0..n)
            .filter(|&i| !inserted[i])
            .fold((usize::MAX, f64::NEG_INFINITY), |best, i| if gap[i] > best.1 { (i, gap[i]) } else { best });
        inserted[next] = true;
        order.push(next);
        radius.push(r);
        for (g, &d) in gap.iter_mut().zip(space.row(next)) {
            *g = g.min(d);
        }
    }
    let level = |r: f64| {
        let mut k = 1;
        while r <= 0.5f64.powi(k) * diam {
            k += 1;
        }
        k
    };
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    let mut start = 1;
    while start < n {
        let k = level(radius[start]);
        let net_size = radius.partition_point(|&r| r > 0.5f64.powi(k) * diam);
        let prev = radius.partition_point(|&r| r > 0.5f64.powi(k - 1) * diam);
        let p = 0.5f64.powi(k + 1) / net_size as f64;
        for &u in &order[start..net_size] {
            let row = space.row(u);
            let parent = order[..prev]
                .iter()
                .copied()
                .min_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)))
                .expect("N_{k-1} contains the root");
            edges.push(ChainingTree::edge(space, h, parent as u32, u as u32, p));
        }
        start = net_size;
    }
    Ok(ChainingTree { n, root: 0, edges })
}
