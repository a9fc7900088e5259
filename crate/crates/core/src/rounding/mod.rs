//! Measure-to-tree and tree-to-tree constructions.
//!
//! Every "arbitrary" choice in these algorithms is resolved by the smallest
//! point index so that outputs are fully deterministic.

pub mod admissible;
pub mod chaining;
pub mod labelled;
pub mod packing;

pub use admissible::{admissible_constant, labelled_to_admissible, val_admissible, AdmissibleNet};
pub use chaining::{chaining_to_measure, dudley_tree, labelled_to_chaining, val_chaining, ChainingEdge, ChainingTree};
pub use labelled::{greedy_ball_partition, per_path_slack, val_labelled, LabelledNet, NetNode};
pub use packing::{
    greedy_separated_partition, trivial_packing_tree, val_packing, PackingNode, PackingTree, SeparatedPartition,
};

use crate::error::{domain, Result};
use crate::metric::{BallProfiles, MetricSpace};

/// Default scale-decay parameter of the rounding algorithms.
pub const DEFAULT_ALPHA: f64 = 0.1;

/// Relative slack allowed when comparing a computed diameter against a
/// product of powers of `α` and the diameter.
pub(crate) const DIAMETER_SLACK: f64 = 1e-12;

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 0.1) {
        return Err(domain(format!("alpha must lie in (0, 1/10], got {alpha}")));
    }
    Ok(())
}

pub(crate) fn reject_duplicates(space: &MetricSpace, what: &str) -> Result<()> {
    if space.has_duplicates() {
        return Err(domain(format!("{what} needs distinct points; the pseudometric has zero off-diagonal distances")));
    }
    Ok(())
}

/// Compact set label for DOT output: the members when few, else the size.
pub(crate) fn dot_set(points: &[u32]) -> String {
    if points.len() <= 6 {
        let inner: Vec<String> = points.iter().map(u32::to_string).collect();
        format!("{{{}}}", inner.join(","))
    } else {
        format!("|V|={}", points.len())
    }
}

/// Greedy ball carving of `set` (sorted): centers are taken in order of
/// decreasing `ρ(B(x, probe))` (ties by index) among uncovered points, and
/// each claims the uncovered points within `radius`. Returns `(center, part)`
/// pairs in carving order, each part sorted.
pub(crate) fn carve(
    space: &MetricSpace,
    profiles: &BallProfiles<'_>,
    set: &[u32],
    probe: f64,
    radius: f64,
) -> Vec<(u32, Vec<u32>)> {
    let mut order: Vec<(f64, u32)> = set.iter().map(|&x| (profiles.mass(x as usize, probe), x)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut covered = vec![false; set.len()];
    let mut remaining: Vec<u32> = set.to_vec();
    let mut parts = Vec::new();
    for (_, t) in order {
        let pos = set.binary_search(&t).expect("center belongs to the set");
        if covered[pos] {
            continue;
        }
        let row = space.row(t as usize);
        let (part, rest): (Vec<u32>, Vec<u32>) = remaining.iter().partition(|&&y| row[y as usize] <= radius);
        for &y in &part {
            covered[set.binary_search(&y).expect("member of the set")] = true;
        }
        remaining = rest;
        parts.push((t, part));
        if remaining.is_empty() {
            break;
        }
    }
    parts
}
