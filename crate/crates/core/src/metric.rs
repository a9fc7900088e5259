//! Finite metric spaces, probability measures on them, and the ball-mass
//! preprocessing shared by every algorithm in the crate.

use std::path::Path;

use crate::error::{domain, format, validation, Result};

/// Options controlling [`MetricSpace`] validation.
#[derive(Debug, Clone, Copy)]
pub struct MetricOptions {
    /// Allow zero distances between distinct points.
    pub pseudo: bool,
    /// Check the triangle inequality (O(n³)).
    pub check_triangle: bool,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { pseudo: false, check_triangle: true }
    }
}

/// An `n`-point metric with per-point neighbor orders and ball breakpoints.
#[derive(Debug, Clone)]
pub struct MetricSpace {
    n: usize,
    dist: Vec<f64>,
    /// Row `x` lists all points by increasing distance from `x` (ties by index).
    order: Vec<u32>,
    /// `radii[x] = [0, r₁(x), …, r_k(x)]`.
    radii: Vec<Vec<f64>>,
    /// `ends[x][j]` is the number of points within distance `radii[x][j]`.
    ends: Vec<Vec<u32>>,
    diameter: f64,
    duplicates: bool,
}

impl MetricSpace {
    /// Validates and preprocesses a row-major `n × n` distance matrix.
    pub fn from_matrix(n: usize, dist: Vec<f64>, opts: MetricOptions) -> Result<Self> {
        if n == 0 {
            return Err(domain("metric space must have at least one point"));
        }
        if dist.len() != n * n {
            return Err(format(format!("expected {} entries, got {}", n * n, dist.len())));
        }
        let mut duplicates = false;
        for i in 0..n {
            if dist[i * n + i] != 0.0 {
                return Err(format(format!("nonzero diagonal entry at {i}")));
            }
            for j in 0..n {
                let d = dist[i * n + j];
                if !d.is_finite() || d < 0.0 {
                    return Err(format(format!("entry ({i}, {j}) = {d} is not a finite nonnegative number")));
                }
                if d != dist[j * n + i] {
                    return Err(format(format!("matrix is not symmetric at ({i}, {j})")));
                }
                if i != j && d == 0.0 {
                    duplicates = true;
                }
            }
        }
        if duplicates && !opts.pseudo {
            return Err(validation("distinct points at distance zero; enable the pseudo-metric flag to allow this"));
        }
        if opts.check_triangle {
            if let Some((i, j, k)) = triangle_witness(n, &dist) {
                return Err(validation(format!(
                    "triangle inequality fails: d({i},{k}) = {} > d({i},{j}) + d({j},{k}) = {}",
                    dist[i * n + k],
                    dist[i * n + j] + dist[j * n + k]
                )));
            }
        }
        Ok(Self::preprocess(n, dist, duplicates))
    }

    /// Euclidean distances between the rows of `points`.
    pub fn from_points(points: &[Vec<f64>], opts: MetricOptions) -> Result<Self> {
        let n = points.len();
        if n == 0 {
            return Err(domain("point cloud is empty"));
        }
        let d = points[0].len();
        if points.iter().any(|p| p.len() != d || p.iter().any(|c| !c.is_finite())) {
            return Err(format("point cloud rows must have equal length and finite coordinates"));
        }
        let mut dist = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..i {
                let s: f64 = points[i].iter().zip(&points[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                dist[i * n + j] = s.sqrt();
                dist[j * n + i] = s.sqrt();
            }
        }
        // Rounding in sqrt can break the triangle inequality by an ulp; Euclidean
        // distances satisfy it exactly in real arithmetic, so skip the check.
        Self::from_matrix(n, dist, MetricOptions { check_triangle: false, ..opts })
    }

    /// Parses either format: a distance matrix (`n` then `n` rows) or a point
    /// cloud (`points d` then one row of `d` coordinates per point).
    pub fn parse(text: &str, opts: MetricOptions) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| format("empty metric file"))?;
        let mut head = header.split_whitespace();
        if head.next() == Some("points") {
            let d: usize = head
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| format("point-cloud header must be `points d`"))?;
            let mut pts = Vec::new();
            for (row, line) in lines.enumerate() {
                let p = parse_reals(line)?;
                if p.len() != d {
                    return Err(format(format!("point {row} has {} coordinates, expected {d}", p.len())));
                }
                pts.push(p);
            }
            return Self::from_points(&pts, opts);
        }
        let n: usize = header
            .parse()
            .map_err(|_| format(format!("first line must be the point count, got `{header}`")))?;
        let mut dist = Vec::with_capacity(n * n);
        for (row, line) in lines.enumerate() {
            let r = parse_reals(line)?;
            if r.len() != n {
                return Err(format(format!("row {row} has {} entries, expected {n}", r.len())));
            }
            dist.extend(r);
        }
        if dist.len() != n * n {
            return Err(format(format!("expected {n} rows, got {}", dist.len() / n.max(1))));
        }
        Self::from_matrix(n, dist, opts)
    }

    pub fn load(path: impl AsRef<Path>, opts: MetricOptions) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?, opts)
    }

    fn preprocess(n: usize, dist: Vec<f64>, duplicates: bool) -> Self {
        let mut order = Vec::with_capacity(n * n);
        let mut radii = Vec::with_capacity(n);
        let mut ends = Vec::with_capacity(n);
        let mut diameter = 0.0f64;
        for x in 0..n {
            let row = &dist[x * n..(x + 1) * n];
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| row[a as usize].total_cmp(&row[b as usize]).then(a.cmp(&b)));
            let mut r = vec![0.0];
            let mut e = Vec::new();
            for (pos, &y) in idx.iter().enumerate() {
                let d = row[y as usize];
                if d > *r.last().unwrap() {
                    e.push(pos as u32);
                    r.push(d);
                }
            }
            e.push(n as u32);
            diameter = diameter.max(*r.last().unwrap());
            order.extend(idx);
            radii.push(r);
            ends.push(e);
        }
        Self { n, dist, order, radii, ends, diameter, duplicates }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn d(&self, x: usize, y: usize) -> f64 {
        self.dist[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.dist[x * self.n..(x + 1) * self.n]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.dist
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Whether two distinct points are at distance zero.
    pub fn has_duplicates(&self) -> bool {
        self.duplicates
    }

    /// All points sorted by distance from `x`.
    pub fn sorted_neighbors(&self, x: usize) -> &[u32] {
        &self.order[x * self.n..(x + 1) * self.n]
    }

    /// `[0, r₁(x), …, r_k(x)]`: radius 0 followed by the positive breakpoints.
    pub fn levels(&self, x: usize) -> &[f64] {
        &self.radii[x]
    }

    /// Number of points in `B(x, levels(x)[j])` for each level `j`.
    pub fn level_ends(&self, x: usize) -> &[u32] {
        &self.ends[x]
    }

    /// The distinct positive distances from `x`, increasing.
    pub fn breakpoints(&self, x: usize) -> &[f64] {
        &self.radii[x][1..]
    }

    /// Points of the closed ball `B(x, r)`, by increasing distance.
    pub fn ball(&self, x: usize, r: f64) -> &[u32] {
        let j = self.radii[x].partition_point(|&v| v <= r);
        let end = if j == 0 { 0 } else { self.ends[x][j - 1] as usize };
        &self.sorted_neighbors(x)[..end]
    }

    /// `max_{y ∈ set} d(x, y)`.
    pub fn eccentricity(&self, x: usize, set: &[u32]) -> f64 {
        let row = self.row(x);
        set.iter().map(|&y| row[y as usize]).fold(0.0, f64::max)
    }

    /// Exact diameter of a subset (quadratic).
    pub fn subset_diameter(&self, set: &[u32]) -> f64 {
        let mut best = 0.0f64;
        for (i, &a) in set.iter().enumerate() {
            let row = self.row(a as usize);
            for &b in &set[i + 1..] {
                best = best.max(row[b as usize]);
            }
        }
        best
    }

    /// `min d(a, b)` over `a ∈ s`, `b ∈ t`.
    pub fn set_distance(&self, s: &[u32], t: &[u32]) -> f64 {
        let mut best = f64::INFINITY;
        for &a in s {
            let row = self.row(a as usize);
            for &b in t {
                best = best.min(row[b as usize]);
            }
        }
        best
    }

    /// Sum of `μ` over the closed ball `B(x, r)` by direct summation.
    pub fn ball_mass(&self, mu: &Measure, x: usize, r: f64) -> f64 {
        self.row(x).iter().zip(mu.weights()).filter(|(d, _)| **d <= r).map(|(_, w)| w).sum()
    }

    /// Piecewise-constant profile `r ↦ μ(B(x, r))` as `(radius, mass)` pairs,
    /// starting at radius 0. The final mass is exactly 1.
    pub fn ball_mass_profile(&self, mu: &Measure, x: usize) -> Vec<(f64, f64)> {
        let masses = self.cumulative(mu.weights(), x);
        let mut out: Vec<(f64, f64)> = self.radii[x].iter().copied().zip(masses).collect();
        out.last_mut().unwrap().1 = 1.0;
        out
    }

    /// Cumulative masses of `w` at each level of `x`.
    pub fn cumulative(&self, w: &[f64], x: usize) -> Vec<f64> {
        let order = self.sorted_neighbors(x);
        let mut out = Vec::with_capacity(self.ends[x].len());
        let mut acc = 0.0;
        let mut pos = 0usize;
        for &end in &self.ends[x] {
            while pos < end as usize {
                acc += w[order[pos] as usize];
                pos += 1;
            }
            out.push(acc);
        }
        out
    }
}

fn parse_reals(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| format(format!("`{t}` is not a number"))))
        .collect()
}

fn triangle_witness(n: usize, dist: &[f64]) -> Option<(usize, usize, usize)> {
    for i in 0..n {
        let ri = &dist[i * n..(i + 1) * n];
        for j in 0..n {
            let dij = ri[j];
            let rj = &dist[j * n..(j + 1) * n];
            // d(i,k) ≤ d(i,j) + d(j,k), with a relative allowance for rounding.
            for k in 0..n {
                let bound = dij + rj[k];
                if ri[k] > bound + 1e-12 * bound.max(ri[k]) {
                    return Some((i, j, k));
                }
            }
        }
    }
    None
}

/// A probability vector over the points of a metric space.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct Measure {
    weights: Vec<f64>,
}

/// Allowed deviation of the total mass from 1.
pub const MASS_TOL: f64 = 1e-9;

impl Measure {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(domain("a measure needs at least one point"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
            return Err(validation(format!("weight {i} = {} is not a finite nonnegative number", weights[i])));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(validation(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { weights })
    }

    /// Rescales nonnegative weights to unit mass.
    pub fn normalized(mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(domain("cannot normalize weights with zero or non-finite total"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(weights)
    }

    /// The exact `1/n` vector.
    pub fn uniform(n: usize) -> Self {
        Self { weights: vec![1.0 / n as f64; n] }
    }

    pub fn dirac(n: usize, x: usize) -> Self {
        let mut weights = vec![0.0; n];
        weights[x] = 1.0;
        Self { weights }
    }

    /// `n` reals, one per line.
    pub fn parse(text: &str) -> Result<Self> {
        let w = text
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| format(format!("`{t}` is not a number"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(w)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// One weight per line, shortest round-trip decimal.
    pub fn to_text(&self) -> String {
        self.weights.iter().map(|w| format!("{w}\n")).collect()
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len()).filter(|&i| self.weights[i] > 0.0).collect()
    }

    /// `μ(A ∩ S) / μ(S)`.
    pub fn condition(&self, set: &[usize]) -> Result<Self> {
        let mut w = vec![0.0; self.weights.len()];
        for &i in set {
            w[i] = self.weights[i];
        }
        Self::normalized(w)
    }

    pub(crate) fn check_len(&self, n: usize) -> Result<()> {
        if self.weights.len() != n {
            return Err(domain(format!("measure has {} weights but the space has {n} points", self.weights.len())));
        }
        Ok(())
    }
}

/// Ball masses of one measure at every level of every point, for
/// logarithmic-time lookups `ρ(B(x, r))`.
#[derive(Debug, Clone)]
pub struct BallProfiles<'a> {
    space: &'a MetricSpace,
    masses: Vec<Vec<f64>>,
}

impl<'a> BallProfiles<'a> {
    pub fn new(space: &'a MetricSpace, w: &[f64]) -> Self {
        let masses = (0..space.len()).map(|x| space.cumulative(w, x)).collect();
        Self { space, masses }
    }

    /// `ρ(B(x, r))` for the closed ball.
    pub fn mass(&self, x: usize, r: f64) -> f64 {
        let j = self.space.levels(x).partition_point(|&v| v <= r);
        if j == 0 {
            0.0
        } else {
            self.masses[x][j - 1]
        }
    }

    pub fn masses(&self, x: usize) -> &[f64] {
        &self.masses[x]
    }
}
