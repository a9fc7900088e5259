//! Chaining functionals `h = F⁻¹`, where `F(s) = ∫ₛ^∞ f` is the tail of a
//! density `f` on `[0, ∞)`.
//!
//! All normalized kinds use `f(0) = 1`, so `h(1) = 0` and `h'(1) = -1`.
//! Every functional is extended by `h(a) = 0` for `a > 1`.

use std::f64::consts::PI;
use std::fmt;

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{domain, validation, Result};

/// Smallest probability accepted by [`ChainingFunctional::eval_h`].
pub const INVERSION_FLOOR: f64 = 1e-300;

/// Absolute tolerance on `s` for numeric inversion of `F`.
pub const INVERSION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Kind {
    /// Density proportional to `exp(-x^q)`, `q ≥ 1`.
    Exponential { q: f64 },
    /// `f(s) = exp(-π s² / 4)`, the half-normal rescaled to `f(0) = 1`.
    GaussianExact,
    /// `g(p) = sqrt(ln(1/p))`. Not normalized.
    GaussianApprox,
    /// Tabulated density, interpolated log-linearly between samples.
    CustomDensity(Tabulated),
}

/// A tabulated density after rescaling to unit mass and `f(0) = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    s: Vec<f64>,
    f: Vec<f64>,
    /// `tail[i] = ∫_{s_i}^∞ f`.
    tail: Vec<f64>,
    /// Log-slope of segment `i`, or `None` for a linear segment ending at zero.
    slope: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainingFunctional {
    kind: Kind,
    /// For `Exponential(q)`: `f(s) = exp(-(c s)^q)` with `c = Γ(1 + 1/q)`.
    c: f64,
}

impl fmt::Display for ChainingFunctional {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            Kind::Exponential { q } => write!(out, "exp:{q}"),
            Kind::GaussianExact => write!(out, "gaussian"),
            Kind::GaussianApprox => write!(out, "gaussian-approx"),
            Kind::CustomDensity(t) => write!(out, "density[{} samples]", t.s.len()),
        }
    }
}

impl ChainingFunctional {
    pub fn gaussian() -> Self {
        Self { kind: Kind::GaussianExact, c: PI.sqrt() / 2.0 }
    }

    pub fn gaussian_approx() -> Self {
        Self { kind: Kind::GaussianApprox, c: 1.0 }
    }

    pub fn exponential(q: f64) -> Result<Self> {
        if !(q.is_finite() && q >= 1.0) {
            return Err(domain(format!("exponential order q must be finite and ≥ 1, got {q}")));
        }
        Ok(Self { kind: Kind::Exponential { q }, c: gamma(1.0 + 1.0 / q) })
    }

    /// Builds a functional from samples `(s, f(s))` with `s` strictly
    /// increasing from 0. The density is taken to vanish past the last sample.
    pub fn from_density(samples: &[(f64, f64)]) -> Result<Self> {
        Ok(Self { kind: Kind::CustomDensity(Tabulated::new(samples)?), c: 1.0 })
    }

    /// Parses `gaussian`, `gaussian-approx`, `exp:q`. Densities need file
    /// access and are handled by the caller.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "gaussian" => Ok(Self::gaussian()),
            "gaussian-approx" => Ok(Self::gaussian_approx()),
            _ => {
                let q = spec
                    .strip_prefix("exp:")
                    .ok_or_else(|| domain(format!("unknown functional `{spec}`")))?;
                let q: f64 = q
                    .parse()
                    .map_err(|_| domain(format!("bad exponential order in `{spec}`")))?;
                Self::exponential(q)
            }
        }
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    /// Whether `f(0) = 1` holds, i.e. everything except `GaussianApprox`.
    pub fn is_normalized(&self) -> bool {
        !matches!(self.kind, Kind::GaussianApprox)
    }

    /// Kinds whose `h` is obtained by numeric inversion.
    pub fn is_numeric(&self) -> bool {
        match self.kind {
            Kind::Exponential { q } => q != 1.0,
            Kind::GaussianExact | Kind::CustomDensity(_) => true,
            Kind::GaussianApprox => false,
        }
    }

    /// The tail `F(s) = ∫ₛ^∞ f`.
    pub fn tail(&self, s: f64) -> f64 {
        if s <= 0.0 {
            return 1.0;
        }
        match &self.kind {
            Kind::Exponential { q } if *q == 1.0 => (-s).exp(),
            Kind::Exponential { q } => gamma_ur(1.0 / q, (self.c * s).powf(*q)),
            Kind::GaussianExact => erfc(s * self.c),
            Kind::GaussianApprox => (-s * s).exp(),
            Kind::CustomDensity(t) => t.tail_at(s),
        }
    }

    /// The density `f(s) = -F'(s)`.
    pub fn density(&self, s: f64) -> f64 {
        let s = s.max(0.0);
        match &self.kind {
            Kind::Exponential { q } if *q == 1.0 => (-s).exp(),
            Kind::Exponential { q } => (-(self.c * s).powf(*q)).exp(),
            Kind::GaussianExact => (-PI * s * s / 4.0).exp(),
            Kind::GaussianApprox => 2.0 * s * (-s * s).exp(),
            Kind::CustomDensity(t) => t.density_at(s),
        }
    }

    /// `lim_{p→0+} h(p)`: infinite unless the density has bounded support.
    pub fn h_zero(&self) -> f64 {
        match &self.kind {
            Kind::CustomDensity(t) => *t.s.last().expect("nonempty table"),
            _ => f64::INFINITY,
        }
    }

    /// `h(p)` with the domain checks of the public API.
    pub fn eval_h(&self, p: f64) -> Result<f64> {
        if p.is_nan() || p <= 0.0 {
            return Err(domain(format!("h is defined for p > 0, got {p}")));
        }
        if p < INVERSION_FLOOR {
            return Err(domain(format!("p = {p:e} is below the inversion floor {INVERSION_FLOOR:e}")));
        }
        Ok(self.value(p))
    }

    /// `h'(a) = -1/f(h(a))` for `a ∈ (0, 1]`; at `a = 1` this is the left derivative.
    pub fn eval_h_prime(&self, a: f64) -> Result<f64> {
        if a.is_nan() || a <= 0.0 || a > 1.0 {
            return Err(domain(format!("h' is defined for a in (0, 1], got {a}")));
        }
        if a < INVERSION_FLOOR {
            return Err(domain(format!("a = {a:e} is below the inversion floor {INVERSION_FLOOR:e}")));
        }
        Ok(self.slope(a))
    }

    /// `h` on `[0, ∞)` without checks: `h(0) = h_zero()`, `h(p) = 0` for `p ≥ 1`.
    pub fn value(&self, p: f64) -> f64 {
        if p >= 1.0 {
            return 0.0;
        }
        if !(p > 0.0) {
            return self.h_zero();
        }
        match &self.kind {
            Kind::Exponential { q } if *q == 1.0 => -p.ln(),
            Kind::Exponential { .. } => self.invert(p),
            Kind::GaussianExact => {
                // erfc_inv is accurate to a few ulps; one Newton step on F polishes it.
                let s = erfc_inv(p) / self.c;
                let f = self.density(s);
                if f > 0.0 {
                    (s + (self.tail(s) - p) / f).max(0.0)
                } else {
                    s
                }
            }
            Kind::GaussianApprox => (-p.ln()).sqrt(),
            Kind::CustomDensity(t) => t.inverse(p),
        }
    }

    /// `h'(a)` without checks. Returns the left derivative at `a ≥ 1`.
    pub fn slope(&self, a: f64) -> f64 {
        if !(a > 0.0) {
            return f64::NEG_INFINITY;
        }
        let a = a.min(1.0);
        match &self.kind {
            Kind::Exponential { q } if *q == 1.0 => -1.0 / a,
            Kind::GaussianApprox => {
                let l = -a.ln();
                if l <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -1.0 / (2.0 * a * l.sqrt())
                }
            }
            _ => -1.0 / self.density(self.value(a)),
        }
    }

    /// Bracketing bisection followed by safeguarded Newton steps on `ln F`.
    fn invert(&self, p: f64) -> f64 {
        let target = p.ln();
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.tail(hi) > p {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        while hi - lo > 1e-3 * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.tail(mid) > p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..100 {
            let t = self.tail(s);
            let f = self.density(s);
            if t > p {
                lo = s;
            } else {
                hi = s;
            }
            let mut next = if t > 0.0 && f > 0.0 { s + (t.ln() - target) * t / f } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - s).abs();
            s = next;
            if step < 0.1 * INVERSION_TOL || hi - lo < INVERSION_TOL {
                break;
            }
        }
        s
    }
}

impl Tabulated {
    fn new(samples: &[(f64, f64)]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(validation("a tabulated density needs at least two samples"));
        }
        if samples[0].0 != 0.0 {
            return Err(validation("tabulated density must start at s = 0"));
        }
        for (i, &(s, f)) in samples.iter().enumerate() {
            if !s.is_finite() || !f.is_finite() || f < 0.0 {
                return Err(validation(format!("sample {i} is not a finite nonnegative pair")));
            }
            if i > 0 {
                let (s0, f0) = samples[i - 1];
                if s <= s0 {
                    return Err(validation(format!("grid is not strictly increasing at sample {i}")));
                }
                if f > f0 {
                    return Err(validation(format!("density increases at s = {s}")));
                }
            }
        }
        if samples[0].1 <= 0.0 {
            return Err(validation("density must be positive at s = 0"));
        }
        // Keep everything up to and including the first zero sample.
        let end = samples.iter().position(|&(_, f)| f == 0.0).map_or(samples.len(), |i| i + 1);
        let samples = &samples[..end];

        let mut slope = Vec::with_capacity(samples.len() - 1);
        for w in samples.windows(2) {
            let ((s0, f0), (s1, f1)) = (w[0], w[1]);
            slope.push(if f1 > 0.0 { Some((f1.ln() - f0.ln()) / (s1 - s0)) } else { None });
        }
        for i in 1..slope.len() {
            let left = slope[i - 1].expect("only the last segment can reach zero");
            let right = match slope[i] {
                Some(k) => k,
                // A linear segment to zero has log-derivative -1/Δ at its start.
                None => -1.0 / (samples[i + 1].0 - samples[i].0),
            };
            if right > left + 1e-9 * left.abs().max(1.0) {
                return Err(validation(format!(
                    "density is not log-concave at s = {}",
                    samples[i].0
                )));
            }
        }

        let f0 = samples[0].1;
        let mut table = Tabulated {
            s: samples.iter().map(|p| p.0).collect(),
            f: samples.iter().map(|p| p.1 / f0).collect(),
            tail: Vec::new(),
            slope,
        };
        let mass = table.integrate();
        // With f(0) = 1 already, stretching s by 1/mass gives unit mass and keeps f(0) = 1.
        for s in &mut table.s {
            *s /= mass;
        }
        for k in table.slope.iter_mut().flatten() {
            *k *= mass;
        }
        table.integrate();
        Ok(table)
    }

    /// Fills `tail` and returns the total mass.
    fn integrate(&mut self) -> f64 {
        let n = self.s.len();
        self.tail = vec![0.0; n];
        for i in (0..n - 1).rev() {
            self.tail[i] = self.tail[i + 1] + self.partial(i, self.s[i]);
        }
        self.tail[0]
    }

    /// `∫_x^{s_{i+1}} f` for `x` in segment `i`.
    fn partial(&self, i: usize, x: f64) -> f64 {
        let u = self.s[i + 1] - x;
        match self.slope[i] {
            Some(k) if k == 0.0 => self.f[i + 1] * u,
            Some(k) => self.f[i + 1] * (-k * u).exp_m1() / -k,
            None => {
                let d = self.s[i + 1] - self.s[i];
                self.f[i] * u * u / (2.0 * d)
            }
        }
    }

    fn segment(&self, x: f64) -> Option<usize> {
        if x >= *self.s.last().unwrap() {
            return None;
        }
        Some(self.s.partition_point(|&s| s <= x) - 1)
    }

    fn tail_at(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(i) => self.tail[i + 1] + self.partial(i, x),
        }
    }

    fn density_at(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(i) => match self.slope[i] {
                Some(k) => self.f[i] * (k * (x - self.s[i])).exp(),
                None => self.f[i] * (self.s[i + 1] - x) / (self.s[i + 1] - self.s[i]),
            },
        }
    }

    fn inverse(&self, p: f64) -> f64 {
        if p >= self.tail[0] {
            return 0.0;
        }
        // First grid index whose tail is below p; the answer lies just before it.
        let j = self.tail.partition_point(|&t| t >= p);
        let i = j - 1;
        let q = p - self.tail[j];
        let x = match self.slope[i] {
            Some(k) if k == 0.0 => self.s[j] - q / self.f[j],
            Some(k) => self.s[j] + (-k * q / self.f[j]).ln_1p() / k,
            None => {
                let d = self.s[j] - self.s[i];
                self.s[j] - (2.0 * d * q / self.f[i]).sqrt()
            }
        };
        x.clamp(self.s[i], self.s[j])
    }
}

/// One line of the property grid.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub applicable: bool,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct PropertyReport {
    pub functional: String,
    pub grid_points: usize,
    pub checks: Vec<PropertyCheck>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Log-spaced grid of `n` points in `[lo, 1]`.
pub fn log_grid(n: usize, lo: f64) -> Vec<f64> {
    let l = lo.ln();
    (0..n)
        .map(|i| if i + 1 == n { 1.0 } else { (l * (1.0 - i as f64 / (n - 1) as f64)).exp() })
        .collect()
}

/// Runs the invariant grid: `grid` points for one-dimensional checks and a
/// `√grid × √grid` log-grid (plus extension pairs) for sub-multiplicativity.
pub fn property_report(h: &ChainingFunctional, grid: usize, tol: f64) -> PropertyReport {
    let grid = grid.max(4);
    let a = log_grid(grid, 1e-12);
    let hv: Vec<f64> = a.iter().map(|&x| h.value(x)).collect();
    let normalized = h.is_normalized();
    let mut checks = Vec::new();
    let mut push = |name, applicable: bool, worst: f64, tolerance: f64| {
        checks.push(PropertyCheck {
            name,
            applicable,
            worst,
            tolerance,
            passed: !applicable || worst <= tolerance,
        });
    };

    push("h(1) = 0", true, h.value(1.0).abs(), 0.0);

    let increase = hv.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    // Strictly decreasing: every step must go down, so the largest step is negative.
    push("strictly decreasing", true, if increase < 0.0 { 0.0 } else { increase.max(f64::MIN_POSITIVE) }, 0.0);

    let lin = (1..grid).map(|i| i as f64 / (grid - 1) as f64);
    let convex = lin
        .clone()
        .zip(lin.skip(1))
        .map(|(x, y)| h.value(0.5 * (x + y)) - 0.5 * (h.value(x) + h.value(y)))
        .fold(0.0, f64::max);
    push("convex (midpoint)", normalized, convex, tol);

    push("|h'(1)| = 1", normalized, (h.slope(1.0) + 1.0).abs(), tol);

    let side = (grid as f64).sqrt().round().max(2.0) as usize;
    let b = log_grid(side, 1e-6);
    let mut sub = 0.0f64;
    for &x in &b {
        for &y in &b {
            sub = sub.max(h.value(x * y) - h.value(x) - h.value(y));
        }
        // Extension pairs: one factor above 1, product at most 1.
        for k in 1..=4 {
            let big = 1.0 + k as f64 / 4.0;
            let small = x / big;
            sub = sub.max(h.value(big * small) - h.value(big) - h.value(small));
        }
    }
    push("sub-multiplicative", true, sub, tol);

    let mut deriv = 0.0f64;
    let mut log_bound = 0.0f64;
    for (&x, &v) in a.iter().zip(&hv) {
        let ah = x * h.slope(x);
        deriv = deriv.max(-1.0 - ah).max(ah);
        log_bound = log_bound.max(v + x.ln());
    }
    push("-1 ≤ a·h'(a) ≤ 0", normalized, deriv, tol);
    push("h(a) ≤ ln(1/a)", normalized, log_bound, tol);

    let inv = a
        .iter()
        .zip(&hv)
        .map(|(&x, &v)| (h.tail(v) - x).abs())
        .fold(0.0, f64::max);
    push("F(h(p)) = p", true, inv, tol);

    let mut fd = 0.0f64;
    for &x in a.iter().filter(|&&x| x > 1e-8 && x < 0.99) {
        let d = 1e-4 * x.min(1.0 - x);
        let central = (h.value(x + d) - h.value(x - d)) / (2.0 * d);
        let exact = h.slope(x);
        fd = fd.max(((central - exact) / exact).abs());
    }
    push("h' matches finite differences", true, fd, 1e-5);

    PropertyReport { functional: h.to_string(), grid_points: grid, checks }
}
