//! End-to-end pipeline: solve the saddle point, round the primal measure to
//! a chaining tree, condition and round the dual measure to a packing tree,
//! and check every proved inequality along the way.

use std::f64::consts::E;
use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{domain, Error, Result};
use crate::evaluate::{entropic_dual_value, gamma_value};
use crate::functional::ChainingFunctional;
use crate::metric::{Measure, MetricSpace};
use crate::reduce::{condition_dual, ConditioningResult};
use crate::rounding::{
    chaining_to_measure, greedy_ball_partition, greedy_separated_partition, labelled_to_chaining, per_path_slack,
    val_chaining, val_labelled, val_packing, ChainingTree, LabelledNet, PackingTree, SeparatedPartition,
};
use crate::solve::{solve_saddle_point, SaddleSolution, SolverParams, C_GAP};
use crate::text::sig9;

/// Floor on the denominator of the reported sandwich ratio.
pub const RATIO_FLOOR: f64 = 1e-12;

/// Every constant the pipeline checks against, for a given `α`.
#[derive(Debug, Clone, Serialize)]
pub struct Constants {
    pub alpha: f64,
    /// `½α²(1−α)`, the factor in the per-path greedy inequality.
    pub per_path_factor: f64,
    /// `2/(α²(1−α))`: `val(labelled net) ≤ this · γ(ρ)`.
    pub labelled_from_gamma: f64,
    /// `val(chaining tree) ≤ 8 · val(labelled net)`.
    pub chaining_from_labelled: f64,
    /// `γ(measure of a chaining tree) ≤ 3 · val(chaining tree)`.
    pub measure_from_chaining: f64,
    /// `½(1−α)`: `½(1−α) · val(packing tree) ≤ γ(μ)` for every `μ`.
    pub weak_duality: f64,
    /// `4C(α)` with `C(α) = 40/(3α²)`.
    pub separated_bound: f64,
    /// `60α⁻²`: simplified duals at least this times `diam·h(1/2)` take the trivial tree.
    pub trivial_threshold: f64,
    /// Additive `diam/e` in `entropic(ν) ≤ 2·min_μ φ(μ, ν) + diam/e`.
    pub entropic_offset: f64,
    /// Documented solver gap constant.
    pub solver_gap: f64,
}

impl Constants {
    pub fn new(alpha: f64) -> Self {
        let a2 = alpha * alpha;
        Self {
            alpha,
            per_path_factor: 0.5 * a2 * (1.0 - alpha),
            labelled_from_gamma: 2.0 / (a2 * (1.0 - alpha)),
            chaining_from_labelled: 8.0,
            measure_from_chaining: 3.0,
            weak_duality: 0.5 * (1.0 - alpha),
            separated_bound: 4.0 * 40.0 / (3.0 * a2),
            trivial_threshold: 60.0 / a2,
            entropic_offset: 1.0 / E,
            solver_gap: C_GAP,
        }
    }
}

/// One inequality `lhs ≤ rhs` checked by the pipeline.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolverSummary {
    pub iterations: usize,
    pub dual_proxy: f64,
    pub gap_estimate: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    /// SHA-256 prefix of the distances, the functional and the parameters.
    pub instance: String,
    pub n: usize,
    pub diameter: f64,
    pub functional: String,
    pub solver: SolverSummary,
    /// `γ(μ*)`.
    pub gamma_primal: f64,
    pub val_labelled: f64,
    pub val_chaining_star: f64,
    /// `γ` of the measure induced by the chaining tree.
    pub gamma_chaining_measure: f64,
    /// `H(ν*, ν*)`.
    pub entropic_dual_star: f64,
    /// Size of the conditioning set `S`.
    pub conditioned_support: usize,
    /// `min_{x ∈ S} H(ν_S, x)`.
    pub simplified_dual_star: f64,
    pub val_packing_star: f64,
    pub packing_trivial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pre_tree_value: Option<f64>,
    /// `val_chaining_star / max(val_packing_star, 1e-12)`; 1 when both vanish.
    pub sandwich_ratio: f64,
    pub constants: Constants,
    pub checks: Vec<Check>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<StageTiming>,
}

impl CertificateReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.holds)
    }

    pub fn first_failure(&self) -> Option<&Check> {
        self.checks.iter().find(|c| !c.holds)
    }

    pub fn without_timings(mut self) -> Self {
        self.timings.clear();
        self
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "instance {}", self.instance);
        let _ = writeln!(out, "n = {}, diameter = {}, h = {}", self.n, sig9(self.diameter), self.functional);
        let _ = writeln!(
            out,
            "solver: {} iterations, gap estimate {}, converged {}",
            self.solver.iterations,
            sig9(self.solver.gap_estimate),
            self.solver.converged
        );
        let rows = [
            ("gamma (primal)", self.gamma_primal),
            ("val labelled net", self.val_labelled),
            ("val chaining tree", self.val_chaining_star),
            ("gamma of chaining measure", self.gamma_chaining_measure),
            ("entropic dual", self.entropic_dual_star),
            ("simplified dual", self.simplified_dual_star),
            ("val packing tree", self.val_packing_star),
            ("sandwich ratio", self.sandwich_ratio),
        ];
        for (k, v) in rows {
            let _ = writeln!(out, "{k}: {}", sig9(v));
        }
        if self.packing_trivial {
            let _ = writeln!(out, "packing tree: trivial two-leaf tree");
        }
        for c in &self.checks {
            let _ = write!(out, "{} {}: {} <= {}", if c.holds { "PASS" } else { "FAIL" }, c.name, sig9(c.lhs), sig9(c.rhs));
            match &c.detail {
                Some(d) => {
                    let _ = writeln!(out, " ({d})");
                }
                None => out.push('\n'),
            }
        }
        for t in &self.timings {
            let _ = writeln!(out, "time {}: {} s", t.stage, sig9(t.seconds));
        }
        out
    }
}

/// All intermediate objects of a pipeline run.
#[derive(Debug, Clone)]
pub struct PipelineArtifacts {
    pub report: CertificateReport,
    pub solution: SaddleSolution,
    pub net: LabelledNet,
    pub chaining: ChainingTree,
    pub conditioning: ConditioningResult,
    pub packing: SeparatedPartition,
}

/// Hex SHA-256 prefix identifying an instance.
pub fn instance_hash(space: &MetricSpace, h: &ChainingFunctional, params: &SolverParams, alpha: f64) -> String {
    let mut hasher = Sha256::new();
    hasher.update((space.len() as u64).to_le_bytes());
    for d in space.matrix() {
        hasher.update(d.to_bits().to_le_bytes());
    }
    hasher.update(h.to_string().as_bytes());
    hasher.update(alpha.to_bits().to_le_bytes());
    hasher.update((params.max_iters as u64).to_le_bytes());
    hasher.update(params.step_c.to_bits().to_le_bytes());
    hasher.update(params.gap_target.unwrap_or(f64::NAN).to_bits().to_le_bytes());
    let digest = hasher.finalize();
    digest.iter().take(16).map(|b| format!("{b:02x}")).collect()
}

struct Checker {
    tol_scale: f64,
    checks: Vec<Check>,
}

impl Checker {
    fn le(&mut self, name: &str, lhs: f64, rhs: f64) {
        let tol = 1e-9 * self.tol_scale + 1e-12 * rhs.abs();
        self.checks.push(Check { name: name.into(), lhs, rhs, holds: lhs <= rhs + tol, detail: None });
    }

    fn valid(&mut self, name: &str, outcome: Result<()>) {
        let detail = outcome.err().map(|e| e.to_string());
        self.checks.push(Check { name: name.into(), lhs: 0.0, rhs: 0.0, holds: detail.is_none(), detail });
    }
}

struct Stopwatch {
    start: Instant,
    timings: Vec<StageTiming>,
}

impl Stopwatch {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: stage.into(), seconds: (now - self.start).as_secs_f64() });
        self.start = now;
    }
}

/// Runs every stage and records each inequality, without failing on violations.
pub fn run_pipeline_artifacts(
    h: &ChainingFunctional,
    space: &MetricSpace,
    params: &SolverParams,
    alpha: f64,
) -> Result<PipelineArtifacts> {
    if !h.is_normalized() {
        return Err(domain(format!("the pipeline needs a normalized chaining functional, got {h}")));
    }
    if space.has_duplicates() {
        return Err(domain("the pipeline needs distinct points"));
    }
    let constants = Constants::new(alpha);
    let diam = space.diameter();
    let mut clock = Stopwatch { start: Instant::now(), timings: Vec::new() };
    let mut check = Checker { tol_scale: diam.max(1.0), checks: Vec::new() };

    let solution = solve_saddle_point(h, space, params)?;
    let mu_star = &solution.mu_star;
    let gamma_primal = gamma_value(h, space, mu_star)?;
    clock.lap("solve");

    let net = greedy_ball_partition(space, mu_star, alpha)?;
    let val_l = val_labelled(&net, h);
    let chaining = labelled_to_chaining(&net, space, h)?;
    let val_c = val_chaining(&chaining);
    let mu_c = chaining_to_measure(&chaining)?;
    let gamma_c = gamma_value(h, space, &mu_c)?;
    clock.lap("primal rounding");

    let entropic = entropic_dual_value(h, space, &solution.nu_star)?.aggregate;
    let conditioning = condition_dual(h, space, &solution.nu_star)?;
    clock.lap("conditioning");

    let packing = greedy_separated_partition(space, &conditioning.nu_s, h, alpha)?;
    let val_p = val_packing(&packing.tree, h);
    clock.lap("dual rounding");

    let h_half = h.value(0.5);
    check.le("diameter lower bound: diam·h(1/2)/2 <= gamma", 0.5 * diam * h_half, gamma_primal);
    check.valid("labelled net is valid", net.validate(space));
    check.le("per-path greedy inequality: max slack <= 0", per_path_slack(&net, space, h, mu_star).max(0.0), 0.0);
    check.le("val labelled <= 2/(a^2(1-a))·gamma", val_l, constants.labelled_from_gamma * gamma_primal);
    check.valid("chaining tree is valid", chaining.validate(space, h));
    check.le("val chaining <= 8·val labelled", val_c, constants.chaining_from_labelled * val_l);
    check.le("gamma(chaining measure) <= 3·val chaining", gamma_c, constants.measure_from_chaining * val_c);
    check.le("entropic dual <= 2·gamma + diam/e", entropic, 2.0 * gamma_primal + diam / E);
    check.le("entropic dual <= simplified dual of conditioned measure + diam", entropic, conditioning.achieved_min + diam);
    check.le("conditioning never decreases the entropic value", conditioning.worst_decrease(), 0.0);
    check.valid("packing tree is valid", packing.tree.validate(space));
    if let Some(pre) = packing.pre_tree_value {
        check.le(
            "simplified dual <= 4C(a)·val auxiliary tree + 4C(a)·diam·h(1/2)",
            packing.simplified_dual,
            constants.separated_bound * (pre + diam * h_half),
        );
    }
    check.le("weak duality at the solver measure", constants.weak_duality * val_p, gamma_primal);
    check.le("weak duality at the chaining measure", constants.weak_duality * val_p, gamma_c);
    clock.lap("checks");

    let sandwich_ratio = if val_c == 0.0 && val_p == 0.0 { 1.0 } else { val_c / val_p.max(RATIO_FLOOR) };
    let report = CertificateReport {
        instance: instance_hash(space, h, params, alpha),
        n: space.len(),
        diameter: diam,
        functional: h.to_string(),
        solver: SolverSummary {
            iterations: solution.iterations,
            dual_proxy: solution.dual_proxy,
            gap_estimate: solution.gap_estimate,
            converged: solution.converged,
        },
        gamma_primal,
        val_labelled: val_l,
        val_chaining_star: val_c,
        gamma_chaining_measure: gamma_c,
        entropic_dual_star: entropic,
        conditioned_support: conditioning.set.len(),
        simplified_dual_star: conditioning.achieved_min,
        val_packing_star: val_p,
        packing_trivial: packing.trivial,
        pre_tree_value: packing.pre_tree_value,
        sandwich_ratio,
        constants,
        checks: check.checks,
        timings: clock.timings,
    };
    Ok(PipelineArtifacts { report, solution, net, chaining, conditioning, packing })
}

/// Runs the pipeline and fails with [`Error::Certificate`] on the first
/// violated inequality.
pub fn run_pipeline(
    h: &ChainingFunctional,
    space: &MetricSpace,
    params: &SolverParams,
    alpha: f64,
) -> Result<CertificateReport> {
    let report = run_pipeline_artifacts(h, space, params, alpha)?.report;
    if let Some(failed) = report.first_failure() {
        return Err(Error::Certificate {
            inequality: failed.name.clone(),
            instance: report.instance.clone(),
            report: Box::new(report.clone()),
        });
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct WeakDuality {
    pub holds: bool,
    /// `γ(μ) − ½(1−α)·val(T)`.
    pub slack: f64,
    pub gamma: f64,
    /// `½(1−α)·val(T)`.
    pub bound: f64,
}

/// Checks `γ(μ) ≥ ½(1−α)·val(T) − 1e−9` for a validated packing tree.
pub fn verify_weak_duality(
    h: &ChainingFunctional,
    space: &MetricSpace,
    tree: &PackingTree,
    mu: &Measure,
) -> Result<WeakDuality> {
    tree.validate(space)?;
    let gamma = gamma_value(h, space, mu)?;
    let bound = 0.5 * (1.0 - tree.alpha) * val_packing(tree, h);
    Ok(WeakDuality { holds: gamma >= bound - 1e-9, slack: gamma - bound, gamma, bound })
}
