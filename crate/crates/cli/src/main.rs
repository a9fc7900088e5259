//! `majorize`: command-line front end for evaluating majorizing-measure
//! functionals and building chaining and packing certificates.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use majorizing::certify::run_pipeline_artifacts;
use majorizing::evaluate::DualValueBreakdown;
use majorizing::functional::property_report;
use majorizing::reduce::condition_dual;
use majorizing::rounding::{
    dudley_tree, greedy_ball_partition, greedy_separated_partition, labelled_to_admissible, labelled_to_chaining,
    val_admissible, LabelledNet,
};
use majorizing::text::sig9;
use majorizing::{
    entropic_dual_value, gamma_value, simplified_dual_value, solve_saddle_point, ChainingFunctional, Error, Measure,
    MetricOptions, MetricSpace, SolverParams,
};

#[derive(Parser)]
#[command(name = "majorize", version, about = "Majorizing measures, chaining trees and packing trees on finite metric spaces")]
struct Cli {
    /// Worker threads for parallel stages (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// γ_h(μ) = max_x ∫ h(μ(B(x, r))) dr.
    Gamma(EvalArgs),
    /// ∫ H(ν, x) dν(x).
    Entropic(EvalArgs),
    /// min over supp ν of H(ν, x).
    Simplified(EvalArgs),
    /// Approximately solve the saddle-point program.
    Solve(SolveArgs),
    /// Condition a dual measure onto a subset by greedy eviction.
    Condition(EvalArgs),
    /// Greedy ball partitioning of a measure, converted to a chaining tree.
    Chain(ChainArgs),
    /// Greedy separated partitioning of a measure into a packing tree.
    Pack(RoundArgs),
    /// Dudley's chaining tree from farthest-point nets.
    Dudley(CommonArgs),
    /// Convert a stored labelled net into an admissible net.
    Admissible(AdmissibleArgs),
    /// Run the full pipeline and check every inequality.
    Certify(CertifyArgs),
    /// Check the defining properties of a chaining functional on a grid.
    CheckH(CheckHArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Dot,
}

#[derive(Args)]
struct MetricArgs {
    /// Distance matrix (`n` then `n` rows) or point cloud (`points d` then rows).
    #[arg(long)]
    metric: PathBuf,
    /// Allow zero distances between distinct points.
    #[arg(long)]
    pseudo: bool,
    /// Skip the O(n³) triangle-inequality check.
    #[arg(long)]
    no_triangle_check: bool,
}

impl MetricArgs {
    fn load(&self) -> majorizing::Result<MetricSpace> {
        let opts = MetricOptions { pseudo: self.pseudo, check_triangle: !self.no_triangle_check };
        MetricSpace::load(&self.metric, opts).map_err(|e| with_path(e, &self.metric))
    }
}

/// Prefixes I/O errors with the file they concern.
fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        e => e,
    }
}

#[derive(Args)]
struct CommonArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Chaining functional: gaussian, gaussian-approx, exp:q or density:FILE.
    #[arg(long = "h", default_value = "gaussian")]
    h: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Measure file (one weight per line) or `uniform`.
    #[arg(long, default_value = "uniform")]
    measure: String,
    /// Write the conditioned measure here (condition only).
    #[arg(long)]
    nu_out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value = "uniform")]
    measure: String,
    /// Scale-decay parameter in (0, 1/10].
    #[arg(long, default_value_t = majorizing::rounding::DEFAULT_ALPHA)]
    alpha: f64,
}

#[derive(Args)]
struct ChainArgs {
    #[command(flatten)]
    round: RoundArgs,
    /// Also write the intermediate labelled net as JSON.
    #[arg(long)]
    net_out: Option<PathBuf>,
}

#[derive(Args)]
struct AdmissibleArgs {
    #[command(flatten)]
    metric: MetricArgs,
    /// Labelled net JSON, as written by `chain --net-out`.
    #[arg(long)]
    net: PathBuf,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = SolverParams::default().max_iters)]
    max_iters: usize,
    /// Stop once the gap estimate falls below this value.
    #[arg(long)]
    gap_target: Option<f64>,
    /// Constant c in the step size c·r/(L·√t).
    #[arg(long, default_value_t = 1.0)]
    step_c: f64,
}

impl SolverArgs {
    fn params(&self, trace_every: usize) -> SolverParams {
        SolverParams { max_iters: self.max_iters, step_c: self.step_c, gap_target: self.gap_target, trace_every }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write a CSV convergence trace (iteration, primal, dual_proxy).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Iterations between trace rows.
    #[arg(long, default_value_t = 10)]
    trace_every: usize,
    #[arg(long)]
    mu_out: Option<PathBuf>,
    #[arg(long)]
    nu_out: Option<PathBuf>,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = majorizing::rounding::DEFAULT_ALPHA)]
    alpha: f64,
    /// Leave stage timings out so reports are byte-identical across runs.
    #[arg(long)]
    omit_timings: bool,
}

#[derive(Args)]
struct CheckHArgs {
    #[arg(long = "h", default_value = "gaussian")]
    h: String,
    /// Number of grid points.
    #[arg(long, default_value_t = 2500)]
    grid: usize,
    /// Tolerance; defaults to 1e-9 for closed forms and 1e-6 for numeric inversions.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Outcome of a subcommand that ran to completion.
enum Outcome {
    Ok,
    /// A checked property failed; the report has already been written.
    Failed(String),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Failed(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Error::Certificate { inequality, instance, .. }) => {
            eprintln!("error: `{inequality}` failed on instance {instance}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> majorizing::Result<Outcome> {
    match command {
        Command::Gamma(a) => gamma(a),
        Command::Entropic(a) => dual(a, true),
        Command::Simplified(a) => dual(a, false),
        Command::Solve(a) => solve(a),
        Command::Condition(a) => condition(a),
        Command::Chain(a) => chain(a),
        Command::Pack(a) => pack(a),
        Command::Dudley(a) => dudley(a),
        Command::Admissible(a) => admissible(a),
        Command::Certify(a) => certify(a),
        Command::CheckH(a) => check_h(a),
    }
}

fn parse_functional(spec: &str) -> majorizing::Result<ChainingFunctional> {
    let Some(path) = spec.strip_prefix("density:") else {
        return ChainingFunctional::parse(spec);
    };
    let text = fs::read_to_string(path).map_err(|e| with_path(e.into(), Path::new(path)))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().map(str::trim).enumerate() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cols: Vec<f64> = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Error::Format(format!("density line {}: expected two numbers", i + 1)))?;
        match cols[..] {
            [s, f] => samples.push((s, f)),
            _ => return Err(Error::Format(format!("density line {}: expected two numbers", i + 1))),
        }
    }
    ChainingFunctional::from_density(&samples)
}

fn load_measure(spec: &str, n: usize) -> majorizing::Result<Measure> {
    let mu = if spec == "uniform" { Measure::uniform(n) } else { Measure::load(spec).map_err(|e| with_path(e, Path::new(spec)))? };
    if mu.len() != n {
        return Err(Error::Validation(format!("measure has {} weights but the metric has {n} points", mu.len())));
    }
    Ok(mu)
}

fn emit(out: Option<&Path>, body: &str) -> majorizing::Result<()> {
    match out {
        Some(p) => fs::write(p, body)?,
        None => std::io::stdout().write_all(body.as_bytes())?,
    }
    Ok(())
}

fn json<T: serde::Serialize>(value: &T) -> majorizing::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn no_dot(format: Format, what: &str) -> majorizing::Result<()> {
    if format == Format::Dot {
        return Err(Error::Validation(format!("{what} has no DOT rendering")));
    }
    Ok(())
}

fn gamma(a: EvalArgs) -> majorizing::Result<Outcome> {
    let c = &a.common;
    no_dot(c.format, "gamma")?;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let mu = load_measure(&a.measure, x.len())?;
    let v = gamma_value(&h, &x, &mu)?;
    let body = match c.format {
        Format::Json => json(&serde_json::json!({ "gamma": v }))?,
        _ => format!("{}\n", sig9(v)),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn breakdown_text(b: &DualValueBreakdown) -> String {
    let mut out = format!("{}\n", sig9(b.aggregate));
    for &(x, v) in &b.per_point {
        let _ = writeln!(out, "  {x} {}", sig9(v));
    }
    out
}

fn dual(a: EvalArgs, entropic: bool) -> majorizing::Result<Outcome> {
    let c = &a.common;
    no_dot(c.format, "a dual value")?;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let nu = load_measure(&a.measure, x.len())?;
    let b = if entropic { entropic_dual_value(&h, &x, &nu)? } else { simplified_dual_value(&h, &x, &nu)? };
    let body = match c.format {
        Format::Json => json(&b)?,
        _ => breakdown_text(&b),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn solve(a: SolveArgs) -> majorizing::Result<Outcome> {
    let c = &a.common;
    no_dot(c.format, "a saddle-point solution")?;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let every = if a.trace.is_some() { a.trace_every.max(1) } else { 0 };
    let sol = solve_saddle_point(&h, &x, &a.solver.params(every))?;
    if let Some(p) = &a.trace {
        let mut csv = String::from("iteration,primal,dual_proxy\n");
        for row in &sol.trace {
            let _ = writeln!(csv, "{},{},{}", row.iteration, row.primal, row.dual_proxy);
        }
        fs::write(p, csv)?;
    }
    if let Some(p) = &a.mu_out {
        fs::write(p, sol.mu_star.to_text())?;
    }
    if let Some(p) = &a.nu_out {
        fs::write(p, sol.nu_star.to_text())?;
    }
    let body = match c.format {
        Format::Json => json(&serde_json::json!({
            "primal_value": sol.primal_value,
            "dual_proxy": sol.dual_proxy,
            "gap_estimate": sol.gap_estimate,
            "iterations": sol.iterations,
            "converged": sol.converged,
            "mu_star": sol.mu_star,
            "nu_star": sol.nu_star,
        }))?,
        _ => format!(
            "primal value: {}\ndual proxy: {}\ngap estimate: {}\niterations: {}\nconverged: {}\n",
            sig9(sol.primal_value),
            sig9(sol.dual_proxy),
            sig9(sol.gap_estimate),
            sol.iterations,
            sol.converged
        ),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn condition(a: EvalArgs) -> majorizing::Result<Outcome> {
    let c = &a.common;
    no_dot(c.format, "a conditioning result")?;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let nu = load_measure(&a.measure, x.len())?;
    let r = condition_dual(&h, &x, &nu)?;
    if let Some(p) = &a.nu_out {
        fs::write(p, r.nu_s.to_text())?;
    }
    let body = match c.format {
        Format::Json => json(&r)?,
        _ => {
            let set: Vec<String> = r.set.iter().map(usize::to_string).collect();
            let removed: Vec<String> = r.removed_order.iter().map(usize::to_string).collect();
            format!(
                "S: {}\nevicted: {}\nentropic dual of nu: {}\nachieved min: {}\nbound: {} <= {}\n",
                set.join(" "),
                if removed.is_empty() { "none".to_string() } else { removed.join(" ") },
                sig9(r.initial_entropic()),
                sig9(r.achieved_min),
                sig9(r.initial_entropic()),
                sig9(r.achieved_min + x.diameter())
            )
        }
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn chain(a: ChainArgs) -> majorizing::Result<Outcome> {
    let r = &a.round;
    let c = &r.common;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let rho = load_measure(&r.measure, x.len())?;
    let net = greedy_ball_partition(&x, &rho, r.alpha)?;
    if let Some(p) = &a.net_out {
        fs::write(p, json(&net)?)?;
    }
    let tree = labelled_to_chaining(&net, &x, &h)?;
    let body = match c.format {
        Format::Json => json(&tree)?,
        Format::Dot => tree.to_dot(),
        Format::Text => format!("{}{}", net.summary(&h), tree.summary()),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn pack(a: RoundArgs) -> majorizing::Result<Outcome> {
    let c = &a.common;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let rho = load_measure(&a.measure, x.len())?;
    let out = greedy_separated_partition(&x, &rho, &h, a.alpha)?;
    let body = match c.format {
        Format::Json => json(&out.tree)?,
        Format::Dot => out.tree.to_dot(),
        Format::Text => {
            let mut s = out.tree.summary(&h);
            let _ = writeln!(s, "simplified dual: {}", sig9(out.simplified_dual));
            if out.trivial {
                s.push_str("trivial two-leaf tree\n");
            }
            s
        }
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn dudley(c: CommonArgs) -> majorizing::Result<Outcome> {
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let tree = dudley_tree(&x, &h)?;
    let body = match c.format {
        Format::Json => json(&tree)?,
        Format::Dot => tree.to_dot(),
        Format::Text => tree.summary(),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn admissible(a: AdmissibleArgs) -> majorizing::Result<Outcome> {
    let x = a.metric.load()?;
    let text = fs::read_to_string(&a.net).map_err(|e| with_path(e.into(), &a.net))?;
    let net: LabelledNet = serde_json::from_str(&text)?;
    let adm = labelled_to_admissible(&net, &x)?;
    adm.validate(&x)?;
    let body = match a.format {
        Format::Json => json(&adm)?,
        Format::Dot => adm.to_dot(),
        Format::Text => {
            let g = ChainingFunctional::gaussian_approx();
            let source = majorizing::rounding::val_labelled(&net, &g);
            let mut s = adm.summary(&x);
            let _ = writeln!(s, "labelled net value (sqrt-log functional): {}", sig9(source));
            if source > 0.0 {
                let _ = writeln!(s, "ratio: {}", sig9(val_admissible(&adm, &x) / source));
            }
            s
        }
    };
    emit(a.out.as_deref(), &body)?;
    Ok(Outcome::Ok)
}

fn certify(a: CertifyArgs) -> majorizing::Result<Outcome> {
    let c = &a.common;
    no_dot(c.format, "a certificate report")?;
    let h = parse_functional(&c.h)?;
    let x = c.metric.load()?;
    let mut report = run_pipeline_artifacts(&h, &x, &a.solver.params(0), a.alpha)?.report;
    if a.omit_timings {
        report = report.without_timings();
    }
    let body = match c.format {
        Format::Json => json(&report)?,
        _ => report.to_text(),
    };
    emit(c.out.as_deref(), &body)?;
    Ok(match report.first_failure() {
        Some(f) => Outcome::Failed(format!("`{}` failed on instance {}", f.name, report.instance)),
        None => Outcome::Ok,
    })
}

fn check_h(a: CheckHArgs) -> majorizing::Result<Outcome> {
    no_dot(a.format, "a property report")?;
    let h = parse_functional(&a.h)?;
    let tol = a.tol.unwrap_or(if h.is_numeric() { 1e-6 } else { 1e-9 });
    let report = property_report(&h, a.grid, tol);
    let body = match a.format {
        Format::Json => json(&report)?,
        _ => {
            let mut s = format!("functional {} on {} grid points\n", report.functional, report.grid_points);
            for c in &report.checks {
                let status = match (c.applicable, c.passed) {
                    (false, _) => "SKIP",
                    (true, true) => "PASS",
                    (true, false) => "FAIL",
                };
                let _ = writeln!(s, "{status} {}: worst {} (tolerance {})", c.name, sig9(c.worst), sig9(c.tolerance));
            }
            s
        }
    };
    emit(a.out.as_deref(), &body)?;
    Ok(if report.all_passed() { Outcome::Ok } else { Outcome::Failed("functional property check failed".into()) })
}
