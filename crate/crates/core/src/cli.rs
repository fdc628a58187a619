//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning                                                        |
//! |------|----------------------------------------------------------------|
//! | 0    | success: certified optimal / feasible / solvers agree          |
//! | 1    | bad input: unreadable or invalid spec, bad flags or candidate  |
//! | 2    | a solver did not converge                                      |
//! | 3    | infeasible targets or infeasible candidate                     |
//! | 4    | feasible candidate that could not be certified optimal         |
//! | 5    | dual solver and oracle disagree                                |

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::certificate::{certify, CertificateStatus, CertifyOptions, Verdict};
use crate::dual::{solve, InitStrategy, Multipliers, SolveReport, SolverOptions};
use crate::entropy::EntropyFunction;
use crate::error::Error;
use crate::measure::{
    build_counting_grid, build_interval_grid, build_real_line_grid, DiscretizedMeasure,
    QuadratureRule,
};
use crate::oracle::{compare, primal_solve, CompareMetrics, CompareThresholds, OracleOptions};
use crate::problem::{
    classify_gaussian_feasibility, default_radius, gaussian_solution, BasisFunction,
    FeasibilityVerdict, MomentProblem,
};

pub const SCHEMA_VERSION: &str = "1";

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NOT_CERTIFIED: i32 = 4;
pub const EXIT_DISAGREE: i32 = 5;

/// Default node count of generated grids.
pub const DEFAULT_NODES: usize = 400;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropySpec {
    pub family: EntropyFunction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureSpecKind {
    Interval,
    RealLine,
    Counting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    pub kind: MeasureSpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<QuadratureRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionsSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertifyOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleOptions>,
}

/// The JSON problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpecFile {
    pub entropy: EntropySpec,
    pub measure: MeasureSpec,
    pub basis: Vec<BasisFunction>,
    pub targets: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<OptionsSpec>,
}

/// A spec error tied to the offending field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecError {
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for SpecError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

fn spec_err(field: &str, message: impl Into<String>) -> SpecError {
    SpecError {
        field: field.to_owned(),
        message: message.into(),
    }
}

impl ProblemSpecFile {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        serde_json::from_str(text).map_err(|e| {
            spec_err(
                &format!("line {} column {}", e.line(), e.column()),
                e.to_string(),
            )
        })
    }

    pub fn build_measure(&self) -> Result<DiscretizedMeasure, SpecError> {
        let ms = &self.measure;
        let n = ms.n.unwrap_or(DEFAULT_NODES);
        let grid_err = |e: Error| spec_err("measure", e.to_string());
        match ms.kind {
            MeasureSpecKind::Interval => {
                let lo = ms.lo.ok_or_else(|| spec_err("measure.lo", "required for an interval"))?;
                let hi = ms.hi.ok_or_else(|| spec_err("measure.hi", "required for an interval"))?;
                build_interval_grid(lo, hi, n, ms.rule.unwrap_or_default()).map_err(grid_err)
            }
            MeasureSpecKind::RealLine => {
                if ms.rule == Some(QuadratureRule::Trapezoid) {
                    return Err(spec_err("measure.rule", "real-line grids use gauss_legendre"));
                }
                let radius = ms
                    .radius
                    .unwrap_or_else(|| default_radius(&self.basis, &self.targets));
                build_real_line_grid(radius, n).map_err(grid_err)
            }
            MeasureSpecKind::Counting => build_counting_grid(n).map_err(grid_err),
        }
    }

    pub fn build(&self) -> Result<MomentProblem, SpecError> {
        let measure = self.build_measure()?;
        MomentProblem::new(
            self.entropy.family,
            measure,
            self.basis.clone(),
            self.targets.clone(),
        )
        .map_err(|e| {
            let field = match e {
                Error::LengthMismatch { .. } | Error::RankDeficientBasis { .. } => "basis",
                _ => "targets",
            };
            spec_err(field, e.to_string())
        })
    }

    fn options(&self) -> OptionsSpec {
        self.options.clone().unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSummary {
    pub objective: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub solve_ms: Option<f64>,
    pub certify_ms: Option<f64>,
    pub oracle_ms: Option<f64>,
}

/// Machine-readable output of every subcommand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportFile {
    pub schema_version: String,
    pub command: String,
    pub status: String,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemSpecFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feasibility: Option<FeasibilityVerdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
}

impl ReportFile {
    fn new(command: &str) -> Self {
        ReportFile {
            schema_version: SCHEMA_VERSION.to_owned(),
            command: command.to_owned(),
            status: String::new(),
            exit_code: EXIT_OK,
            error: None,
            problem: None,
            nodes: None,
            feasibility: None,
            solve: None,
            certificate: None,
            oracle: None,
            compare: None,
            timing: None,
        }
    }

    /// Pretty JSON, LF line endings, trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    fn finish(mut self, status: &str, code: i32) -> (Self, i32) {
        self.status = status.to_owned();
        self.exit_code = code;
        (self, code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum InitArg {
    Zeros,
    Lsq,
}

#[derive(Debug, Parser)]
#[command(name = "maxent", version, about = "Entropy minimization under moment constraints")]
pub struct Cli {
    /// Write the JSON report here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Moment residual tolerance of the multiplier solver.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    #[arg(long, global = true)]
    pub max_iter: Option<usize>,
    /// Number of sampled feasible directions in certificates.
    #[arg(long, global = true)]
    pub directions: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub init: Option<InitArg>,
    /// Include wall-clock timings (makes reports non-reproducible).
    #[arg(long, global = true)]
    pub timing: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a problem spec and certify the result.
    Solve { spec: PathBuf },
    /// Certify a candidate density (JSON array, {"values": [...]}, or "gaussian").
    Certify { spec: PathBuf, candidate: PathBuf },
    /// Classify three Gaussian moment targets.
    Feasible {
        #[arg(allow_negative_numbers = true)]
        b1: f64,
        #[arg(allow_negative_numbers = true)]
        b2: f64,
        #[arg(allow_negative_numbers = true)]
        b3: f64,
    },
    /// Solve, run the primal oracle, and compare.
    Compare { spec: PathBuf },
}

/// Parses arguments, runs the command, writes the report. Returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
            let sink: &mut dyn Write = if code == EXIT_OK { stdout } else { stderr };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    execute(&cli, stdout, stderr)
}

pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let outcome = match &cli.command {
        Command::Solve { spec } => load_spec(spec).map(|s| cmd_solve(&s, cli)),
        Command::Certify { spec, candidate } => {
            load_spec(spec).and_then(|s| cmd_certify(&s, candidate, cli))
        }
        Command::Feasible { b1, b2, b3 } => cmd_feasible([*b1, *b2, *b3], stdout),
        Command::Compare { spec } => load_spec(spec).map(|s| cmd_compare(&s, cli)),
    };
    let (report, code) = match outcome {
        Ok(r) => r,
        Err(msg) => {
            let _ = writeln!(stderr, "error: {msg}");
            return EXIT_INPUT;
        }
    };
    if let Some(err) = &report.error {
        let _ = writeln!(stderr, "{}: {err}", report.status);
    }
    let json = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = fs::write(path, json) {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_INPUT;
            }
        }
        // the feasible command prints its verdict line instead
        None if matches!(cli.command, Command::Feasible { .. }) => {}
        None => {
            if let Err(e) = stdout.write_all(json.as_bytes()) {
                let _ = writeln!(stderr, "error: {e}");
                return EXIT_INPUT;
            }
        }
    }
    code
}

fn load_spec(path: &Path) -> Result<ProblemSpecFile, String> {
    let text =
        fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    ProblemSpecFile::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
}

fn solver_options(spec: &ProblemSpecFile, cli: &Cli) -> SolverOptions {
    let mut o = spec.options().solver.unwrap_or_default();
    if let Some(t) = cli.tol {
        o.tol_moments = t;
    }
    if let Some(n) = cli.max_iter {
        o.max_iter = n;
    }
    if let Some(i) = cli.init {
        o.init = match i {
            InitArg::Zeros => InitStrategy::Zeros,
            InitArg::Lsq => InitStrategy::LeastSquaresLogDensity,
        };
    }
    o
}

fn certify_options(spec: &ProblemSpecFile, cli: &Cli) -> CertifyOptions {
    let mut o = spec.options().certificate.unwrap_or_default();
    if let Some(d) = cli.directions {
        o.directions = d;
    }
    if let Some(s) = cli.seed {
        o.seed = s;
    }
    o
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Maps solver errors onto exit codes.
fn error_code(e: &Error) -> (&'static str, i32) {
    match e {
        Error::NotConverged { .. } | Error::InitFailure(_) | Error::NoInteriorPoint(_) => {
            ("not_converged", EXIT_NOT_CONVERGED)
        }
        Error::InfeasibleTargets(_) => ("infeasible", EXIT_INFEASIBLE),
        _ => ("invalid_input", EXIT_INPUT),
    }
}

fn base_report(command: &str, spec: &ProblemSpecFile, p: &MomentProblem) -> ReportFile {
    let mut r = ReportFile::new(command);
    r.problem = Some(spec.clone());
    r.nodes = Some(p.measure().nodes().to_vec());
    if p.is_gaussian_case() {
        let b = p.targets();
        r.feasibility = Some(classify_gaussian_feasibility([b[0], b[1], b[2]]));
    }
    r
}

fn invalid(command: &str, spec: &ProblemSpecFile, e: impl std::fmt::Display) -> (ReportFile, i32) {
    let mut r = ReportFile::new(command);
    r.problem = Some(spec.clone());
    r.error = Some(e.to_string());
    r.finish("invalid_input", EXIT_INPUT)
}

/// `solve`: exit 0 when converged and certified, 4 when converged but not
/// certified, 2 when not converged, 3 for infeasible targets.
pub fn cmd_solve(spec: &ProblemSpecFile, cli: &Cli) -> (ReportFile, i32) {
    let p = match spec.build() {
        Ok(p) => p,
        Err(e) => return invalid("solve", spec, e),
    };
    let mut report = base_report("solve", spec, &p);
    let t0 = Instant::now();
    let solved = solve(&p, &solver_options(spec, cli));
    let solve_ms = ms_since(t0);
    let sol = match solved {
        Ok(s) => s,
        Err(e) => {
            let (status, code) = error_code(&e);
            report.error = Some(e.to_string());
            if let Error::NotConverged { best: Some(best), .. } = e {
                report.solve = Some(*best);
            }
            return report.finish(status, code);
        }
    };
    let t1 = Instant::now();
    let cert = certify(&sol.x_values, &p, Some(&sol.alpha), &certify_options(spec, cli));
    if cli.timing {
        report.timing = Some(Timing {
            solve_ms: Some(solve_ms),
            certify_ms: Some(ms_since(t1)),
            oracle_ms: None,
        });
    }
    report.solve = Some(sol);
    match cert {
        Ok(c) => {
            let verdict = c.verdict;
            report.certificate = Some(c);
            match verdict {
                Verdict::CertifiedOptimal => report.finish("certified_optimal", EXIT_OK),
                _ => report.finish("not_certified", EXIT_NOT_CERTIFIED),
            }
        }
        Err(e) => {
            report.error = Some(e.to_string());
            report.finish("not_certified", EXIT_NOT_CERTIFIED)
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum CandidateFile {
    Values(Vec<f64>),
    Named(String),
    Object {
        #[serde(default)]
        values: Option<Vec<f64>>,
        #[serde(default)]
        closed_form: Option<String>,
        #[serde(default)]
        alpha: Option<Vec<f64>>,
    },
}

/// `certify`: exit 0 certified optimal, 4 feasible but not certified,
/// 3 infeasible, 1 on unreadable or misaligned candidates.
pub fn cmd_certify(
    spec: &ProblemSpecFile,
    candidate: &Path,
    cli: &Cli,
) -> Result<(ReportFile, i32), String> {
    let p = match spec.build() {
        Ok(p) => p,
        Err(e) => return Ok(invalid("certify", spec, e)),
    };
    let text = fs::read_to_string(candidate)
        .map_err(|e| format!("cannot read {}: {e}", candidate.display()))?;
    let cand: CandidateFile = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", candidate.display()))?;
    let (values, closed_form, alpha) = match cand {
        CandidateFile::Values(v) => (Some(v), None, None),
        CandidateFile::Named(s) => (None, Some(s), None),
        CandidateFile::Object {
            values,
            closed_form,
            alpha,
        } => (values, closed_form, alpha),
    };
    let mut report = base_report("certify", spec, &p);
    let x = match (values, closed_form) {
        (Some(v), None) => {
            if v.len() != p.n() {
                return Err(format!(
                    "{}: candidate has {} values, the grid has {} nodes",
                    candidate.display(),
                    v.len(),
                    p.n()
                ));
            }
            if v.iter().any(|u| !u.is_finite()) {
                return Err(format!("{}: candidate values must be finite", candidate.display()));
            }
            v
        }
        (None, Some(name)) if name == "gaussian" => {
            let Some([i0, i1, i2]) = p.gaussian_moment_indices() else {
                return Err("the gaussian closed form needs monomials of degree 0, 1 and 2".into());
            };
            let b = p.targets();
            match gaussian_solution([b[i0], b[i1], b[i2]]) {
                Ok((g, _)) => p.measure().nodes().iter().map(|&t| g.density(t)).collect(),
                Err(e) => {
                    report.error = Some(e.to_string());
                    return Ok(report.finish("infeasible", EXIT_INFEASIBLE));
                }
            }
        }
        (None, Some(name)) => return Err(format!("unknown closed form {name:?}")),
        _ => return Err("candidate must give either values or a closed form".into()),
    };
    if let Some(a) = &alpha {
        if a.len() != p.m() {
            return Err(format!("alpha has {} entries, expected {}", a.len(), p.m()));
        }
    }
    let alpha = alpha.map(Multipliers);
    let t0 = Instant::now();
    let cert = certify(&x, &p, alpha.as_ref(), &certify_options(spec, cli));
    if cli.timing {
        report.timing = Some(Timing {
            solve_ms: None,
            certify_ms: Some(ms_since(t0)),
            oracle_ms: None,
        });
    }
    let c = cert.map_err(|e| e.to_string())?;
    let verdict = c.verdict;
    report.certificate = Some(c);
    Ok(match verdict {
        Verdict::CertifiedOptimal => report.finish("certified_optimal", EXIT_OK),
        Verdict::FeasibleNotCertified => report.finish("not_certified", EXIT_NOT_CERTIFIED),
        Verdict::Infeasible => report.finish("infeasible", EXIT_INFEASIBLE),
    })
}

/// `feasible`: prints the verdict line; exit 0 for the origin or an interior
/// triple, 3 otherwise.
pub fn cmd_feasible(b: [f64; 3], stdout: &mut dyn Write) -> Result<(ReportFile, i32), String> {
    if b.iter().any(|v| !v.is_finite()) {
        return Err(format!("targets must be finite numbers, got {b:?}"));
    }
    let v = classify_gaussian_feasibility(b);
    let label = serde_json::to_value(v.class)
        .ok()
        .and_then(|x| x.as_str().map(str::to_owned))
        .unwrap_or_default();
    let _ = writeln!(stdout, "{label} b1*b3-b2^2={}", v.gap);
    let code = if v.is_feasible() { EXIT_OK } else { EXIT_INFEASIBLE };
    let mut r = ReportFile::new("feasible");
    r.feasibility = Some(v);
    Ok(r.finish(&label, code))
}

/// `compare`: exit 0 when the dual solution and the oracle agree, 5 otherwise,
/// and the solve exit codes when either solver fails.
pub fn cmd_compare(spec: &ProblemSpecFile, cli: &Cli) -> (ReportFile, i32) {
    let p = match spec.build() {
        Ok(p) => p,
        Err(e) => return invalid("compare", spec, e),
    };
    let mut report = base_report("compare", spec, &p);
    let t0 = Instant::now();
    let sol = match solve(&p, &solver_options(spec, cli)) {
        Ok(s) => s,
        Err(e) => {
            let (status, code) = error_code(&e);
            report.error = Some(e.to_string());
            if let Error::NotConverged { best: Some(best), .. } = e {
                report.solve = Some(*best);
            }
            return report.finish(status, code);
        }
    };
    let solve_ms = ms_since(t0);
    let t1 = Instant::now();
    let oracle = primal_solve(&p, &spec.options().oracle.unwrap_or_default());
    let oracle_ms = ms_since(t1);
    if cli.timing {
        report.timing = Some(Timing {
            solve_ms: Some(solve_ms),
            certify_ms: None,
            oracle_ms: Some(oracle_ms),
        });
    }
    let o = match oracle {
        Ok(o) => o,
        Err(e) => {
            let (status, code) = error_code(&e);
            report.solve = Some(sol);
            report.error = Some(format!("oracle: {e}"));
            return report.finish(status, code);
        }
    };
    let metrics = compare(&sol, &o.x, &p, &CompareThresholds::default());
    report.oracle = Some(OracleSummary {
        objective: o.objective,
        iterations: o.iterations,
    });
    report.solve = Some(sol);
    match metrics {
        Ok(m) => {
            let agree = m.agree;
            report.compare = Some(m);
            if agree {
                report.finish("agree", EXIT_OK)
            } else {
                report.finish("disagree", EXIT_DISAGREE)
            }
        }
        Err(e) => {
            report.error = Some(e.to_string());
            report.finish("invalid_input", EXIT_INPUT)
        }
    }
}

