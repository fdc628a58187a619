//! Brute-force primal solver used to cross-check the multiplier solver.
//!
//! Minimizes `sum_i w_i phi(x_i)` directly over the affine set
//! `{x | Psi(x) = b}` by projected gradient descent in the diagonal metric
//! `diag(phi''(x))`, keeping iterates strictly inside `dom phi` with a
//! fraction-to-boundary rule. It never forms multipliers, never evaluates the
//! conjugate, and does its own linear algebra (weighted Gram-Schmidt), so it
//! shares no code path with [`crate::dual`].

use serde::{Deserialize, Serialize};

use crate::dual::SolveReport;
use crate::error::{Error, Result};
use crate::measure::{entropy_value, GridFunction};
use crate::problem::{feasibility_residual, max_norm, BasisFunction, MomentProblem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleOptions {
    /// Initial step length of each line search.
    pub step: f64,
    pub max_iter: usize,
    /// Stationarity tolerance: stop once the predicted decrease
    /// `|projected gradient|^2 / 2` falls below `tol^2`.
    pub tol: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            step: 1.0,
            max_iter: 200_000,
            tol: 1e-9,
        }
    }
}

const ARMIJO_C: f64 = 1e-4;
const TO_BOUNDARY: f64 = 0.99;
const PHASE_ONE_ITERS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub x: GridFunction,
    pub objective: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting from the feasible start.
    pub objective_history: Vec<f64>,
    /// Max-norm moment residual of each accepted iterate.
    pub feasibility_history: Vec<f64>,
}

/// Orthonormalizes the basis in `<a, b> = sum_i w_i rho_i a_i b_i`.
/// Returns `q` and upper-triangular `r` with `psi_k = sum_j r[j][k] q_j`.
fn weighted_qr(p: &MomentProblem, rho: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let w = p.measure().weights();
    let ip = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .zip(w.iter().zip(rho))
            .map(|((x, y), (wi, ri))| wi * ri * x * y)
            .sum()
    };
    let m = p.m();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(m);
    let mut r = vec![vec![0.0; m]; m];
    for k in 0..m {
        let mut v = p.psi(k).to_vec();
        let scale = ip(&v, &v).sqrt();
        for _ in 0..2 {
            for (j, e) in q.iter().enumerate() {
                let c = ip(e, &v);
                r[j][k] += c;
                v.iter_mut().zip(e).for_each(|(vi, ei)| *vi -= c * ei);
            }
        }
        let n = ip(&v, &v).sqrt();
        if !(n > 1e-12 * scale) {
            return Err(Error::RankDeficientBasis { ratio: n / scale });
        }
        r[k][k] = n;
        v.iter_mut().for_each(|x| *x /= n);
        q.push(v);
    }
    Ok((q, r))
}

/// Solves `r^T g = rhs` for upper-triangular `r`.
fn forward_substitute(r: &[Vec<f64>], rhs: &[f64]) -> Vec<f64> {
    let m = rhs.len();
    let mut g = vec![0.0; m];
    for k in 0..m {
        let s: f64 = (0..k).map(|j| r[j][k] * g[j]).sum();
        g[k] = (rhs[k] - s) / r[k][k];
    }
    g
}

/// Orthogonal projection (in `L2(mu)`) of `x` onto `{y | Psi(y) = b}`.
pub fn affine_project(x: &[f64], p: &MomentProblem) -> Result<GridFunction> {
    p.measure().check_len(x.len())?;
    let ones = vec![1.0; p.n()];
    let (q, r) = weighted_qr(p, &ones)?;
    let beta = forward_substitute(&r, p.targets());
    let w = p.measure().weights();
    let mut y = x.to_vec();
    for (qj, bj) in q.iter().zip(beta) {
        let c: f64 = qj.iter().zip(x).zip(w).map(|((a, b), wi)| wi * a * b).sum();
        y.iter_mut().zip(qj).for_each(|(yi, qi)| *yi += (bj - c) * qi);
    }
    Ok(GridFunction(y))
}

fn objective(p: &MomentProblem, x: &[f64]) -> f64 {
    entropy_value(p.entropy(), x, p.measure())
        .map(|v| v.to_f64())
        .unwrap_or(f64::INFINITY)
}

/// Largest `t` keeping `x + t d` inside `dom phi`, shrunk by [`TO_BOUNDARY`].
fn boundary_step(p: &MomentProblem, x: &[f64], d: &[f64]) -> f64 {
    let ends = p.entropy().ends();
    let mut t = f64::INFINITY;
    for (&xi, &di) in x.iter().zip(d) {
        if di < 0.0 {
            if let Some(lo) = ends.lo.finite() {
                t = t.min((xi - lo) / -di);
            }
        } else if di > 0.0 {
            if let Some(hi) = ends.hi.finite() {
                t = t.min((hi - xi) / di);
            }
        }
    }
    TO_BOUNDARY * t
}

fn inverse_curvature(p: &MomentProblem, x: &[f64]) -> Result<Vec<f64>> {
    let f = p.entropy();
    x.iter().map(|&u| f.second(u).map(|h| 1.0 / h)).collect()
}

fn starting_density(p: &MomentProblem) -> Vec<f64> {
    let f = p.entropy();
    let c = p
        .basis()
        .iter()
        .position(|b| matches!(b, BasisFunction::Monomial { degree: 0 }))
        .map(|k| p.targets()[k] / p.measure().total_mass())
        .filter(|&c| f.in_interior(c))
        .unwrap_or_else(|| f.interior_point());
    vec![c; p.n()]
}

/// Drives a positive heuristic density onto the affine set by minimum-norm
/// corrections in the curvature metric, damped to stay interior.
fn interior_feasible_point(p: &MomentProblem) -> Result<Vec<f64>> {
    let scale = p.targets().iter().fold(1.0f64, |a, b| a.max(b.abs()));
    let mut x = starting_density(p);
    for _ in 0..PHASE_ONE_ITERS {
        let r: Vec<f64> = feasibility_residual(&x, p)?.iter().map(|v| -v).collect();
        if max_norm(&r) <= 1e-12 * scale {
            return Ok(x);
        }
        let dinv = inverse_curvature(p, &x)?;
        let (q, rr) = weighted_qr(p, &dinv)?;
        let gamma = forward_substitute(&rr, &r);
        let mut d = vec![0.0; p.n()];
        for (qj, gj) in q.iter().zip(&gamma) {
            d.iter_mut().zip(qj).for_each(|(di, qi)| *di += gj * qi);
        }
        d.iter_mut().zip(&dinv).for_each(|(di, s)| *di *= s);
        let t = boundary_step(p, &x, &d).min(1.0);
        if !(t > 0.0) {
            break;
        }
        x.iter_mut().zip(&d).for_each(|(xi, di)| *xi += t * di);
    }
    Err(Error::NoInteriorPoint(format!(
        "moment residual still {:e} after {PHASE_ONE_ITERS} corrections",
        max_norm(&feasibility_residual(&x, p)?)
    )))
}

/// Minimizes the discretized entropy over the feasible set.
pub fn primal_solve(p: &MomentProblem, opts: &OracleOptions) -> Result<OracleSolution> {
    if !(opts.step > 0.0 && opts.tol > 0.0 && opts.max_iter >= 1) {
        return Err(Error::InvalidProblem("oracle options must be positive".into()));
    }
    if p.origin_forced() {
        return Ok(OracleSolution {
            x: GridFunction::zeros(p.n()),
            objective: 0.0,
            iterations: 0,
            objective_history: vec![0.0],
            feasibility_history: vec![0.0],
        });
    }
    let f = p.entropy();
    let w = p.measure().weights().to_vec();
    let mut x = interior_feasible_point(p)?;
    let mut fx = objective(p, &x);
    let mut history = vec![fx];
    let mut feas = vec![max_norm(&feasibility_residual(&x, p)?)];

    for it in 0..opts.max_iter {
        let g = x
            .iter()
            .map(|&u| {
                f.prime(u)?
                    .finite()
                    .ok_or_else(|| Error::Domain("iterate touched the boundary".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let dinv = inverse_curvature(p, &x)?;
        let (q, _) = weighted_qr(p, &dinv)?;
        // r = g minus its projection on span(psi) in the dinv-weighted product
        let mut r = g.clone();
        for qj in &q {
            let c: f64 = qj
                .iter()
                .zip(&g)
                .zip(w.iter().zip(&dinv))
                .map(|((a, b), (wi, si))| wi * si * a * b)
                .sum();
            r.iter_mut().zip(qj).for_each(|(ri, qi)| *ri -= c * qi);
        }
        let d: Vec<f64> = r.iter().zip(&dinv).map(|(ri, s)| -s * ri).collect();
        let decrement: f64 = r
            .iter()
            .zip(w.iter().zip(&dinv))
            .map(|(ri, (wi, si))| wi * si * ri * ri)
            .sum();
        if 0.5 * decrement <= opts.tol * opts.tol {
            return Ok(done(x, fx, it, history, feas));
        }

        let mut t = opts.step.min(boundary_step(p, &x, &d));
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + t * b).collect();
            let ft = objective(p, &trial);
            if ft <= fx - ARMIJO_C * t * decrement {
                x = trial;
                fx = ft;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // rounding floor: no representable decrease left
            if decrement <= opts.tol {
                return Ok(done(x, fx, it, history, feas));
            }
            return Err(Error::NotConverged {
                reason: format!("oracle line search failed, decrement {decrement:e}"),
                best: None,
            });
        }
        let mut res = max_norm(&feasibility_residual(&x, p)?);
        if res > 1e-11 {
            let y = affine_project(&x, p)?;
            if y.iter().all(|&u| f.in_interior(u)) {
                x = y.into_inner();
                fx = objective(p, &x);
                res = max_norm(&feasibility_residual(&x, p)?);
            }
        }
        history.push(fx);
        feas.push(res);
    }
    Err(Error::NotConverged {
        reason: format!("oracle used {} iterations", opts.max_iter),
        best: None,
    })
}

fn done(
    x: Vec<f64>,
    objective: f64,
    iterations: usize,
    objective_history: Vec<f64>,
    feasibility_history: Vec<f64>,
) -> OracleSolution {
    OracleSolution {
        x: GridFunction(x),
        objective,
        iterations,
        objective_history,
        feasibility_history,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareThresholds {
    pub sup: f64,
    pub objective: f64,
}

impl Default for CompareThresholds {
    fn default() -> Self {
        CompareThresholds {
            sup: 1e-4,
            objective: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub sup_diff: f64,
    pub weighted_l1: f64,
    pub dual_objective: f64,
    pub oracle_objective: f64,
    pub objective_gap: f64,
    pub agree: bool,
}

/// Distances between the multiplier solution and an oracle solution.
pub fn compare(
    report: &SolveReport,
    oracle_x: &[f64],
    p: &MomentProblem,
    thresholds: &CompareThresholds,
) -> Result<CompareMetrics> {
    let m = p.measure();
    m.check_len(report.x_values.len())?;
    m.check_len(oracle_x.len())?;
    let diff: Vec<f64> = report
        .x_values
        .iter()
        .zip(oracle_x)
        .map(|(a, b)| (a - b).abs())
        .collect();
    let sup_diff = max_norm(&diff);
    let weighted_l1 = m.sum(&diff);
    let dual_objective = objective(p, &report.x_values);
    let oracle_objective = objective(p, oracle_x);
    let objective_gap = if dual_objective == oracle_objective {
        0.0
    } else {
        (dual_objective - oracle_objective).abs()
    };
    Ok(CompareMetrics {
        sup_diff,
        weighted_l1,
        dual_objective,
        oracle_objective,
        objective_gap,
        agree: sup_diff <= thresholds.sup && objective_gap <= thresholds.objective,
    })
}
