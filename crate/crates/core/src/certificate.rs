//! Optimality certificates for a candidate density `xbar`.
//!
//! Two routes are checked:
//!
//! - **Multipliers.** If `phi'(xbar(t)) = sum_k alpha_k psi_k(t)` at every node
//!   for some `alpha` and `xbar` is feasible, `xbar` is optimal. When no
//!   `alpha` is supplied the best one is found by weighted least squares; on
//!   a grid with positive weights a vanishing pairing against every grid
//!   function is the same as a vanishing defect at every node.
//! - **Directions.** `xbar` is optimal iff the directional derivative
//!   `integral phi'(xbar) u dmu` is nonnegative for every `u` in the feasible
//!   cone: the kernel of the moment operator intersected with the directions
//!   that keep `xbar + eps u` in `dom phi`. Sampled directions can always
//!   refute; they certify only when they span the whole kernel and `xbar` is
//!   interior.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dual::Multipliers;
use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::ext_real::{ext_mul, ExtReal};
use crate::measure::{entropy_value, integrate, DiscretizedMeasure, GridFunction};
use crate::problem::{feasibility_residual, max_norm, MomentProblem, FEASIBILITY_TOL};

/// `integral phi'(xbar(t)) (x(t) - xbar(t)) dmu(t)` under extended-real
/// arithmetic. Nodes where `x = xbar` contribute `0` even if `phi'(xbar)` is
/// infinite there.
pub fn directional_derivative(
    xbar: &[f64],
    x: &[f64],
    f: EntropyFunction,
    m: &DiscretizedMeasure,
) -> Result<ExtReal> {
    m.check_len(x.len())?;
    let base = entropy_value(f, xbar, m)?;
    if !base.is_finite() {
        return Err(Error::Domain(format!(
            "entropy of the base point is {base}, the directional derivative needs it finite"
        )));
    }
    if let Some(i) = x.iter().position(|&u| !f.in_domain(u)) {
        return Err(Error::Domain(format!(
            "target point leaves dom {} at node {i} (value {})",
            f.name(),
            x[i]
        )));
    }
    let integrand = xbar
        .iter()
        .zip(x)
        .map(|(&a, &b)| Ok(ext_mul(f.prime(a)?, ExtReal::Finite(b - a))))
        .collect::<Result<Vec<_>>>()?;
    integrate(&integrand, m)
}

/// `sup_i |phi'(xbar_i) - sum_k alpha_k psi_k(t_i)|`.
pub fn lmm_residual(xbar: &[f64], alpha: &Multipliers, p: &MomentProblem) -> Result<f64> {
    p.measure().check_len(xbar.len())?;
    let slopes = finite_slopes(xbar, p.entropy())?;
    let s = p.combine(alpha.as_slice());
    Ok(slopes
        .iter()
        .zip(&s)
        .fold(0.0, |acc, (a, b)| acc.max((a - b).abs())))
}

fn finite_slopes(xbar: &[f64], f: EntropyFunction) -> Result<Vec<f64>> {
    xbar.iter()
        .enumerate()
        .map(|(i, &u)| {
            f.prime(u)?.finite().ok_or_else(|| {
                Error::Domain(format!(
                    "phi' is infinite at node {i} (value {u} on the boundary of dom {})",
                    f.name()
                ))
            })
        })
        .collect()
}

/// Multipliers minimizing the weighted L2 norm of `phi'(xbar) - sum alpha_k psi_k`.
pub fn best_multipliers(xbar: &[f64], p: &MomentProblem) -> Result<Multipliers> {
    p.measure().check_len(xbar.len())?;
    let slopes = finite_slopes(xbar, p.entropy())?;
    Ok(Multipliers(p.least_squares_fit(&slopes)?))
}

/// An element of the kernel of the moment operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Direction {
    pub u: GridFunction,
}

/// Orthonormal (Euclidean) basis of the row space of the moment matrix
/// `M_ki = w_i psi_k(t_i)`, by twice-iterated modified Gram-Schmidt.
fn row_space_basis(p: &MomentProblem) -> Vec<Vec<f64>> {
    let w = p.measure().weights();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(p.m());
    for k in 0..p.m() {
        let mut v: Vec<f64> = p.psi(k).iter().zip(w).map(|(a, b)| a * b).collect();
        let scale = norm(&v);
        for _ in 0..2 {
            for e in &q {
                let c = dot(e, &v);
                axpy(-c, e, &mut v);
            }
        }
        let n = norm(&v);
        if n > 1e-13 * scale {
            v.iter_mut().for_each(|x| *x /= n);
            q.push(v);
        }
    }
    q
}

fn project_out(q: &[Vec<f64>], v: &mut [f64]) {
    for _ in 0..2 {
        for e in q {
            let c = dot(e, v);
            axpy(-c, e, v);
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(c: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += c * xi;
    }
}

/// Unit-norm directions `u` with `Psi(u) = 0`.
///
/// When `count >= N - m` the first `N - m` directions are an orthonormal basis
/// of the kernel (so the set spans it); otherwise every direction is a
/// seeded random combination within the kernel.
pub fn sample_feasible_directions(p: &MomentProblem, count: usize, seed: u64) -> Vec<Direction> {
    let n = p.n();
    let q = row_space_basis(p);
    let null_dim = n.saturating_sub(q.len());
    let mut out = Vec::with_capacity(count);
    if null_dim == 0 {
        return out;
    }

    let mut kernel: Vec<Vec<f64>> = Vec::new();
    if count >= null_dim {
        let mut span = q.clone();
        for j in 0..n {
            if kernel.len() == null_dim {
                break;
            }
            let mut v = vec![0.0; n];
            v[j] = 1.0;
            project_out(&span, &mut v);
            let nv = norm(&v);
            if nv > 1e-8 {
                v.iter_mut().for_each(|x| *x /= nv);
                project_out(&span, &mut v);
                let nv = norm(&v);
                v.iter_mut().for_each(|x| *x /= nv);
                span.push(v.clone());
                kernel.push(v);
            }
        }
        out.extend(kernel.iter().cloned().map(|u| Direction { u: GridFunction(u) }));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < count {
        let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        project_out(&q, &mut v);
        let nv = norm(&v);
        if nv <= 1e-8 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        out.push(Direction { u: GridFunction(v) });
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyOptions {
    pub lmm_tol: f64,
    pub dd_tol: f64,
    pub feas_tol: f64,
    pub directions: usize,
    pub seed: u64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            lmm_tol: 1e-8,
            dd_tol: 1e-8,
            feas_tol: FEASIBILITY_TOL,
            directions: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CertifiedOptimal,
    FeasibleNotCertified,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateStatus {
    pub feasible: bool,
    pub feasibility_residual: f64,
    pub entropy: ExtReal,
    pub interior: bool,
    pub lmm_residual: Option<f64>,
    pub multipliers: Option<Multipliers>,
    pub directions_checked: usize,
    pub spans_kernel: bool,
    pub min_directional_derivative: ExtReal,
    pub verdict: Verdict,
}

/// Runs both certificate routes on `xbar`.
pub fn certify(
    xbar: &[f64],
    p: &MomentProblem,
    alpha: Option<&Multipliers>,
    opts: &CertifyOptions,
) -> Result<CertificateStatus> {
    let f = p.entropy();
    let residual = max_norm(&feasibility_residual(xbar, p)?);
    let interiority = check_interiority(xbar, f);
    let mut status = CertificateStatus {
        feasible: residual <= opts.feas_tol,
        feasibility_residual: residual,
        entropy: entropy_value(f, xbar, p.measure())?,
        interior: interiority.interior,
        lmm_residual: None,
        multipliers: None,
        directions_checked: 0,
        spans_kernel: false,
        min_directional_derivative: ExtReal::PosInf,
        verdict: Verdict::Infeasible,
    };
    if !status.feasible {
        return Ok(status);
    }
    // a point outside dom of the functional cannot be optimal
    if !status.entropy.is_finite() {
        status.verdict = Verdict::FeasibleNotCertified;
        return Ok(status);
    }
    // feasible set inside dom phi is {0}: nothing to compare against
    if p.origin_forced() {
        status.verdict = Verdict::CertifiedOptimal;
        status.spans_kernel = true;
        return Ok(status);
    }

    if interiority.interior {
        let a = match alpha {
            Some(a) => a.clone(),
            None => best_multipliers(xbar, p)?,
        };
        status.lmm_residual = Some(lmm_residual(xbar, &a, p)?);
        status.multipliers = Some(a);
    }

    let slopes = xbar
        .iter()
        .map(|&u| f.prime(u))
        .collect::<Result<Vec<_>>>()?;
    let ends = f.ends();
    let dirs = sample_feasible_directions(p, opts.directions, opts.seed);
    let null_dim = p.n().saturating_sub(p.m());
    status.spans_kernel = dirs.len() >= null_dim;
    let mut min_dd = ExtReal::PosInf;
    for d in &dirs {
        for sign in [1.0, -1.0] {
            let admissible = xbar.iter().zip(d.u.iter()).all(|(&x, &u)| {
                let v = sign * u;
                let at_lo = ExtReal::Finite(x) <= ends.lo;
                let at_hi = ExtReal::Finite(x) >= ends.hi;
                !(at_lo && v < 0.0) && !(at_hi && v > 0.0)
            });
            if !admissible {
                continue;
            }
            let integrand: Vec<ExtReal> = slopes
                .iter()
                .zip(d.u.iter())
                .map(|(&s, &u)| ext_mul(s, ExtReal::Finite(sign * u)))
                .collect();
            let dd = integrate(&integrand, p.measure())?;
            if dd < min_dd {
                min_dd = dd;
            }
        }
    }
    status.directions_checked = dirs.len();
    status.min_directional_derivative = min_dd;

    let by_multipliers = status.lmm_residual.is_some_and(|r| r <= opts.lmm_tol);
    let by_directions = interiority.interior
        && status.spans_kernel
        && min_dd >= ExtReal::Finite(-opts.dd_tol);
    status.verdict = if by_multipliers || by_directions {
        Verdict::CertifiedOptimal
    } else {
        Verdict::FeasibleNotCertified
    };
    Ok(status)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interiority {
    pub interior: bool,
    /// Nodes on the boundary of, or outside, `dom phi`.
    pub offending: Vec<usize>,
}

/// Whether every node value lies strictly inside `dom phi`.
pub fn check_interiority(xbar: &[f64], f: EntropyFunction) -> Interiority {
    let offending: Vec<usize> = xbar
        .iter()
        .enumerate()
        .filter(|(_, &u)| !f.in_interior(u))
        .map(|(i, _)| i)
        .collect();
    Interiority {
        interior: offending.is_empty(),
        offending,
    }
}
