//! Lagrange multipliers by damped Newton iteration on the moment equations.
//!
//! For multipliers `alpha` the candidate density is the link image
//! `x(t) = (phi*)'(sum_k alpha_k psi_k(t))`, which satisfies
//! `phi'(x(t)) = sum_k alpha_k psi_k(t)` at every node by construction. The
//! solver adjusts `alpha` until the moments `G(alpha)` of that density hit the
//! targets `b`. The Jacobian of `G` is the Gram matrix of the basis in the
//! inner product weighted by `(phi*)''`, hence symmetric positive definite.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::certificate;
use crate::error::{Error, Result};
use crate::measure::{entropy_value, GridFunction};
use crate::problem::{
    classify_gaussian_feasibility, gaussian_solution, max_norm, moments, FeasibilityClass,
    MomentProblem,
};

/// Maximum number of step halvings per Newton iteration.
pub const MAX_HALVINGS: usize = 60;

const ARMIJO_C: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Multipliers(pub Vec<f64>);

impl Multipliers {
    pub fn zeros(m: usize) -> Self {
        Multipliers(vec![0.0; m])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InitStrategy {
    #[default]
    #[serde(rename = "zeros")]
    Zeros,
    #[serde(rename = "lsq")]
    LeastSquaresLogDensity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub tol_moments: f64,
    pub max_iter: usize,
    pub init: InitStrategy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_moments: 1e-10,
            max_iter: 100,
            init: InitStrategy::Zeros,
        }
    }
}

impl SolverOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol_moments > 0.0) || self.max_iter < 1 {
            return Err(Error::InvalidProblem(format!(
                "solver options need tol > 0 and max_iter >= 1 (got {} and {})",
                self.tol_moments, self.max_iter
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub x_values: GridFunction,
    pub alpha: Multipliers,
    pub entropy: f64,
    pub moment_residual: Vec<f64>,
    /// Sup-norm defect of `phi'(x) = sum alpha_k psi_k`; absent when the
    /// solution touches the boundary of `dom phi` (the zero solution).
    pub lmm_residual: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm of the moment residual before each iteration and at exit.
    pub residual_history: Vec<f64>,
}

/// `x_i = (phi*)'(sum_k alpha_k psi_k(t_i))`.
pub fn link_density(alpha: &Multipliers, p: &MomentProblem) -> Result<GridFunction> {
    let s = p.combine(alpha.as_slice());
    link_of(&s, p)
}

fn link_of(s: &[f64], p: &MomentProblem) -> Result<GridFunction> {
    let f = p.entropy();
    s.iter()
        .enumerate()
        .map(|(node, &v)| {
            if f.in_conj_interior(v) {
                f.conj_prime(v)
            } else {
                Err(Error::LinkDomain { node, value: v })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(GridFunction)
}

/// `G(alpha)`: moments of the link density.
pub fn moment_map(alpha: &Multipliers, p: &MomentProblem) -> Result<Vec<f64>> {
    moments(&link_density(alpha, p)?, p)
}

/// `J_kl = integral (phi*)''(sum alpha psi) psi_k psi_l dmu`.
pub fn jacobian(alpha: &Multipliers, p: &MomentProblem) -> Result<DMatrix<f64>> {
    let s = p.combine(alpha.as_slice());
    let d = link_weights(&s, p)?;
    Ok(p.weighted_gram(|i| d[i]))
}

fn link_weights(s: &[f64], p: &MomentProblem) -> Result<Vec<f64>> {
    let f = p.entropy();
    s.iter()
        .enumerate()
        .map(|(node, &v)| {
            if f.in_conj_interior(v) {
                f.conj_prime_deriv(v)
            } else {
                Err(Error::LinkDomain { node, value: v })
            }
        })
        .collect()
}

/// Starting multipliers.
///
/// `Zeros` falls back to a shifted start (a least-squares fit of the constant
/// `phi'(u0)` for an interior `u0`) when `0` is not interior to `dom phi*`.
/// `LeastSquaresLogDensity` fits `phi'` of a positive heuristic density: the
/// moment-matched Gaussian when the basis holds `1, t, t^2` with feasible
/// targets, otherwise a constant matching the mass constraint.
pub fn init_multipliers(p: &MomentProblem, strategy: InitStrategy) -> Result<Multipliers> {
    match strategy {
        InitStrategy::Zeros => {
            let zero = Multipliers::zeros(p.m());
            if interior(&zero, p) {
                Ok(zero)
            } else {
                shifted_start(p)
            }
        }
        InitStrategy::LeastSquaresLogDensity => {
            let h = heuristic_density(p);
            let f = p.entropy();
            let y = h
                .iter()
                .map(|&u| {
                    f.prime(u)?.finite().ok_or_else(|| {
                        Error::InitFailure(format!("heuristic density value {u} at the boundary"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let alpha = Multipliers(p.least_squares_fit(&y)?);
            if interior(&alpha, p) {
                Ok(alpha)
            } else {
                shifted_start(p)
            }
        }
    }
}

fn interior(alpha: &Multipliers, p: &MomentProblem) -> bool {
    let f = p.entropy();
    p.combine(alpha.as_slice())
        .iter()
        .all(|&s| f.in_conj_interior(s))
}

fn shifted_start(p: &MomentProblem) -> Result<Multipliers> {
    let f = p.entropy();
    let u0 = f.interior_point();
    let s0 = f.prime(u0)?.finite().unwrap_or(0.0);
    let alpha = Multipliers(p.least_squares_fit(&vec![s0; p.n()])?);
    if interior(&alpha, p) {
        Ok(alpha)
    } else {
        Err(Error::InitFailure(format!(
            "the basis cannot represent a constant inside dom {}*",
            f.name()
        )))
    }
}

fn heuristic_density(p: &MomentProblem) -> Vec<f64> {
    let f = p.entropy();
    let b = p.targets();
    let clamp = |u: f64| {
        let e = f.ends();
        let lo = e.lo.finite().map(|a| a + f64::MIN_POSITIVE);
        let hi = e.hi.finite().map(|c| c - f64::EPSILON * c.abs().max(1.0));
        let mut v = u;
        if let Some(lo) = lo {
            v = v.max(lo);
        }
        if let Some(hi) = hi {
            v = v.min(hi);
        }
        v
    };
    if let Some([i0, i1, i2]) = p.gaussian_moment_indices() {
        if let Ok((g, _)) = gaussian_solution([b[i0], b[i1], b[i2]]) {
            return p.measure().nodes().iter().map(|&t| clamp(g.density(t))).collect();
        }
    }
    let constant = p
        .basis()
        .iter()
        .position(|bf| matches!(bf, crate::problem::BasisFunction::Monomial { degree: 0 }))
        .map(|k| b[k] / p.measure().total_mass())
        .filter(|&c| f.in_interior(c))
        .unwrap_or_else(|| f.interior_point());
    vec![clamp(constant); p.n()]
}

/// One evaluated iterate.
struct Iterate {
    alpha: Vec<f64>,
    s: Vec<f64>,
    x: GridFunction,
    residual: Vec<f64>,
    merit: f64,
}

fn evaluate(alpha: Vec<f64>, p: &MomentProblem) -> Option<Iterate> {
    let s = p.combine(&alpha);
    let x = link_of(&s, p).ok()?;
    // saturated links mark a diverged iterate
    if x.iter().any(|v| v.abs() == f64::MAX) {
        return None;
    }
    let residual: Vec<f64> = moments(&x, p)
        .ok()?
        .into_iter()
        .zip(p.targets())
        .map(|(g, b)| g - b)
        .collect();
    let merit = 0.5 * residual.iter().map(|r| r * r).sum::<f64>();
    if !merit.is_finite() {
        return None;
    }
    Some(Iterate {
        alpha,
        s,
        x,
        residual,
        merit,
    })
}

fn spd_solve(j: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = j.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    let m = j.nrows();
    let mut shift = 1e-14 * j.trace() / m as f64;
    for _ in 0..8 {
        let shifted = &j + DMatrix::identity(m, m) * shift;
        if let Some(ch) = shifted.cholesky() {
            return Some(ch.solve(rhs));
        }
        shift *= 100.0;
    }
    None
}

/// Solves the moment equations `G(alpha) = b` by damped Newton iteration.
pub fn solve(p: &MomentProblem, opts: &SolverOptions) -> Result<SolveReport> {
    opts.validate()?;
    if p.is_gaussian_case() {
        let b = p.targets();
        let v = classify_gaussian_feasibility([b[0], b[1], b[2]]);
        match v.class {
            FeasibilityClass::FeasibleInterior => {}
            FeasibilityClass::Origin => return Ok(origin_report(p)),
            class => {
                return Err(Error::InfeasibleTargets(format!(
                    "{b:?} classified {class:?}: {}",
                    v.note.unwrap_or_default()
                )))
            }
        }
    }
    if p.origin_forced() {
        return Ok(origin_report(p));
    }

    let alpha0 = init_multipliers(p, opts.init)?;
    let mut cur = evaluate(alpha0.0, p).ok_or_else(|| {
        Error::InitFailure("starting multipliers give a diverged link density".into())
    })?;
    let mut history = Vec::new();
    let mut iterations = 0;

    let fail = |cur: &Iterate, history: Vec<f64>, iterations, reason: String| {
        let best = finish(p, cur, history, iterations, false).ok().map(Box::new);
        Error::NotConverged { reason, best }
    };

    loop {
        let res_norm = max_norm(&cur.residual);
        history.push(res_norm);
        if res_norm <= opts.tol_moments {
            return finish(p, &cur, history, iterations, true);
        }
        if iterations >= opts.max_iter {
            let reason = format!(
                "{} iterations exhausted, residual {res_norm:e}, |alpha| {:e}",
                opts.max_iter,
                max_norm(&cur.alpha)
            );
            return Err(fail(&cur, history, iterations, reason));
        }
        iterations += 1;

        let d = link_weights(&cur.s, p)?;
        let j = p.weighted_gram(|i| d[i]);
        let rhs = -DVector::from_column_slice(&cur.residual);
        let Some(step) = spd_solve(j, &rhs) else {
            return Err(fail(&cur, history, iterations, "singular Jacobian".into()));
        };

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let trial: Vec<f64> = cur.alpha.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Some(next) = evaluate(trial, p) {
                if next.merit <= (1.0 - 2.0 * ARMIJO_C * t) * cur.merit {
                    accepted = Some(next);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => cur = next,
            None => {
                let reason = format!(
                    "step collapse after {MAX_HALVINGS} halvings, residual {res_norm:e}"
                );
                return Err(fail(&cur, history, iterations, reason));
            }
        }
    }
}

fn finish(
    p: &MomentProblem,
    it: &Iterate,
    history: Vec<f64>,
    iterations: usize,
    converged: bool,
) -> Result<SolveReport> {
    let alpha = Multipliers(it.alpha.clone());
    let entropy = entropy_value(p.entropy(), &it.x, p.measure())?.to_f64();
    let lmm = certificate::lmm_residual(&it.x, &alpha, p).ok();
    Ok(SolveReport {
        x_values: it.x.clone(),
        alpha,
        entropy,
        moment_residual: it.residual.clone(),
        lmm_residual: lmm,
        iterations,
        converged,
        residual_history: history,
    })
}

fn origin_report(p: &MomentProblem) -> SolveReport {
    let x = GridFunction::zeros(p.n());
    SolveReport {
        entropy: 0.0,
        moment_residual: vec![0.0; p.m()],
        x_values: x,
        alpha: Multipliers::zeros(p.m()),
        lmm_residual: None,
        iterations: 0,
        converged: true,
        residual_history: vec![0.0],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::EntropyFunction;
    use crate::measure::{build_counting_grid, build_interval_grid, build_real_line_grid, QuadratureRule};
    use crate::problem::{default_radius, monomial_basis, BasisFunction};
    use approx::assert_relative_eq;
    use std::f64::consts::{E, PI};

    fn gaussian_moments(b: [f64; 3]) -> MomentProblem {
        let r = default_radius(&monomial_basis(3), &b);
        MomentProblem::new(
            EntropyFunction::BoltzmannShannon,
            build_real_line_grid(r, 400).unwrap(),
            monomial_basis(3),
            b.to_vec(),
        )
        .unwrap()
    }

    fn normal_alpha() -> Multipliers {
        Multipliers(vec![1.0 - (2.0 * PI).sqrt().ln(), 0.0, -0.5])
    }

    fn quad_unit(b: f64) -> MomentProblem {
        MomentProblem::new(
            EntropyFunction::Quadratic,
            build_interval_grid(0.0, 1.0, 11, QuadratureRule::Trapezoid).unwrap(),
            monomial_basis(1),
            vec![b],
        )
        .unwrap()
    }

    #[test]
    fn link_density_examples() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let x = link_density(&normal_alpha(), &p).unwrap();
        for (&t, &v) in p.measure().nodes().iter().zip(x.iter()) {
            let e = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
            assert_relative_eq!(v, e, max_relative = 1e-12);
        }

        let q = MomentProblem::new(
            EntropyFunction::Quadratic,
            build_counting_grid(5).unwrap(),
            monomial_basis(2),
            vec![0.0, 0.0],
        )
        .unwrap();
        let a = Multipliers(vec![0.3, -1.1]);
        let x = link_density(&a, &q).unwrap();
        for (&t, &v) in q.measure().nodes().iter().zip(x.iter()) {
            assert_relative_eq!(v, 0.3 - 1.1 * t, epsilon = 1e-15);
        }

        let c = MomentProblem::new(
            EntropyFunction::BoltzmannShannonMinusU,
            build_counting_grid(4).unwrap(),
            monomial_basis(1),
            vec![1.0],
        )
        .unwrap();
        assert_eq!(link_density(&Multipliers::zeros(1), &c).unwrap().0, vec![1.0; 4]);
    }

    #[test]
    fn link_density_reports_offending_node() {
        let p = MomentProblem::new(
            EntropyFunction::Burg,
            build_counting_grid(3).unwrap(),
            monomial_basis(2),
            vec![1.0, 1.0],
        )
        .unwrap();
        // s = -2.5 + t: nonnegative from node index 2 (t = 3)
        let err = link_density(&Multipliers(vec![-2.5, 1.0]), &p).unwrap_err();
        assert!(matches!(err, Error::LinkDomain { node: 2, .. }), "{err:?}");
    }

    #[test]
    fn moment_map_examples() {
        let q = quad_unit(1.0);
        assert_relative_eq!(moment_map(&Multipliers(vec![0.7]), &q).unwrap()[0], 0.7, epsilon = 1e-15);

        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let g = moment_map(&normal_alpha(), &p).unwrap();
        for (a, e) in g.iter().zip([1.0, 0.0, 1.0]) {
            assert!((a - e).abs() <= 1e-6);
        }

        let c = MomentProblem::new(
            EntropyFunction::BoltzmannShannonMinusU,
            build_counting_grid(2).unwrap(),
            monomial_basis(1),
            vec![1.0],
        )
        .unwrap();
        assert_eq!(moment_map(&Multipliers::zeros(1), &c).unwrap(), vec![2.0]);
    }

    #[test]
    fn jacobian_examples() {
        let p = MomentProblem::new(
            EntropyFunction::Quadratic,
            build_interval_grid(-1.0, 2.0, 24, QuadratureRule::GaussLegendreComposite).unwrap(),
            monomial_basis(3),
            vec![0.0; 3],
        )
        .unwrap();
        let j = jacobian(&Multipliers(vec![0.4, -2.0, 3.0]), &p).unwrap();
        assert_eq!(j, p.gram());

        let c = MomentProblem::new(
            EntropyFunction::BoltzmannShannonMinusU,
            build_counting_grid(3).unwrap(),
            monomial_basis(1),
            vec![1.0],
        )
        .unwrap();
        assert_eq!(jacobian(&Multipliers::zeros(1), &c).unwrap()[(0, 0)], 3.0);

        let p = gaussian_moments([1.0, 0.3, 2.0]);
        let j = jacobian(&Multipliers(vec![-0.2, 0.31, -0.45]), &p).unwrap();
        assert_eq!(j, j.transpose());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = gaussian_moments([1.0, 0.3, 2.0]);
        let a = Multipliers(vec![-0.2, 0.31, -0.45]);
        let j = jacobian(&a, &p).unwrap();
        for l in 0..3 {
            let h = 1e-6;
            let mut ap = a.clone();
            ap.0[l] += h;
            let mut am = a.clone();
            am.0[l] -= h;
            let gp = moment_map(&ap, &p).unwrap();
            let gm = moment_map(&am, &p).unwrap();
            for k in 0..3 {
                let fd = (gp[k] - gm[k]) / (2.0 * h);
                assert_relative_eq!(j[(k, l)], fd, max_relative = 1e-6, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn init_examples() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        assert_eq!(init_multipliers(&p, InitStrategy::Zeros).unwrap(), Multipliers::zeros(3));
        let a = init_multipliers(&p, InitStrategy::LeastSquaresLogDensity).unwrap();
        for (x, e) in a.0.iter().zip(normal_alpha().0) {
            assert!((x - e).abs() <= 1e-9, "{a:?}");
        }

        let burg = MomentProblem::new(
            EntropyFunction::Burg,
            build_interval_grid(0.0, 1.0, 16, QuadratureRule::GaussLegendreComposite).unwrap(),
            monomial_basis(2),
            vec![1.0, 0.6],
        )
        .unwrap();
        let a = init_multipliers(&burg, InitStrategy::Zeros).unwrap();
        assert!(a.0[0] < 0.0);
        assert!(interior(&a, &burg));

        let hopeless = MomentProblem::new(
            EntropyFunction::Burg,
            build_interval_grid(-1.0, 1.0, 16, QuadratureRule::GaussLegendreComposite).unwrap(),
            vec![BasisFunction::monomial(1)],
            vec![0.0],
        )
        .unwrap();
        assert!(matches!(
            init_multipliers(&hopeless, InitStrategy::Zeros),
            Err(Error::InitFailure(_))
        ));
    }

    #[test]
    fn solve_standard_normal() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let r = solve(&p, &SolverOptions::default()).unwrap();
        assert!(r.converged);
        let expected = -(2.0 * PI * E).sqrt().ln();
        assert!((r.entropy - expected).abs() <= 1e-6);
        for (&t, &v) in p.measure().nodes().iter().zip(r.x_values.iter()) {
            let e = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
            assert!((v - e).abs() <= 1e-6);
        }
        assert!(r.lmm_residual.unwrap() <= 1e-12);
        assert!(max_norm(&r.moment_residual) <= 1e-10);
    }

    #[test]
    fn solve_origin_and_infeasible() {
        let r = solve(&gaussian_moments([0.0, 0.0, 0.0]), &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!(r.x_values.iter().all(|&v| v == 0.0));
        assert_eq!(r.entropy, 0.0);

        let bad = MomentProblem::new(
            EntropyFunction::BoltzmannShannon,
            build_real_line_grid(10.0, 400).unwrap(),
            monomial_basis(3),
            vec![1.0, 2.0, 1.0],
        )
        .unwrap();
        assert!(matches!(
            solve(&bad, &SolverOptions::default()),
            Err(Error::InfeasibleTargets(_))
        ));
    }

    #[test]
    fn solve_quadratic_constant() {
        let r = solve(&quad_unit(1.0), &SolverOptions::default()).unwrap();
        assert!(r.x_values.iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert_relative_eq!(r.entropy, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn armijo_merit_decreases() {
        let p = gaussian_moments([1.0, 0.5, 2.0]);
        let r = solve(&p, &SolverOptions::default()).unwrap();
        for w in r.residual_history.windows(2) {
            assert!(w[1] < w[0], "{:?}", r.residual_history);
        }
    }

    #[test]
    fn not_converged_carries_best_iterate() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let opts = SolverOptions { max_iter: 1, ..Default::default() };
        match solve(&p, &opts) {
            Err(Error::NotConverged { best: Some(best), .. }) => {
                assert!(!best.converged);
                assert_eq!(best.iterations, 1);
            }
            other => panic!("expected NotConverged, got {other:?}"),
        }
        let opts = SolverOptions { tol_moments: 0.0, ..Default::default() };
        assert!(solve(&p, &opts).is_err());
    }

    #[test]
    fn scaling_targets_scales_solution() {
        let base = [1.0, 0.4, 1.5];
        let lam = 3.0;
        let r1 = solve(&gaussian_moments(base), &SolverOptions::default()).unwrap();
        let r2 = solve(&gaussian_moments(base.map(|b| lam * b)), &SolverOptions::default()).unwrap();
        for (a, b) in r1.x_values.iter().zip(r2.x_values.iter()) {
            assert!((lam * a - b).abs() <= 1e-8);
        }
        assert!((r2.alpha.0[0] - r1.alpha.0[0] - lam.ln()).abs() <= 1e-8);
        assert!((r2.alpha.0[1] - r1.alpha.0[1]).abs() <= 1e-8);
        assert!((r2.alpha.0[2] - r1.alpha.0[2]).abs() <= 1e-8);
    }

    #[test]
    fn burg_and_fermi_dirac_converge() {
        let m = build_interval_grid(0.0, 1.0, 32, QuadratureRule::GaussLegendreComposite).unwrap();
        for (f, b) in [
            (EntropyFunction::Burg, vec![1.0, 0.6]),
            (EntropyFunction::FermiDirac, vec![0.4, 0.25]),
        ] {
            let p = MomentProblem::new(f, m.clone(), monomial_basis(2), b).unwrap();
            for init in [InitStrategy::Zeros, InitStrategy::LeastSquaresLogDensity] {
                let r = solve(&p, &SolverOptions { init, ..Default::default() }).unwrap();
                assert!(r.converged, "{f}");
                assert!(r.x_values.iter().all(|&u| f.in_interior(u)));
                assert!(r.lmm_residual.unwrap() <= 1e-12, "{f}: {:?}", r.lmm_residual);
            }
        }
    }
}
