//! Moment-constrained entropy problems:
//!
//! minimize `integral phi(x) dmu` subject to `integral x psi_k dmu = b_k`, `k = 1..m`,
//!
//! together with the closed-form Gaussian case (Boltzmann-Shannon entropy,
//! Lebesgue measure on the line, `psi_k(t) = t^(k-1)`, `m = 3`).

use std::f64::consts::{E, PI};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::measure::{DiscretizedMeasure, GridFunction, MeasureKind};

/// Absolute max-norm tolerance on moment residuals for declaring feasibility.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// Smallest admissible ratio of extreme eigenvalues of the weighted Gram matrix.
pub const RANK_RATIO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisFunction {
    Monomial { degree: u32 },
    Tabulated { values: Vec<f64> },
}

impl BasisFunction {
    pub fn monomial(degree: u32) -> Self {
        BasisFunction::Monomial { degree }
    }

    /// Node values on `m`.
    pub fn evaluate(&self, m: &DiscretizedMeasure) -> Result<Vec<f64>> {
        match self {
            BasisFunction::Monomial { degree } => {
                Ok(m.nodes().iter().map(|t| t.powi(*degree as i32)).collect())
            }
            BasisFunction::Tabulated { values } => {
                m.check_len(values.len())?;
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidProblem(
                        "tabulated basis values must be finite".into(),
                    ));
                }
                Ok(values.clone())
            }
        }
    }
}

/// Monomials `1, t, ..., t^(m-1)`.
pub fn monomial_basis(m: usize) -> Vec<BasisFunction> {
    (0..m as u32).map(BasisFunction::monomial).collect()
}

#[derive(Debug, Clone)]
pub struct MomentProblem {
    entropy: EntropyFunction,
    measure: DiscretizedMeasure,
    basis: Vec<BasisFunction>,
    targets: Vec<f64>,
    /// `psi[k][i] = psi_k(t_i)`.
    psi: Vec<Vec<f64>>,
}

impl MomentProblem {
    pub fn new(
        entropy: EntropyFunction,
        measure: DiscretizedMeasure,
        basis: Vec<BasisFunction>,
        targets: Vec<f64>,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidProblem("need at least one basis function".into()));
        }
        if basis.len() != targets.len() {
            return Err(Error::InvalidProblem(format!(
                "{} basis functions but {} targets",
                basis.len(),
                targets.len()
            )));
        }
        if let Some(k) = targets.iter().position(|b| !b.is_finite()) {
            return Err(Error::InvalidProblem(format!("target {k} is not finite")));
        }
        let psi = basis
            .iter()
            .map(|b| b.evaluate(&measure))
            .collect::<Result<Vec<_>>>()?;
        let p = MomentProblem {
            entropy,
            measure,
            basis,
            targets,
            psi,
        };
        let ratio = p.gram_condition_ratio();
        if !(ratio >= RANK_RATIO_TOL) {
            return Err(Error::RankDeficientBasis { ratio });
        }
        Ok(p)
    }

    pub fn entropy(&self) -> EntropyFunction {
        self.entropy
    }

    pub fn measure(&self) -> &DiscretizedMeasure {
        &self.measure
    }

    pub fn basis(&self) -> &[BasisFunction] {
        &self.basis
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    /// Number of constraints.
    pub fn m(&self) -> usize {
        self.basis.len()
    }

    /// Number of nodes.
    pub fn n(&self) -> usize {
        self.measure.len()
    }

    /// Node values of `psi_k`.
    pub fn psi(&self, k: usize) -> &[f64] {
        &self.psi[k]
    }

    /// `sum_k c_k psi_k(t_i)` at every node.
    pub fn combine(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n()];
        for (c, row) in coeffs.iter().zip(&self.psi) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += c * v;
            }
        }
        out
    }

    /// Weighted Gram matrix `G_kl = integral psi_k psi_l dmu`.
    pub fn gram(&self) -> DMatrix<f64> {
        self.weighted_gram(|_| 1.0)
    }

    /// `G_kl = sum_i w_i rho_i psi_k(t_i) psi_l(t_i)`.
    pub(crate) fn weighted_gram<F: Fn(usize) -> f64>(&self, rho: F) -> DMatrix<f64> {
        let m = self.m();
        let w = self.measure.weights();
        let mut g = DMatrix::zeros(m, m);
        for i in 0..self.n() {
            let wi = w[i] * rho(i);
            for k in 0..m {
                let a = wi * self.psi[k][i];
                for l in 0..=k {
                    g[(k, l)] += a * self.psi[l][i];
                }
            }
        }
        for k in 0..m {
            for l in 0..k {
                g[(l, k)] = g[(k, l)];
            }
        }
        g
    }

    /// `lambda_min / lambda_max` of the weighted Gram matrix.
    pub fn gram_condition_ratio(&self) -> f64 {
        let eig = self.gram().symmetric_eigen();
        let max = eig.eigenvalues.max();
        let min = eig.eigenvalues.min();
        if max > 0.0 {
            min / max
        } else {
            0.0
        }
    }

    /// Weighted least-squares coefficients of `y` on the basis:
    /// solves `G c = (integral y psi_k dmu)_k`.
    pub fn least_squares_fit(&self, y: &[f64]) -> Result<Vec<f64>> {
        let rhs = DVector::from_iterator(self.m(), self.psi.iter().map(|p| dot_w(&self.measure, p, y)));
        let chol = self
            .gram()
            .cholesky()
            .ok_or(Error::RankDeficientBasis { ratio: self.gram_condition_ratio() })?;
        Ok(chol.solve(&rhs).iter().copied().collect())
    }

    /// Indices of the monomials of degree 0, 1 and 2 in the basis, if all present.
    pub fn gaussian_moment_indices(&self) -> Option<[usize; 3]> {
        let find = |d: u32| {
            self.basis
                .iter()
                .position(|b| matches!(b, BasisFunction::Monomial { degree } if *degree == d))
        };
        Some([find(0)?, find(1)?, find(2)?])
    }

    /// The closed-form configuration: Boltzmann-Shannon entropy on a
    /// truncated real line with basis exactly `1, t, t^2`.
    pub fn is_gaussian_case(&self) -> bool {
        self.entropy == EntropyFunction::BoltzmannShannon
            && self.measure.kind() == MeasureKind::RealLineTruncated
            && self.basis == monomial_basis(3)
    }

    /// True when all targets vanish and `x = 0` is the only feasible point of
    /// `dom phi`: the domain is bounded below by `0` with `phi(0)` finite and
    /// some basis function has constant strict sign on the nodes.
    pub fn origin_forced(&self) -> bool {
        let ends = self.entropy.ends();
        self.targets.iter().all(|&b| b == 0.0)
            && ends.lo.is_zero()
            && ends.value_lo.is_finite()
            && self
                .psi
                .iter()
                .any(|p| p.iter().all(|&v| v > 0.0) || p.iter().all(|&v| v < 0.0))
    }
}

pub(crate) fn dot_w(m: &DiscretizedMeasure, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(m.weights())
        .map(|((x, y), w)| w * x * y)
        .sum()
}

/// `(Psi_1(x), ..., Psi_m(x))` with `Psi_k(x) = integral x psi_k dmu`.
pub fn moments(x: &[f64], p: &MomentProblem) -> Result<Vec<f64>> {
    p.measure.check_len(x.len())?;
    Ok(p.psi.iter().map(|psi| dot_w(&p.measure, psi, x)).collect())
}

/// `moments(x) - b`.
pub fn feasibility_residual(x: &[f64], p: &MomentProblem) -> Result<Vec<f64>> {
    Ok(moments(x, p)?
        .into_iter()
        .zip(&p.targets)
        .map(|(v, b)| v - b)
        .collect())
}

pub fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, x| a.max(x.abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeasibilityClass {
    Origin,
    FeasibleInterior,
    InfeasibleBoundary,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityVerdict {
    pub class: FeasibilityClass,
    /// `b1 b3 - b2^2`.
    pub gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FeasibilityVerdict {
    pub fn is_feasible(&self) -> bool {
        matches!(
            self.class,
            FeasibilityClass::Origin | FeasibilityClass::FeasibleInterior
        )
    }
}

/// Classifies `(b1, b2, b3)` for the three Gaussian moments against the set of
/// targets reachable by a nonnegative finite-entropy density on the line.
///
/// `|b2| = sqrt(b1 b3)` (up to 4 ulps) is reported separately: equality in the
/// Cauchy-Schwarz bound `|b2| <= sqrt(b1 b3)` forces `x = 0` a.e., which
/// contradicts `b1 > 0`, so the boundary is not attained.
pub fn classify_gaussian_feasibility(b: [f64; 3]) -> FeasibilityVerdict {
    let [b1, b2, b3] = b;
    let gap = b1 * b3 - b2 * b2;
    let verdict = |class, note: Option<&str>| FeasibilityVerdict {
        class,
        gap,
        note: note.map(str::to_owned),
    };
    if b.iter().any(|v| !v.is_finite()) {
        return verdict(FeasibilityClass::Infeasible, Some("targets must be finite"));
    }
    if b1 == 0.0 && b2 == 0.0 && b3 == 0.0 {
        return verdict(
            FeasibilityClass::Origin,
            Some("only x = 0 is feasible; it is the solution"),
        );
    }
    if !(b1 > 0.0 && b3 > 0.0) {
        return verdict(
            FeasibilityClass::Infeasible,
            Some("a nonnegative density has b1 >= 0 and b3 >= 0, and b1 = 0 or b3 = 0 forces b = 0"),
        );
    }
    let bound = (b1 * b3).sqrt();
    let dist = b2.abs() - bound;
    if dist.abs() <= 4.0 * f64::EPSILON * bound {
        verdict(
            FeasibilityClass::InfeasibleBoundary,
            Some(
                "|b2| = sqrt(b1 b3): the region is sometimes written with <=, but equality in \
                 the Cauchy-Schwarz bound forces x = 0 a.e. and hence b1 = 0",
            ),
        )
    } else if dist < 0.0 {
        verdict(FeasibilityClass::FeasibleInterior, None)
    } else {
        verdict(
            FeasibilityClass::Infeasible,
            Some("|b2| > sqrt(b1 b3) violates the Cauchy-Schwarz bound"),
        )
    }
}

/// `(integral |t x| dmu, sqrt(integral |x| dmu) * sqrt(integral t^2 |x| dmu))`.
pub fn holder_bound(x: &[f64], m: &DiscretizedMeasure) -> Result<(f64, f64)> {
    m.check_len(x.len())?;
    let mut lhs = 0.0;
    let mut a = 0.0;
    let mut c = 0.0;
    for ((&t, &w), &v) in m.nodes().iter().zip(m.weights()).zip(x) {
        let av = v.abs();
        lhs += w * (t * v).abs();
        a += w * av;
        c += w * t * t * av;
    }
    Ok((lhs, a.sqrt() * c.sqrt()))
}

/// Parameters of `x(t) = exp(-alpha (t - beta)^2 / 2 + gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl GaussianParams {
    pub fn density(&self, t: f64) -> f64 {
        let d = t - self.beta;
        (-0.5 * self.alpha * d * d + self.gamma).exp()
    }

    /// Coefficients `(c0, c1, c2)` of the exponent `c0 + c1 t + c2 t^2`.
    pub fn exponent_coefficients(&self) -> [f64; 3] {
        let a = self.alpha;
        let b = self.beta;
        [self.gamma - 0.5 * a * b * b, a * b, -0.5 * a]
    }

    /// Inverse of [`GaussianParams::exponent_coefficients`]; `None` unless `c2 < 0`.
    pub fn from_exponent_coefficients(c: [f64; 3]) -> Option<Self> {
        if !(c[2] < 0.0) {
            return None;
        }
        let alpha = -2.0 * c[2];
        let beta = c[1] / alpha;
        Some(GaussianParams {
            alpha,
            beta,
            gamma: c[0] + 0.5 * alpha * beta * beta,
        })
    }
}

/// Closed-form minimizer and optimal value for the Gaussian case.
pub fn gaussian_solution(b: [f64; 3]) -> Result<(GaussianParams, f64)> {
    let v = classify_gaussian_feasibility(b);
    if v.class != FeasibilityClass::FeasibleInterior {
        return Err(Error::InfeasibleTargets(format!(
            "{b:?} is {:?}; the closed form needs b1 > 0, b3 > 0, |b2| < sqrt(b1 b3)",
            v.class
        )));
    }
    let [b1, b2, _] = b;
    let d = v.gap;
    let params = GaussianParams {
        alpha: b1 * b1 / d,
        beta: b2 / b1,
        gamma: (b1 * b1 / (2.0 * PI * d).sqrt()).ln(),
    };
    let value = b1 * (b1 * b1 / (2.0 * PI * E * d).sqrt()).ln();
    Ok((params, value))
}

/// `(1, m, sigma^2 + m^2)`: the first three moments of a probability density
/// with mean `m` and variance `sigma^2`.
pub fn mean_variance_targets(mean: f64, sigma2: f64) -> Result<[f64; 3]> {
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::BadVariance(sigma2));
    }
    Ok([1.0, mean, sigma2 + mean * mean])
}

/// Real-line truncation radius: `10 sqrt(b3 / b1)` when the problem carries
/// positive zeroth and second moments, else 10.
pub fn default_radius(basis: &[BasisFunction], targets: &[f64]) -> f64 {
    let find = |d: u32| {
        basis
            .iter()
            .position(|b| matches!(b, BasisFunction::Monomial { degree } if *degree == d))
            .and_then(|k| targets.get(k).copied())
    };
    match (find(0), find(2)) {
        (Some(b1), Some(b3)) if b1 > 0.0 && b3 > 0.0 => 10.0 * (b3 / b1).sqrt(),
        _ => 10.0,
    }
}

/// Tabulates `x(t)` on the nodes of a problem's measure.
pub fn tabulate<F: Fn(f64) -> f64>(p: &MomentProblem, f: F) -> GridFunction {
    GridFunction::from_fn(p.measure(), f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::{build_counting_grid, build_interval_grid, build_real_line_grid, QuadratureRule};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

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

    fn std_normal(t: f64) -> f64 {
        (-0.5 * t * t).exp() / (2.0 * PI).sqrt()
    }

    #[test]
    fn moments_examples() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let zero = GridFunction::zeros(p.n());
        assert_eq!(moments(&zero, &p).unwrap(), vec![0.0; 3]);
        let x = tabulate(&p, std_normal);
        let mom = moments(&x, &p).unwrap();
        for (a, e) in mom.iter().zip([1.0, 0.0, 1.0]) {
            assert!((a - e).abs() <= 1e-6);
        }
        let c = MomentProblem::new(
            EntropyFunction::BoltzmannShannon,
            build_counting_grid(3).unwrap(),
            vec![BasisFunction::monomial(0)],
            vec![3.0],
        )
        .unwrap();
        assert_eq!(moments(&[1.0, 1.0, 1.0], &c).unwrap(), vec![3.0]);
        assert!(moments(&[1.0, 1.0], &c).is_err());
    }

    #[test]
    fn residual_examples() {
        let p = gaussian_moments([1.0, 0.0, 1.0]);
        let r = feasibility_residual(&GridFunction::zeros(p.n()), &p).unwrap();
        assert_eq!(r, vec![-1.0, 0.0, -1.0]);
        let x = tabulate(&p, std_normal);
        let r = feasibility_residual(&x, &p).unwrap();
        assert!(max_norm(&r) <= 1e-6);
        let b = [1.0, 0.0, 2.0];
        let p = gaussian_moments(b);
        let (g, _) = gaussian_solution(b).unwrap();
        let x = tabulate(&p, |t| g.density(t));
        assert!(max_norm(&feasibility_residual(&x, &p).unwrap()) <= 1e-6);
    }

    #[test]
    fn rejects_degenerate_bases() {
        let m = build_counting_grid(4).unwrap();
        let dup = vec![BasisFunction::monomial(1), BasisFunction::Tabulated { values: vec![2.0, 4.0, 6.0, 8.0] }];
        assert!(matches!(
            MomentProblem::new(EntropyFunction::Quadratic, m.clone(), dup, vec![1.0, 2.0]),
            Err(Error::RankDeficientBasis { .. })
        ));
        let short = vec![BasisFunction::Tabulated { values: vec![1.0; 3] }];
        assert!(matches!(
            MomentProblem::new(EntropyFunction::Quadratic, m.clone(), short, vec![1.0]),
            Err(Error::LengthMismatch { .. })
        ));
        assert!(MomentProblem::new(EntropyFunction::Quadratic, m.clone(), vec![], vec![]).is_err());
        assert!(MomentProblem::new(EntropyFunction::Quadratic, m, monomial_basis(1), vec![f64::NAN]).is_err());
    }

    #[test]
    fn classify_examples() {
        use FeasibilityClass::*;
        assert_eq!(classify_gaussian_feasibility([1.0, 0.0, 1.0]).class, FeasibleInterior);
        assert_eq!(classify_gaussian_feasibility([0.0, 0.0, 0.0]).class, Origin);
        assert_eq!(classify_gaussian_feasibility([1.0, 1.0, 1.0]).class, InfeasibleBoundary);
        assert_eq!(classify_gaussian_feasibility([1.0, 0.0, 2.0]).class, FeasibleInterior);
        assert_eq!(classify_gaussian_feasibility([-1.0, 0.0, 1.0]).class, Infeasible);
        assert_eq!(classify_gaussian_feasibility([1.0, 2.0, 1.0]).class, Infeasible);
        assert_eq!(classify_gaussian_feasibility([0.0, 0.0, 1.0]).class, Infeasible);
        assert_eq!(classify_gaussian_feasibility([1.0, 0.0, 0.0]).class, Infeasible);
        assert!(classify_gaussian_feasibility([1.0, 1.0, 1.0]).note.is_some());
    }

    #[test]
    fn holder_examples() {
        let m = build_real_line_grid(10.0, 400).unwrap();
        assert_eq!(holder_bound(&GridFunction::zeros(m.len()), &m).unwrap(), (0.0, 0.0));
        let x = GridFunction::from_fn(&m, std_normal);
        let (l, r) = holder_bound(&x, &m).unwrap();
        assert!((l - (2.0 / PI).sqrt()).abs() <= 1e-5);
        assert!((r - 1.0).abs() <= 1e-5);
        let mut spike = GridFunction::zeros(m.len());
        spike.0[300] = 3.0;
        let (l, r) = holder_bound(&spike, &m).unwrap();
        assert_relative_eq!(l / r, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_solution_examples() {
        let (g, h) = gaussian_solution([1.0, 0.0, 1.0]).unwrap();
        assert_relative_eq!(g.alpha, 1.0);
        assert_eq!(g.beta, 0.0);
        assert_relative_eq!(g.gamma, (1.0 / (2.0 * PI).sqrt()).ln(), epsilon = 1e-15);
        assert!((h + 1.4189385332).abs() < 1e-10);

        let (g, h) = gaussian_solution([2.0, 0.0, 2.0]).unwrap();
        assert_relative_eq!(g.alpha, 1.0);
        assert_relative_eq!(h, 2.0 * (2.0 / (2.0 * PI * E).sqrt()).ln(), epsilon = 1e-14);

        let (m, s2) = (1.5, 0.7);
        let b = mean_variance_targets(m, s2).unwrap();
        let (g, h) = gaussian_solution(b).unwrap();
        for t in [-2.0, 0.0, 1.5, 4.0] {
            let expected = (-(t - m) * (t - m) / (2.0 * s2)).exp() / (2.0 * PI * s2).sqrt();
            assert_relative_eq!(g.density(t), expected, max_relative = 1e-12);
        }
        assert_relative_eq!(h, -(2.0 * PI * E * s2).sqrt().ln(), max_relative = 1e-12);

        assert!(matches!(gaussian_solution([1.0, 1.0, 1.0]), Err(Error::InfeasibleTargets(_))));
        assert!(gaussian_solution([0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn mean_variance_examples() {
        assert_eq!(mean_variance_targets(0.0, 0.3).unwrap(), [1.0, 0.0, 0.3]);
        assert_eq!(mean_variance_targets(0.0, 1.0).unwrap(), [1.0, 0.0, 1.0]);
        assert_eq!(mean_variance_targets(2.0, 1.0).unwrap(), [1.0, 2.0, 5.0]);
        assert!(matches!(mean_variance_targets(0.0, 0.0), Err(Error::BadVariance(_))));
        assert!(mean_variance_targets(0.0, -1.0).is_err());
    }

    #[test]
    fn exponent_coefficients_round_trip() {
        let (g, _) = gaussian_solution([0.5, -0.5, 1.3]).unwrap();
        let back = GaussianParams::from_exponent_coefficients(g.exponent_coefficients()).unwrap();
        assert_relative_eq!(back.alpha, g.alpha, max_relative = 1e-14);
        assert_relative_eq!(back.beta, g.beta, max_relative = 1e-14);
        assert_relative_eq!(back.gamma, g.gamma, max_relative = 1e-14);
        assert!(GaussianParams::from_exponent_coefficients([0.0, 0.0, 0.1]).is_none());
    }

    #[test]
    fn origin_forced_needs_signed_basis() {
        let m = build_interval_grid(-1.0, 1.0, 16, QuadratureRule::GaussLegendreComposite).unwrap();
        let p = MomentProblem::new(EntropyFunction::BoltzmannShannon, m.clone(), monomial_basis(3), vec![0.0; 3]).unwrap();
        assert!(p.origin_forced());
        let p = MomentProblem::new(EntropyFunction::BoltzmannShannon, m.clone(), vec![BasisFunction::monomial(1)], vec![0.0]).unwrap();
        assert!(!p.origin_forced());
        let p = MomentProblem::new(EntropyFunction::Quadratic, m, monomial_basis(1), vec![0.0]).unwrap();
        assert!(!p.origin_forced());
    }

    proptest! {
        #[test]
        fn moments_are_linear(
            xs in prop::collection::vec(-5.0f64..5.0, 40),
            ys in prop::collection::vec(-5.0f64..5.0, 40),
            lam in -3.0f64..3.0,
        ) {
            let m = build_interval_grid(-2.0, 3.0, 40, QuadratureRule::GaussLegendreComposite).unwrap();
            let p = MomentProblem::new(EntropyFunction::Quadratic, m, monomial_basis(3), vec![0.0; 3]).unwrap();
            let z: Vec<f64> = xs.iter().zip(&ys).map(|(x, y)| lam * x + y).collect();
            let mz = moments(&z, &p).unwrap();
            let mx = moments(&xs, &p).unwrap();
            let my = moments(&ys, &p).unwrap();
            for k in 0..3 {
                let expect = lam * mx[k] + my[k];
                let scale = (lam.abs() * mx[k].abs() + my[k].abs()).max(1.0);
                prop_assert!((mz[k] - expect).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn classification_is_scale_invariant(
            b1 in -2.0f64..4.0, b2 in -4.0f64..4.0, b3 in -2.0f64..4.0, lam in 0.01f64..100.0,
        ) {
            let v = classify_gaussian_feasibility([b1, b2, b3]).class;
            let s = classify_gaussian_feasibility([lam * b1, lam * b2, lam * b3]).class;
            // scaling can move a point across the 4-ulp boundary band only if it
            // was already within rounding of it
            let near = (b2.abs() - (b1 * b3).abs().sqrt()).abs() < 1e-12;
            prop_assert!(v == s || near);
        }

        #[test]
        fn holder_inequality(xs in prop::collection::vec(0.0f64..3.0, 32)) {
            let m = build_interval_grid(0.5, 4.0, 32, QuadratureRule::GaussLegendreComposite).unwrap();
            let (l, r) = holder_bound(&xs, &m).unwrap();
            prop_assert!(l <= r + 1e-12);
            // positive nodes have distinct |t|; two separated positive values => strict
            let support: Vec<usize> = (0..32).filter(|&i| xs[i] > 1e-3).collect();
            if support.len() >= 2 && support[support.len() - 1] - support[0] >= 4 {
                prop_assert!(l < r);
            }
        }

        #[test]
        fn closed_form_density_is_feasible(b1 in 0.3f64..3.0, c in -0.9f64..0.9, s2 in 0.2f64..4.0) {
            // b2 = c sqrt(b1 b3) keeps the triple interior
            let b3 = b1 * s2;
            let b2 = c * (b1 * b3).sqrt();
            let b = [b1, b2, b3];
            prop_assert_eq!(classify_gaussian_feasibility(b).class, FeasibilityClass::FeasibleInterior);
            let p = gaussian_moments(b);
            let (g, _) = gaussian_solution(b).unwrap();
            let x = tabulate(&p, |t| g.density(t));
            prop_assert!(max_norm(&feasibility_residual(&x, &p).unwrap()) <= 1e-6);
        }
    }
}
