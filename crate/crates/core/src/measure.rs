//! Finite node/weight discretizations of the measure space and extended-real
//! integration over them.
//!
//! All weights are strictly positive, so "almost everywhere" on a grid means
//! "at every node".

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::entropy::EntropyFunction;
use crate::error::{Error, Result};
use crate::ext_real::{ext_add, ext_mul, ExtReal};

/// Points per Gauss-Legendre panel in composite rules.
pub const PANEL_POINTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    IntervalQuadrature,
    RealLineTruncated,
    CountingTruncated,
    ExplicitWeighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    #[default]
    #[serde(rename = "gauss_legendre")]
    GaussLegendreComposite,
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedMeasure {
    kind: MeasureKind,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    radius: Option<f64>,
}

impl DiscretizedMeasure {
    /// An arbitrary finite measure with strictly positive weights on strictly
    /// increasing nodes.
    pub fn explicit(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        Self::checked(MeasureKind::ExplicitWeighted, nodes, weights, None)
    }

    fn checked(
        kind: MeasureKind,
        nodes: Vec<f64>,
        weights: Vec<f64>,
        radius: Option<f64>,
    ) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::BadGrid("measure has no nodes".into()));
        }
        if nodes.len() != weights.len() {
            return Err(Error::LengthMismatch {
                expected: nodes.len(),
                found: weights.len(),
            });
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::BadGrid(format!(
                "weight {i} is {} (must be finite and positive)",
                weights[i]
            )));
        }
        if nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::BadGrid("nodes must be finite".into()));
        }
        if let Some(i) = nodes.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::BadGrid(format!(
                "nodes must be strictly increasing (node {} = {} >= node {} = {})",
                i,
                nodes[i],
                i + 1,
                nodes[i + 1]
            )));
        }
        Ok(DiscretizedMeasure {
            kind,
            nodes,
            weights,
            radius,
        })
    }

    pub fn kind(&self) -> MeasureKind {
        self.kind
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Truncation radius of a real-line grid.
    pub fn radius(&self) -> Option<f64> {
        self.radius
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `mu(T)`.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Sum of `w_i f(t_i)` for a finite-valued integrand given as a closure.
    pub fn quad<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }

    /// Finite weighted sum of node values.
    pub fn sum(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values.iter().zip(&self.weights).map(|(v, w)| v * w).sum()
    }

    pub fn check_len(&self, found: usize) -> Result<()> {
        if found == self.len() {
            Ok(())
        } else {
            Err(Error::LengthMismatch {
                expected: self.len(),
                found,
            })
        }
    }
}

/// Discretization of Lebesgue measure on `[lo, hi]`.
///
/// The composite Gauss-Legendre rule splits the `n` nodes over
/// `ceil(n / 8)` equal panels as evenly as possible.
pub fn build_interval_grid(
    lo: f64,
    hi: f64,
    n: usize,
    rule: QuadratureRule,
) -> Result<DiscretizedMeasure> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::BadGrid(format!("need finite lo < hi, got [{lo}, {hi}]")));
    }
    if n < 2 {
        return Err(Error::BadGrid(format!("need at least 2 nodes, got {n}")));
    }
    let (nodes, weights) = match rule {
        QuadratureRule::Trapezoid => {
            let h = (hi - lo) / (n - 1) as f64;
            let nodes = (0..n)
                .map(|i| if i == n - 1 { hi } else { lo + i as f64 * h })
                .collect();
            let weights = (0..n)
                .map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h })
                .collect();
            (nodes, weights)
        }
        QuadratureRule::GaussLegendreComposite => {
            let panels = n.div_ceil(PANEL_POINTS);
            let width = (hi - lo) / panels as f64;
            let mut nodes = Vec::with_capacity(n);
            let mut weights = Vec::with_capacity(n);
            for p in 0..panels {
                let q = n / panels + usize::from(p < n % panels);
                let a = lo + p as f64 * width;
                let (x, w) = gauss_legendre(q);
                for (xi, wi) in x.iter().zip(&w) {
                    nodes.push(a + 0.5 * width * (xi + 1.0));
                    weights.push(0.5 * width * wi);
                }
            }
            (nodes, weights)
        }
    };
    DiscretizedMeasure::checked(MeasureKind::IntervalQuadrature, nodes, weights, None)
}

/// Truncation of Lebesgue measure on the real line to `[-radius, radius]`,
/// composite Gauss-Legendre.
pub fn build_real_line_grid(radius: f64, n: usize) -> Result<DiscretizedMeasure> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::BadGrid(format!("radius must be positive, got {radius}")));
    }
    let mut m = build_interval_grid(-radius, radius, n, QuadratureRule::GaussLegendreComposite)?;
    m.kind = MeasureKind::RealLineTruncated;
    m.radius = Some(radius);
    Ok(m)
}

/// Counting measure on `{1, ..., n}`.
pub fn build_counting_grid(n: usize) -> Result<DiscretizedMeasure> {
    if n < 1 {
        return Err(Error::BadGrid("counting grid needs at least one node".into()));
    }
    let nodes = (1..=n).map(|i| i as f64).collect();
    DiscretizedMeasure::checked(MeasureKind::CountingTruncated, nodes, vec![1.0; n], None)
}

/// Nodes and weights of the `q`-point Gauss-Legendre rule on `[-1, 1]`,
/// ascending. Newton iteration on `P_q` from Chebyshev-like initial guesses.
pub fn gauss_legendre(q: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(q >= 1);
    let mut x = vec![0.0; q];
    let mut w = vec![0.0; q];
    let qf = q as f64;
    for i in 0..q.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (qf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(q, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(q, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[q - 1 - i] = z;
        w[i] = wi;
        w[q - 1 - i] = wi;
    }
    if q % 2 == 1 {
        x[q / 2] = 0.0;
    }
    (x, w)
}

fn legendre_with_derivative(q: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    if q == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=q {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = q as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Finite-valued function on the nodes of a measure (a density candidate or
/// a direction).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GridFunction(pub Vec<f64>);

impl GridFunction {
    pub fn zeros(n: usize) -> Self {
        GridFunction(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction(vec![c; n])
    }

    pub fn from_fn<F: Fn(f64) -> f64>(m: &DiscretizedMeasure, f: F) -> Self {
        GridFunction(m.nodes().iter().map(|&t| f(t)).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn to_ext(&self) -> Vec<ExtReal> {
        self.0.iter().map(|&v| ExtReal::from_f64(v)).collect()
    }

    pub fn sup_dist(&self, other: &GridFunction) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for GridFunction {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for GridFunction {
    fn from(v: Vec<f64>) -> Self {
        GridFunction(v)
    }
}

/// `integral f dmu := integral f+ dmu - integral f- dmu`, each part summed in
/// `[0, +inf]` and combined with extended addition, so an infinite clash
/// evaluates to `+inf`.
pub fn integrate(f: &[ExtReal], m: &DiscretizedMeasure) -> Result<ExtReal> {
    m.check_len(f.len())?;
    let mut pos = ExtReal::ZERO;
    let mut neg = ExtReal::ZERO;
    for (&v, &w) in f.iter().zip(m.weights()) {
        let w = ExtReal::Finite(w);
        pos = ext_add(pos, ext_mul(w, v.pos_part()));
        neg = ext_add(neg, ext_mul(w, v.neg_part()));
    }
    Ok(ext_add(pos, -neg))
}

/// The entropy functional `integral phi(x(t)) dmu(t)`; `+inf` as soon as a
/// node value leaves `dom phi`.
pub fn entropy_value(
    f: EntropyFunction,
    x: &[f64],
    m: &DiscretizedMeasure,
) -> Result<ExtReal> {
    m.check_len(x.len())?;
    let composed: Vec<ExtReal> = x.iter().map(|&u| f.eval(u)).collect();
    integrate(&composed, m)
}
