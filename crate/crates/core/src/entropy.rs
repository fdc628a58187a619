//! The convex integrands `phi` supported by the solver.
//!
//! Every family is a closed proper convex function on the real line, strictly
//! convex on its domain `I = dom phi` with nonempty interior. At a finite
//! endpoint either `phi` is infinite and `phi'` diverges, or `phi` is finite
//! and `phi'` at the endpoint is the one-sided limit (possibly infinite).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ext_real::{ExtReal, NegInf, PosInf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyFunction {
    /// `u ln u`, `0 ln 0 = 0`.
    BoltzmannShannon,
    /// `u ln u - u`.
    BoltzmannShannonMinusU,
    /// `-ln u`.
    Burg,
    /// `u^2 / 2` on the whole line.
    Quadratic,
    /// `u ln u + (1 - u) ln(1 - u)` on `[0, 1]`.
    FermiDirac,
}

/// Endpoint data of `dom phi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainEnds {
    pub lo: ExtReal,
    pub hi: ExtReal,
    /// `phi(lo)`, `+inf` when the endpoint is excluded.
    pub value_lo: ExtReal,
    /// `lim phi'(u)` as `u -> lo+`.
    pub slope_lo: ExtReal,
    pub value_hi: ExtReal,
    pub slope_hi: ExtReal,
}

impl EntropyFunction {
    pub const ALL: [EntropyFunction; 5] = [
        EntropyFunction::BoltzmannShannon,
        EntropyFunction::BoltzmannShannonMinusU,
        EntropyFunction::Burg,
        EntropyFunction::Quadratic,
        EntropyFunction::FermiDirac,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EntropyFunction::BoltzmannShannon => "boltzmann_shannon",
            EntropyFunction::BoltzmannShannonMinusU => "boltzmann_shannon_minus_u",
            EntropyFunction::Burg => "burg",
            EntropyFunction::Quadratic => "quadratic",
            EntropyFunction::FermiDirac => "fermi_dirac",
        }
    }

    pub fn ends(self) -> DomainEnds {
        use EntropyFunction::*;
        let zero = ExtReal::ZERO;
        match self {
            BoltzmannShannon | BoltzmannShannonMinusU => DomainEnds {
                lo: zero,
                hi: PosInf,
                value_lo: zero,
                slope_lo: NegInf,
                value_hi: PosInf,
                slope_hi: PosInf,
            },
            Burg => DomainEnds {
                lo: zero,
                hi: PosInf,
                value_lo: PosInf,
                slope_lo: NegInf,
                value_hi: PosInf,
                slope_hi: zero,
            },
            Quadratic => DomainEnds {
                lo: NegInf,
                hi: PosInf,
                value_lo: PosInf,
                slope_lo: NegInf,
                value_hi: PosInf,
                slope_hi: PosInf,
            },
            FermiDirac => DomainEnds {
                lo: zero,
                hi: ExtReal::Finite(1.0),
                value_lo: zero,
                slope_lo: NegInf,
                value_hi: zero,
                slope_hi: PosInf,
            },
        }
    }

    /// Whether `u` lies in `dom phi` (endpoints included when `phi` is finite there).
    pub fn in_domain(self, u: f64) -> bool {
        self.eval(u).is_finite()
    }

    pub fn in_interior(self, u: f64) -> bool {
        let ends = self.ends();
        ExtReal::Finite(u) > ends.lo && ExtReal::Finite(u) < ends.hi
    }

    /// A convenient point of `int dom phi`, used to seed heuristics.
    pub fn interior_point(self) -> f64 {
        match self {
            EntropyFunction::FermiDirac => 0.5,
            EntropyFunction::Quadratic => 0.0,
            _ => 1.0,
        }
    }

    /// `phi(u)`, `+inf` outside the domain.
    pub fn eval(self, u: f64) -> ExtReal {
        use EntropyFunction::*;
        if !u.is_finite() {
            return PosInf;
        }
        let v = match self {
            BoltzmannShannon => {
                if u < 0.0 {
                    return PosInf;
                }
                xlogx(u)
            }
            BoltzmannShannonMinusU => {
                if u < 0.0 {
                    return PosInf;
                }
                xlogx(u) - u
            }
            Burg => {
                if u <= 0.0 {
                    return PosInf;
                }
                -u.ln()
            }
            Quadratic => 0.5 * u * u,
            FermiDirac => {
                if !(0.0..=1.0).contains(&u) {
                    return PosInf;
                }
                xlogx(u) + xlogx(1.0 - u)
            }
        };
        ExtReal::from_f64(v)
    }

    /// `phi'(u)` on the interior; the one-sided limit at a finite endpoint of
    /// the closed domain.
    pub fn prime(self, u: f64) -> Result<ExtReal> {
        use EntropyFunction::*;
        let outside = || Err(Error::Domain(format!("{u} is not in dom {}", self.name())));
        if !u.is_finite() {
            return outside();
        }
        match self {
            BoltzmannShannon | BoltzmannShannonMinusU | Burg => {
                if u < 0.0 {
                    return outside();
                }
                if u == 0.0 {
                    return Ok(NegInf);
                }
                Ok(ExtReal::Finite(match self {
                    BoltzmannShannon => 1.0 + u.ln(),
                    BoltzmannShannonMinusU => u.ln(),
                    _ => -1.0 / u,
                }))
            }
            Quadratic => Ok(ExtReal::Finite(u)),
            FermiDirac => {
                if !(0.0..=1.0).contains(&u) {
                    outside()
                } else if u == 0.0 {
                    Ok(NegInf)
                } else if u == 1.0 {
                    Ok(PosInf)
                } else {
                    Ok(ExtReal::Finite(u.ln() - (1.0 - u).ln()))
                }
            }
        }
    }

    /// `phi''(u)` on the interior.
    pub fn second(self, u: f64) -> Result<f64> {
        use EntropyFunction::*;
        if !self.in_interior(u) {
            return Err(Error::Domain(format!(
                "{u} is not in the interior of dom {}",
                self.name()
            )));
        }
        Ok(match self {
            BoltzmannShannon | BoltzmannShannonMinusU => 1.0 / u,
            Burg => 1.0 / (u * u),
            Quadratic => 1.0,
            FermiDirac => 1.0 / (u * (1.0 - u)),
        })
    }

    pub fn in_conj_interior(self, s: f64) -> bool {
        match self {
            EntropyFunction::Burg => s < 0.0,
            _ => s.is_finite(),
        }
    }

    /// The link `(phi*)'(s)`: the unique interior `u` with `phi'(u) = s`.
    ///
    /// Exponential links saturate at `f64::MAX` instead of overflowing.
    pub fn conj_prime(self, s: f64) -> Result<f64> {
        use EntropyFunction::*;
        if !self.in_conj_interior(s) {
            return Err(self.conj_domain_error(s));
        }
        Ok(match self {
            BoltzmannShannon => clamp_finite((s - 1.0).exp()),
            BoltzmannShannonMinusU => clamp_finite(s.exp()),
            Burg => -1.0 / s,
            Quadratic => s,
            FermiDirac => logistic(s),
        })
    }

    /// `(phi*)''(s) = 1 / phi''((phi*)'(s))`.
    pub fn conj_prime_deriv(self, s: f64) -> Result<f64> {
        use EntropyFunction::*;
        if !self.in_conj_interior(s) {
            return Err(self.conj_domain_error(s));
        }
        Ok(match self {
            BoltzmannShannon => clamp_finite((s - 1.0).exp()),
            BoltzmannShannonMinusU => clamp_finite(s.exp()),
            Burg => 1.0 / (s * s),
            Quadratic => 1.0,
            FermiDirac => {
                let p = logistic(s);
                let q = logistic(-s);
                p * q
            }
        })
    }

    fn conj_domain_error(self, s: f64) -> Error {
        Error::Domain(format!(
            "{s} is not in the interior of dom {}*",
            self.name()
        ))
    }
}

impl fmt::Display for EntropyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EntropyFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntropyFunction::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| {
                Error::InvalidProblem(format!(
                    "unknown entropy family {s:?} (expected one of boltzmann_shannon, \
                     boltzmann_shannon_minus_u, burg, quadratic, fermi_dirac)"
                ))
            })
    }
}

fn xlogx(u: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        u * u.ln()
    }
}

fn logistic(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

fn clamp_finite(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        f64::MAX
    }
}
