//! Extended reals `[-inf, +inf]` with the arithmetic conventions used by
//! integral functionals:
//!
//! - `+inf + (-inf) = -inf + (+inf) = +inf` (an infinite clash resolves upward),
//! - `0 * (+-inf) = (+-inf) * 0 = 0`.
//!
//! With these rules addition and multiplication are total, which is what
//! makes `x -> integral of phi(x(t))` well defined for every measurable `x`.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtReal::{NegInf, PosInf};

impl ExtReal {
    pub const ZERO: ExtReal = ExtReal::Finite(0.0);

    /// Maps IEEE infinities onto the matching variant. NaN is not an extended
    /// real; it is mapped to `+inf`, the value the conventions assign to an
    /// undefined `inf - inf`.
    pub fn from_f64(v: f64) -> Self {
        if v.is_nan() || v == f64::INFINITY {
            PosInf
        } else if v == f64::NEG_INFINITY {
            NegInf
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn to_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            ExtReal::Finite(v) => v,
            PosInf => f64::INFINITY,
        }
    }

    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_zero(self) -> bool {
        matches!(self, ExtReal::Finite(v) if v == 0.0)
    }

    /// `max(x, 0)`.
    pub fn pos_part(self) -> ExtReal {
        match self {
            NegInf => ExtReal::ZERO,
            ExtReal::Finite(v) => ExtReal::Finite(v.max(0.0)),
            PosInf => PosInf,
        }
    }

    /// `max(-x, 0)`.
    pub fn neg_part(self) -> ExtReal {
        (-self).pos_part()
    }

    pub fn abs(self) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::Finite(v.abs()),
            _ => PosInf,
        }
    }
}

/// Extended addition: finite sums are ordinary, an infinity absorbs any
/// finite summand, and `+inf + -inf` is `+inf` in either order.
pub fn ext_add(x: ExtReal, y: ExtReal) -> ExtReal {
    match (x, y) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a + b),
        (PosInf, _) | (_, PosInf) => PosInf,
        (NegInf, _) | (_, NegInf) => NegInf,
    }
}

/// Extended multiplication: `0 * (+-inf) = 0`, otherwise the sign rule.
pub fn ext_mul(x: ExtReal, y: ExtReal) -> ExtReal {
    match (x, y) {
        (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a * b),
        (ExtReal::Finite(a), inf) | (inf, ExtReal::Finite(a)) => {
            if a == 0.0 {
                ExtReal::ZERO
            } else if (a > 0.0) == (inf == PosInf) {
                PosInf
            } else {
                NegInf
            }
        }
        (a, b) => {
            if a == b {
                PosInf
            } else {
                NegInf
            }
        }
    }
}

impl Add for ExtReal {
    type Output = ExtReal;
    fn add(self, rhs: ExtReal) -> ExtReal {
        ext_add(self, rhs)
    }
}

impl Sub for ExtReal {
    type Output = ExtReal;
    fn sub(self, rhs: ExtReal) -> ExtReal {
        ext_add(self, -rhs)
    }
}

impl Mul for ExtReal {
    type Output = ExtReal;
    fn mul(self, rhs: ExtReal) -> ExtReal {
        ext_mul(self, rhs)
    }
}

impl Neg for ExtReal {
    type Output = ExtReal;
    fn neg(self) -> ExtReal {
        match self {
            NegInf => PosInf,
            ExtReal::Finite(v) => ExtReal::Finite(-v),
            PosInf => NegInf,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.to_f64().partial_cmp(&other.to_f64())
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => f.write_str("-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            PosInf => f.write_str("+inf"),
        }
    }
}

// JSON has no infinities: finite values are numbers, infinities are the
// strings "+inf" / "-inf".
impl Serialize for ExtReal {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            PosInf => s.serialize_str("+inf"),
            NegInf => s.serialize_str("-inf"),
        }
    }
}

impl<'de> Deserialize<'de> for ExtReal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(ExtReal::Finite(v)),
            Repr::Str(s) => match s.as_str() {
                "+inf" | "inf" => Ok(PosInf),
                "-inf" => Ok(NegInf),
                other => Err(serde::de::Error::custom(format!(
                    "expected a number, \"+inf\" or \"-inf\", got {other:?}"
                ))),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const F: ExtReal = ExtReal::Finite(2.5);
    const Z: ExtReal = ExtReal::ZERO;

    #[test]
    fn add_examples() {
        assert_eq!(ext_add(PosInf, NegInf), PosInf);
        assert_eq!(ext_add(ExtReal::Finite(3.5), ExtReal::Finite(-1.5)), ExtReal::Finite(2.0));
        assert_eq!(ext_add(NegInf, ExtReal::Finite(7.0)), NegInf);
    }

    #[test]
    fn mul_examples() {
        assert_eq!(ext_mul(Z, PosInf), Z);
        assert_eq!(ext_mul(ExtReal::Finite(-2.0), PosInf), NegInf);
        assert_eq!(ext_mul(ExtReal::Finite(4.0), ExtReal::Finite(0.25)), ExtReal::Finite(1.0));
    }

    #[test]
    fn addition_table() {
        // rows/cols: -inf, finite, +inf
        let vals = [NegInf, F, PosInf];
        let expected = [
            [NegInf, NegInf, PosInf],
            [NegInf, ExtReal::Finite(5.0), PosInf],
            [PosInf, PosInf, PosInf],
        ];
        for (i, &x) in vals.iter().enumerate() {
            for (j, &y) in vals.iter().enumerate() {
                assert_eq!(ext_add(x, y), expected[i][j], "{x} + {y}");
            }
        }
    }

    #[test]
    fn multiplication_table() {
        let vals = [NegInf, Z, PosInf];
        let expected = [[PosInf, Z, NegInf], [Z, Z, Z], [NegInf, Z, PosInf]];
        for (i, &x) in vals.iter().enumerate() {
            for (j, &y) in vals.iter().enumerate() {
                assert_eq!(ext_mul(x, y), expected[i][j], "{x} * {y}");
            }
        }
    }

    #[test]
    fn parts_and_order() {
        assert_eq!(NegInf.pos_part(), Z);
        assert_eq!(NegInf.neg_part(), PosInf);
        assert_eq!(ExtReal::Finite(-3.0).neg_part(), ExtReal::Finite(3.0));
        assert!(NegInf < ExtReal::Finite(-1e300));
        assert!(PosInf > ExtReal::Finite(1e300));
        assert_eq!(PosInf - PosInf, PosInf);
    }

    #[test]
    fn json_repr() {
        let v = vec![NegInf, ExtReal::Finite(0.5), PosInf];
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"["-inf",0.5,"+inf"]"#);
        let back: Vec<ExtReal> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }
}
