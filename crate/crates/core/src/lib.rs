//! Convex entropy minimization under finitely many linear moment constraints.
//!
//! Given a convex integrand `phi`, a finite measure `mu` (a quadrature of an
//! interval, a truncated real line, or a truncated counting measure), basis
//! functions `psi_1..psi_m` and targets `b`, the crate
//!
//! - solves `min integral phi(x) dmu  s.t.  integral x psi_k dmu = b_k` through
//!   Lagrange multipliers ([`dual`]),
//! - certifies candidate solutions by the multiplier identity
//!   `phi'(x) = sum alpha_k psi_k` and by directional derivatives over the
//!   feasible directions ([`certificate`]),
//! - cross-checks both against an independent primal solver ([`oracle`]) and
//!   the closed-form Gaussian solution ([`problem::gaussian_solution`]).

pub mod certificate;
pub mod cli;
pub mod dual;
pub mod entropy;
pub mod error;
pub mod ext_real;
pub mod measure;
pub mod oracle;
pub mod problem;

pub use certificate::{certify, CertificateStatus, CertifyOptions, Verdict};
pub use dual::{solve, InitStrategy, Multipliers, SolveReport, SolverOptions};
pub use entropy::EntropyFunction;
pub use error::{Error, Result};
pub use ext_real::ExtReal;
pub use measure::{DiscretizedMeasure, GridFunction, QuadratureRule};
pub use oracle::{primal_solve, OracleOptions};
pub use problem::{BasisFunction, MomentProblem};
