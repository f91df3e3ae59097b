//! Numerical laboratory for non-autonomous parabolic problems at desk scale.
//!
//! The crate realizes the abstract machinery of maximal `L^p`-regularity for
//! the non-autonomous Cauchy problem `u'(t) + A(t) u(t) = f(t)`, `u(0) = u0`,
//! on finite discretizations: coefficient fields and their oscillation moduli,
//! divergence-form finite-difference operators with Dirichlet, Neumann and
//! Robin boundary conditions, a dense-matrix sectorial functional calculus,
//! Acquistapace-Terreni constant fitting, randomized R-boundedness estimation,
//! and a solver built on the causal representation
//! `(Id - Q)(A(.)u(.)) = Sf + R u0`.

pub mod at;
pub mod calculus;
pub mod error;
pub mod field;
pub mod mesh;
pub mod operator;
pub mod rbound;
pub mod solver;
pub mod space;

pub use error::{Error, Result};
pub use space::{CertifiedNorm, WeightedSpace};
