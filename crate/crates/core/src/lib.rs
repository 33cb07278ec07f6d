//! Numerical engine for multi-parameter second-order elliptic systems with
//! functional boundary conditions.
//!
//! The pipeline is: describe a domain ([`geometry`]) and the operators
//! `L_i`, `B_i` ([`operator`]); materialize the discrete solution operators
//! `K_i`, the boundary lifts `γ_i` and the principal eigenpairs
//! ([`greens`]); evaluate nonlinearities and boundary functionals and
//! estimate the constants that enter the existence and non-existence
//! conditions ([`functionals`]); iterate `u ← T u + Γ u` ([`fixedpoint`]);
//! and check the conditions at given parameters ([`certificates`]).

pub mod certificates;
pub mod error;
pub mod expr;
pub mod field;
pub mod fixedpoint;
pub mod functionals;
pub mod geometry;
pub mod greens;
pub mod linalg;
pub mod operator;
pub mod problem;
pub mod repro;

pub use error::{Error, Result};
pub use field::GridFunction;
pub use geometry::{DomainSpec, Grid};
