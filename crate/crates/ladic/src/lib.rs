//! Exact arithmetic workbench for truncated free group algebras over a
//! prime's digit expansion.
//!
//! The crate is organized bottom-up:
//!
//! - [`padic`]: scalars with explicit valuation and a fixed digit window,
//!   plus the closed-form digit counts and budgets the higher layers cite.
//! - [`freealg`]: elements of a truncated free algebra on graded generators,
//!   with product, coproduct, antipode, logarithm and exponential.
//! - [`groupoid`]: two-object torsor elements over a base point, finite
//!   group algebras with their vanishing index, and randomized checks of the
//!   five compatibility diagrams.
//! - [`galois`]: the degree-`q` substitution action, eigenvector lifting,
//!   canonical fixed paths, and integral period exponents for filtered
//!   matrices.
//! - [`convergent`]: valuation sequences of algebra elements, convergence
//!   radius reports, lower bounds for the evaluation radius of a matrix
//!   representation, and evaluation of elements under such representations.
//! - [`gate`]: the unipotence decision procedure for mod-`ell^M` matrix
//!   tuples against a cyclotomic digit threshold.

pub mod convergent;
mod error;
pub mod freealg;
pub mod galois;
pub mod gate;
pub mod groupoid;
mod linalg;
pub mod padic;

pub use error::{Error, Result};
