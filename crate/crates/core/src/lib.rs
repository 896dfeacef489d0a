//! Block-triangular preconditioners and inexact Uzawa iterations for
//! symmetric saddle-point systems, with dense numerical certificates for
//! their convergence bounds.

pub mod linalg;
pub mod problems;
pub mod rng;
pub mod operators;
pub mod iterations;
pub mod theory;
pub mod krylov;
