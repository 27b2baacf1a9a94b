//! Numerical toolkit for the singular p-Laplacian Dirichlet problem
//!
//! ```text
//! −Δ_p u = λ u^{−α} + f(x, u, ∇u)  in Ω,    u = 0 on ∂Ω
//! ```
//!
//! on intervals and rectangles.

pub mod constants;
pub mod discretization;
pub mod error;
pub mod fixed_point;
pub mod plap;
pub mod singular;
pub mod verification;

pub use error::{Error, Result};
