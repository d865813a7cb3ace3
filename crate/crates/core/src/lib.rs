//! Optimality certificates for nonsmooth constrained problems
//!
//! ```text
//! minimize f(x)  subject to  x ∈ X,  g_i(x) ≤ 0,  h_j(x) = 0
//! ```
//!
//! built on the penalty function `F(x, γ) = f(x) + γ·Σ h_j(x)² + ½‖x − x̄‖²`
//! over `G = {x ∈ X : g_i(x) ≤ 0}` and on sampled lower Hadamard conditional
//! derivatives. See the crate README for the problem file format and the CLI.

pub mod certify;
pub mod cli;
pub mod error;
pub mod expr;
pub mod extended_real;
pub mod hadamard;
pub mod penalty;
pub mod problem;

pub use error::{Error, Result};
pub use extended_real::{xdot, xmul, ExtReal};
pub use hadamard::SamplingSchedule;
pub use problem::{load_problem, parse_problem, Candidate, ProblemInstance};
