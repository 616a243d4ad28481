//! Deterministic reference solutions.

pub mod cole_hopf;
pub mod reversal;
pub mod spectral_solver;

pub use cole_hopf::cole_hopf_solution;
pub use reversal::time_reversal;
pub use spectral_solver::{solve_backward_burgers, solve_backward_burgers_on, stability_bound, OracleConfig};
