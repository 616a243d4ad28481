//! Numerical checks of the identities behind the probabilistic solver.

pub mod bsde;
pub mod determinism;
pub mod flow;
pub mod pde;
pub mod report;

pub use bsde::{bsde_residual, BsdeResidual};
pub use determinism::{determinism_check, DeterminismStudy};
pub use flow::{
    composition_law, flow_consistency, flow_regularity, flow_regularity_mc, min_grid_jacobian, tangent_consistency,
    FlowRegularity, ProbeTimes,
};
pub use pde::{pde_residual, PdeResidual};
pub use report::{log_log_slope, CheckReport, DiagnosticsReport};
