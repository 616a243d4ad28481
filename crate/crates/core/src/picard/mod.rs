//! The contraction map, its fixed-point iteration, the solvability budget
//! and the martingale integrand.

pub mod budget;
pub mod gamma;
pub mod integrand;
pub mod solve;

pub use budget::{contraction_factor, horizon_bound, lipschitz_budget, ContractionBudget, Horizon};
pub use gamma::{gamma_map, gamma_map_detailed, GammaImage, McConfig};
pub use integrand::{martingale_integrand, IntegrandSamples, MartingaleIntegrandField};
pub use solve::{picard_solve, PicardConfig, PicardSolution, PicardState};
