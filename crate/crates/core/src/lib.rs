//! Probabilistic and deterministic solvers for the spatially periodic
//! backward Burgers equation
//!
//! ```text
//! ∂_s y + (y·∇)y + νΔy + F(s, θ) = 0,    y(T, θ) = h(θ),    θ ∈ T^n,
//! ```
//!
//! built around the forward-backward stochastic system
//!
//! ```text
//! dZ_s = Y_s ds + √(2ν) dW_s,    dY_s = -F(s)∘Z_s ds + √(2ν) X_s dW_s,
//! Z_t = e,  Y_T = h∘Z_T.
//! ```
//!
//! The numerical core is generic over the scalar type ([`Real`]: `f32` or
//! `f64`); the aliases at the crate root fix it to `f64`.

pub mod diagnostics;
pub mod error;
pub mod scalar;
pub mod oracle;
pub mod picard;
pub mod presets;
pub mod problem;
pub mod sde;
pub mod torus;

pub use error::{Error, Result};
pub use scalar::Real;
pub use torus::GridSpec;

pub type Field = torus::PeriodicField<f64>;
pub type SpaceTime = torus::SpaceTimeField<f64>;
pub type Problem = problem::BurgersProblem<f64>;
pub type Solution = picard::PicardSolution<f64>;
pub type Characteristics = sde::CharacteristicEnsemble<f64>;
pub type Tangents = sde::TangentEnsemble<f64>;
