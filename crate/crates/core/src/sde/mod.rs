//! Brownian ensembles and Euler–Maruyama integration of characteristics.

pub mod forward;
pub mod noise;

pub use forward::{
    fingerprint, gradient_field, integrate_forward, integrate_forward_with, integrate_tangent, CharacteristicEnsemble,
    TangentEnsemble,
};
pub use noise::{sample_brownian, BrownianEnsemble, NoiseMode, NoiseSpec, NormalStream};
