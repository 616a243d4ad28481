//! Named data for `h` and `F`: zero, constants, sines and sine sums.
//!
//! A vector preset acts componentwise: component `i` of `a·sin(kθ)` is
//! `a·sin(k θ_i)`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::scalar::Real;
use crate::torus::{GridSpec, PeriodicField, SpaceTimeField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SineTerm {
    pub amplitude: f64,
    pub wavenumber: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Preset {
    Zero,
    Constant { value: f64 },
    Sine { amplitude: f64, wavenumber: u32 },
    SineSum { terms: Vec<SineTerm> },
}

impl Preset {
    pub fn sine(amplitude: f64, wavenumber: u32) -> Self {
        Preset::Sine { amplitude, wavenumber }
    }

    pub fn value_at(&self, x: f64) -> f64 {
        match self {
            Preset::Zero => 0.0,
            Preset::Constant { value } => *value,
            Preset::Sine { amplitude, wavenumber } => amplitude * (*wavenumber as f64 * x).sin(),
            Preset::SineSum { terms } => terms
                .iter()
                .map(|t| t.amplitude * (t.wavenumber as f64 * x).sin())
                .sum(),
        }
    }

    /// Largest wavenumber present; 0 for constants.
    pub fn max_wavenumber(&self) -> u32 {
        match self {
            Preset::Zero | Preset::Constant { .. } => 0,
            Preset::Sine { wavenumber, .. } => *wavenumber,
            Preset::SineSum { terms } => terms.iter().map(|t| t.wavenumber).max().unwrap_or(0),
        }
    }

    /// Odd under `θ ↦ -θ`.
    pub fn is_odd(&self) -> bool {
        match self {
            Preset::Zero | Preset::Sine { .. } | Preset::SineSum { .. } => true,
            Preset::Constant { value } => *value == 0.0,
        }
    }

    pub fn sample<T: Real>(&self, grid: GridSpec) -> Result<PeriodicField<T>> {
        match self {
            Preset::Zero => Ok(PeriodicField::zeros(grid, grid.dim())),
            Preset::Constant { value } => Ok(PeriodicField::constant(grid, T::of(*value))),
            _ => PeriodicField::from_fn(grid, grid.dim(), |x: &[T], out: &mut [T]| {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = T::of(self.value_at(xi.as_f64()));
                }
            }),
        }
    }

    /// Time-independent forcing on `times`.
    pub fn sample_in_time<T: Real>(&self, grid: GridSpec, times: Vec<T>) -> Result<SpaceTimeField<T>> {
        SpaceTimeField::constant_in_time(times, self.sample(grid)?)
    }
}
