use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sde::forward::{fingerprint, gradient_field, CharacteristicEnsemble};
use crate::torus::{InterpMode, SpaceTimeField, SpaceTimeInterpolant};

/// The martingale integrand `X_s = ∇y(s, ·)∘Z_s`.
#[derive(Debug, Clone)]
pub struct MartingaleIntegrandField<T> {
    gradient: SpaceTimeField<T>,
    interp: SpaceTimeInterpolant<T>,
    source: u64,
}

impl<T: Real> MartingaleIntegrandField<T> {
    pub fn new(y: &SpaceTimeField<T>) -> Result<Self> {
        let gradient = gradient_field(y)?;
        let interp = SpaceTimeInterpolant::new(&gradient, InterpMode::CubicSpline)?;
        Ok(Self {
            gradient,
            interp,
            source: fingerprint(y),
        })
    }

    pub fn gradient(&self) -> &SpaceTimeField<T> {
        &self.gradient
    }

    /// `X_s` at position `z`, row-major `dim × dim`.
    pub fn eval_into(&self, s: T, z: &[T], out: &mut [T]) -> Result<()> {
        self.interp.check_time(s)?;
        self.interp.eval_into(s, z, out);
        Ok(())
    }

    /// `X` at every path, start point and step of `chars` (layout as [`IntegrandSamples`]).
    pub fn along(&self, chars: &CharacteristicEnsemble<T>) -> Result<IntegrandSamples<T>> {
        let dim = chars.dim();
        if self.gradient.grid().dim() != dim {
            return Err(Error::ShapeMismatch("ensemble and field dimensions differ".into()));
        }
        self.interp.check_time(chars.start_time())?;
        self.interp.check_time(*chars.times().last().unwrap())?;
        let dd = dim * dim;
        let steps = chars.steps();
        let mut values = vec![T::zero(); chars.path_count() * chars.start_count() * (steps + 1) * dd];
        let mut z = vec![T::zero(); dim];
        let mut idx = 0;
        for p in 0..chars.path_count() {
            for s in 0..chars.start_count() {
                for (j, &t) in chars.times().iter().enumerate() {
                    chars.position(p, s, j, &mut z);
                    self.interp.eval_into(t, &z, &mut values[idx..idx + dd]);
                    idx += dd;
                }
            }
        }
        Ok(IntegrandSamples {
            dim,
            steps,
            starts: chars.start_count(),
            paths: chars.path_count(),
            values,
        })
    }

    pub fn source_fingerprint(&self) -> u64 {
        self.source
    }
}

/// `X` sampled along an ensemble: `[path][start][step][dim × dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegrandSamples<T> {
    pub dim: usize,
    pub steps: usize,
    pub starts: usize,
    pub paths: usize,
    pub values: Vec<T>,
}

impl<T: Real> IntegrandSamples<T> {
    pub fn at(&self, path: usize, start: usize, step: usize) -> &[T] {
        let dd = self.dim * self.dim;
        let a = ((path * self.starts + start) * (self.steps + 1) + step) * dd;
        &self.values[a..a + dd]
    }
}

/// `X_s = ∇y(s, ·)∘Z_s` along `chars`.
pub fn martingale_integrand<T: Real>(y: &SpaceTimeField<T>, chars: &CharacteristicEnsemble<T>) -> Result<IntegrandSamples<T>> {
    if y.grid().dim() != chars.dim() {
        return Err(Error::ShapeMismatch("ensemble and field dimensions differ".into()));
    }
    MartingaleIntegrandField::new(y)?.along(chars)
}
