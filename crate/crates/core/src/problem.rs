use crate::error::{Error, Result};
use crate::presets::Preset;
use crate::scalar::Real;
use crate::torus::{GridSpec, PeriodicField, SpaceTimeField};

/// Terminal data `h`, forcing `F` sampled on the solver's time grid, and viscosity `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct BurgersProblem<T> {
    terminal: PeriodicField<T>,
    forcing: SpaceTimeField<T>,
    nu: T,
}

impl<T: Real> BurgersProblem<T> {
    pub fn new(terminal: PeriodicField<T>, forcing: SpaceTimeField<T>, nu: T) -> Result<Self> {
        let dim = terminal.grid().dim();
        if terminal.components() != dim {
            return Err(Error::ShapeMismatch(format!(
                "terminal data has {} components, expected {dim}",
                terminal.components()
            )));
        }
        if forcing.grid() != terminal.grid() || forcing.components() != dim {
            return Err(Error::ShapeMismatch("forcing and terminal data live on different grids".into()));
        }
        if forcing.times().len() < 2 {
            return Err(Error::InvalidArgument("time grid needs at least one step".into()));
        }
        if !(nu >= T::zero()) || !nu.is_finite() {
            return Err(Error::InvalidArgument(format!("viscosity must be finite and >= 0, got {nu}")));
        }
        Ok(Self { terminal, forcing, nu })
    }

    /// Presets on a uniform grid `[0, horizon]` with `steps` steps.
    pub fn from_presets(grid: GridSpec, terminal: &Preset, forcing: &Preset, nu: T, horizon: T, steps: usize) -> Result<Self> {
        let times = SpaceTimeField::uniform_times(T::zero(), horizon, steps)?;
        Self::new(terminal.sample(grid)?, forcing.sample_in_time(grid, times)?, nu)
    }

    pub fn terminal(&self) -> &PeriodicField<T> {
        &self.terminal
    }

    pub fn forcing(&self) -> &SpaceTimeField<T> {
        &self.forcing
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn grid(&self) -> GridSpec {
        self.terminal.grid()
    }

    pub fn times(&self) -> &[T] {
        self.forcing.times()
    }

    pub fn horizon(&self) -> T {
        self.forcing.horizon()
    }

    pub fn steps(&self) -> usize {
        self.times().len() - 1
    }

    pub fn is_unforced(&self) -> bool {
        self.forcing.is_zero()
    }

    /// Same data re-sampled on a new time grid (forcing linear in time between its slices).
    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        let times = SpaceTimeField::uniform_times(self.forcing.start(), self.horizon(), steps)?;
        let slices = times
            .iter()
            .map(|&s| self.forcing.slice_at(s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.terminal.clone(), SpaceTimeField::new(times, slices)?, self.nu)
    }
}
