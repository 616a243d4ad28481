//! Pseudo-spectral RK4 integration of the backward Burgers problem.
//!
//! With `τ = T - s` the problem becomes the forward evolution
//! `∂_τ y = (y·∇)y + νΔy + F(T-τ)`, `y|_{τ=0} = h`. Products are formed on
//! the grid and truncated by the 2/3 rule when dealiasing is on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::torus::{PeriodicField, SpaceTimeField, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Largest RK4 step.
    pub dt: f64,
    pub dealias: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { dt: 1e-3, dealias: true }
    }
}

struct Rhs<'a, T: Real> {
    spectral: Spectral<T>,
    problem: &'a BurgersProblem<T>,
    dealias: bool,
}

impl<T: Real> Rhs<'_, T> {
    /// `(y·∇)y + νΔy + F(s)`.
    fn eval(&self, y: &PeriodicField<T>, s: T) -> Result<PeriodicField<T>> {
        let grid = y.grid();
        let d = grid.dim();
        let jac = self.spectral.gradient(y)?;
        let mut adv = vec![T::zero(); y.values().len()];
        for node in 0..grid.node_count() {
            let v = y.node(node);
            let g = jac.node(node);
            for i in 0..d {
                adv[node * d + i] = (0..d).map(|j| v[j] * g[i * d + j]).sum();
            }
        }
        let mut adv = PeriodicField::new(grid, d, adv)?;
        if self.dealias && !adv.is_zero() {
            let mut c = self.spectral.forward(&adv)?;
            self.spectral.dealias(&mut c);
            adv = self.spectral.inverse(&c)?;
        }
        let lap = self.spectral.laplacian(y)?;
        let nu = self.problem.nu();
        let mut out = adv.zip_with(&lap, |a, l| a + nu * l)?;
        if !self.problem.is_unforced() {
            let f = self.problem.forcing().slice_at(s)?;
            out = out.zip_with(&f, |a, b| a + b)?;
        }
        Ok(out)
    }
}

fn axpy<T: Real>(y: &PeriodicField<T>, a: T, k: &PeriodicField<T>) -> Result<PeriodicField<T>> {
    y.zip_with(k, |u, v| u + a * v)
}

/// Largest stable step: RK4 covers roughly `|λ dt| ≤ 2.5` for the diffusive
/// and advective spectra bounded by `ν k_max²` and `U k_max`.
pub fn stability_bound<T: Real>(problem: &BurgersProblem<T>) -> f64 {
    let kmax = problem.grid().points_per_axis() as f64 / 2.0 * (problem.grid().dim() as f64).sqrt();
    let u = problem.terminal().sup_norm().as_f64() + problem.horizon().as_f64() * problem.forcing().sup_norm().as_f64();
    let rate = problem.nu().as_f64() * kmax * kmax + u * kmax;
    if rate == 0.0 {
        f64::INFINITY
    } else {
        2.5 / rate
    }
}

/// Backward solution on `output_times` (increasing, ending at the horizon),
/// taking RK4 steps of at most `config.dt` between consecutive outputs.
pub fn solve_backward_burgers_on<T: Real>(
    problem: &BurgersProblem<T>,
    config: &OracleConfig,
    output_times: &[T],
) -> Result<SpaceTimeField<T>> {
    if !(config.dt > 0.0) {
        return Err(Error::InvalidArgument(format!("oracle step must be positive, got {}", config.dt)));
    }
    let bound = stability_bound(problem);
    if config.dt > bound {
        return Err(Error::Unstable { dt: config.dt, bound });
    }
    let horizon = problem.horizon();
    if output_times.is_empty() || *output_times.last().unwrap() != horizon || output_times[0] < problem.forcing().start() {
        return Err(Error::InvalidArgument("output times must lie in the problem's range and end at the horizon".into()));
    }
    let rhs = Rhs {
        spectral: Spectral::new(problem.grid()),
        problem,
        dealias: config.dealias,
    };
    let half = T::of(0.5);
    let sixth = T::of(1.0 / 6.0);
    let two = T::of(2.0);
    let mut y = problem.terminal().clone();
    let mut out = vec![y.clone()];
    // March from the horizon back through the outputs.
    for w in output_times.windows(2).rev() {
        let (s_lo, s_hi) = (w[0], w[1]);
        let span = (s_hi - s_lo).as_f64();
        let n = (span / config.dt * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = (s_hi - s_lo) / T::of_usize(n);
        for step in 0..n {
            let s = s_hi - T::of_usize(step) * h;
            let k1 = rhs.eval(&y, s)?;
            let k2 = rhs.eval(&axpy(&y, half * h, &k1)?, s - half * h)?;
            let k3 = rhs.eval(&axpy(&y, half * h, &k2)?, s - half * h)?;
            let k4 = rhs.eval(&axpy(&y, h, &k3)?, s - h)?;
            let values: Vec<T> = (0..y.values().len())
                .map(|i| {
                    y.values()[i]
                        + h * sixth * (k1.values()[i] + two * k2.values()[i] + two * k3.values()[i] + k4.values()[i])
                })
                .collect();
            if values.iter().any(|v| !v.is_finite()) {
                return Err(Error::BlowUp {
                    time: (s - h).as_f64(),
                });
            }
            y = PeriodicField::new(y.grid(), y.components(), values)?;
        }
        out.push(y.clone());
    }
    out.reverse();
    SpaceTimeField::new(output_times.to_vec(), out)
}

/// Backward solution on `[t₀, T]` with a uniform grid of step at most `config.dt`.
pub fn solve_backward_burgers<T: Real>(problem: &BurgersProblem<T>, config: &OracleConfig) -> Result<SpaceTimeField<T>> {
    let (start, end) = (problem.forcing().start(), problem.horizon());
    let steps = (((end - start).as_f64() / config.dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let times = SpaceTimeField::uniform_times(start, end, steps)?;
    solve_backward_burgers_on(problem, config, &times)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::torus::GridSpec;

    fn problem(h: Preset, n: usize) -> BurgersProblem<f64> {
        BurgersProblem::from_presets(GridSpec::new(1, n).unwrap(), &h, &Preset::Zero, 0.1, 0.5, 4).unwrap()
    }

    #[test]
    fn zero_and_constant_are_fixed() {
        let y = solve_backward_burgers(&problem(Preset::Zero, 32), &OracleConfig::default()).unwrap();
        assert!(y.is_zero());
        let y = solve_backward_burgers(&problem(Preset::Constant { value: 0.3 }, 32), &OracleConfig::default()).unwrap();
        assert!(y.slices().iter().all(|s| s.values().iter().all(|&v| v == 0.3)));
        assert_eq!(y.times().len(), 501);
    }

    #[test]
    fn terminal_is_exact_and_energy_grows_backward() {
        let p = problem(Preset::sine(0.5, 1), 64);
        let y = solve_backward_burgers(&p, &OracleConfig::default()).unwrap();
        assert_eq!(y.terminal(), p.terminal());
        let energy: Vec<f64> = y.slices().iter().map(|s| s.l2_norm()).collect();
        assert!(energy.windows(2).all(|w| w[0] <= w[1]));
        // Spatial mean is conserved.
        let sp = Spectral::new(p.grid());
        for s in y.slices() {
            assert!(sp.forward(s).unwrap().at(0, &[0]).norm() < 1e-10);
        }
    }

    #[test]
    fn rejects_unstable_steps() {
        let p = problem(Preset::sine(0.5, 1), 256);
        let err = solve_backward_burgers(&p, &OracleConfig { dt: 0.05, dealias: true }).unwrap_err();
        assert!(matches!(err, Error::Unstable { .. }));
    }

    #[test]
    fn custom_output_grid() {
        let p = problem(Preset::sine(0.5, 1), 32);
        let times = SpaceTimeField::uniform_times(0.0, 0.5, 8).unwrap();
        let coarse = solve_backward_burgers_on(&p, &OracleConfig::default(), &times).unwrap();
        let fine = solve_backward_burgers(&p, &OracleConfig { dt: 0.5 / 504.0, dealias: true }).unwrap();
        assert!(coarse.initial().sup_distance(fine.initial()).unwrap() < 1e-10);
    }
}
