use serde::{Deserialize, Serialize};

use crate::diagnostics::report::CheckReport;
use crate::error::{Error, Result};
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::torus::{PeriodicField, SpaceTimeField, Spectral};

/// Strong residual of the backward equation on a candidate field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeResidual {
    pub times: Vec<f64>,
    /// Normalized L₂ norm of the residual at each time.
    pub l2: Vec<f64>,
    pub max_l2: f64,
    /// `sup |y(T) - h|`.
    pub terminal_mismatch: f64,
}

impl PdeResidual {
    /// Residual report against `tol`, and the terminal check against `terminal_tol`.
    pub fn reports(&self, tol: f64, terminal_tol: f64) -> Vec<CheckReport> {
        vec![
            CheckReport::at_most("pde_residual", self.max_l2, tol).with_meta("per_time_l2", &self.l2),
            CheckReport::at_most("terminal_mismatch", self.terminal_mismatch, terminal_tol),
        ]
    }
}

fn is_uniform<T: Real>(times: &[T]) -> bool {
    let dt = times[1] - times[0];
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dt).abs() <= T::of(1e-9) * dt.abs().max(T::epsilon()))
}

/// `∂_s y + (y·∇)y + νΔy + F` with the time derivative from centered
/// differences inside and second-order one-sided stencils at both ends.
pub fn pde_residual<T: Real>(y: &SpaceTimeField<T>, problem: &BurgersProblem<T>) -> Result<PdeResidual> {
    let times = y.times();
    if times.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "the residual needs at least 3 time slices, got {}",
            times.len()
        )));
    }
    if !is_uniform(times) {
        return Err(Error::InvalidArgument("the residual needs a uniform time grid".into()));
    }
    let grid = problem.grid();
    let dim = grid.dim();
    if y.grid() != grid || y.components() != dim {
        return Err(Error::ShapeMismatch("field and problem live on different grids".into()));
    }
    let spectral = Spectral::new(grid);
    let dt = times[1] - times[0];
    let last = times.len() - 1;
    let half = T::of(0.5);
    let mut l2 = Vec::with_capacity(times.len());
    for (j, &s) in times.iter().enumerate() {
        let ds = |a: &PeriodicField<T>, b: &PeriodicField<T>, c: &PeriodicField<T>, w: [f64; 3]| {
            let (wa, wb, wc) = (T::of(w[0]), T::of(w[1]), T::of(w[2]));
            a.zip_with(b, |p, q| wa * p + wb * q)?.zip_with(c, |p, q| (p + wc * q) / dt)
        };
        let dy = if j == 0 {
            ds(y.slice(0), y.slice(1), y.slice(2), [-1.5, 2.0, -0.5])?
        } else if j == last {
            ds(y.slice(last), y.slice(last - 1), y.slice(last - 2), [1.5, -2.0, 0.5])?
        } else {
            y.slice(j + 1).zip_with(y.slice(j - 1), |p, q| half * (p - q) / dt)?
        };
        let slice = y.slice(j);
        let grad = spectral.gradient(slice)?;
        let lap = spectral.laplacian(slice)?;
        let forcing = if problem.is_unforced() {
            None
        } else {
            Some(problem.forcing().slice_at(s)?)
        };
        let mut values = vec![T::zero(); slice.values().len()];
        for node in 0..grid.node_count() {
            let v = slice.node(node);
            let g = grad.node(node);
            for i in 0..dim {
                let adv: T = (0..dim).map(|k| v[k] * g[i * dim + k]).sum();
                let f = forcing.as_ref().map_or(T::zero(), |f| f.node(node)[i]);
                let idx = node * dim + i;
                values[idx] = dy.values()[idx] + adv + problem.nu() * lap.values()[idx] + f;
            }
        }
        l2.push(PeriodicField::new(grid, dim, values)?.l2_norm().as_f64());
    }
    Ok(PdeResidual {
        times: times.iter().map(|t| t.as_f64()).collect(),
        max_l2: l2.iter().copied().fold(0.0, f64::max),
        l2,
        terminal_mismatch: y.terminal().sup_distance(problem.terminal())?.as_f64(),
    })
}
