use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::report::{standardized, CheckReport};
use crate::error::{Error, Result};
use crate::picard::gamma::Moments;
use crate::picard::IntegrandSamples;
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::sde::{BrownianEnsemble, CharacteristicEnsemble};
use crate::torus::{InterpMode, Interpolant, SpaceTimeField, SpaceTimeInterpolant};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsdeResidual {
    pub times: Vec<f64>,
    /// RMS over paths, starts and components at each step.
    pub per_step_rms: Vec<f64>,
    /// RMS over everything.
    pub rms: f64,
    /// Steps at which the martingale mean is tested.
    pub checkpoints: Vec<usize>,
    /// `mean(y(s, Z_s) + Σ_{r<s} F Δr - y(t, e))` at each checkpoint.
    pub martingale_drift: Vec<f64>,
    pub martingale_standard_error: Vec<f64>,
}

impl BsdeResidual {
    /// Largest martingale drift in standard errors.
    pub fn martingale_statistic(&self) -> f64 {
        self.martingale_drift
            .iter()
            .zip(&self.martingale_standard_error)
            .map(|(d, s)| standardized(*d, *s))
            .fold(0.0, f64::max)
    }

    pub fn reports(&self, rms_tol: f64) -> Vec<CheckReport> {
        vec![
            CheckReport::at_most("bsde_residual", self.rms, rms_tol).with_meta("per_step_rms", &self.per_step_rms),
            CheckReport::at_most("martingale_mean", self.martingale_statistic(), 3.0)
                .with_standard_error(self.martingale_standard_error.iter().copied().fold(0.0, f64::max))
                .with_meta("drift", &self.martingale_drift)
                .with_meta("checkpoints", &self.checkpoints),
        ]
    }
}

/// Pathwise residual of the backward equation
/// `y(s, Z_s) - [h(Z_T) + Σ_{r≥s} F(r, Z_r)Δr - √(2ν) Σ_{r≥s} X_r ΔW_r]`
/// with `X = ∇y∘Z` from `x`, along characteristics `chars` driven by `noise`.
///
/// The martingale property of `y(s, Z_s) + Σ_{r<s} F Δr` is tested at the
/// quarter points of the step range; `y_standard_error` (the solver's
/// per-node error at the start) widens its band when given.
pub fn bsde_residual<T: Real>(
    y: &SpaceTimeField<T>,
    problem: &BurgersProblem<T>,
    chars: &CharacteristicEnsemble<T>,
    noise: &BrownianEnsemble<T>,
    x: &IntegrandSamples<T>,
    y_standard_error: Option<&SpaceTimeField<T>>,
) -> Result<BsdeResidual> {
    let dim = chars.dim();
    let steps = chars.steps();
    let starts = chars.start_count();
    let paths = chars.path_count();
    if noise.times() != chars.times() || noise.path_count() != paths || noise.dim() != dim {
        return Err(Error::ShapeMismatch("noise and characteristics come from different ensembles".into()));
    }
    if x.dim != dim || x.steps != steps || x.starts != starts || x.paths != paths {
        return Err(Error::ShapeMismatch("integrand samples do not match the characteristics".into()));
    }
    if y.grid() != problem.grid() || y.components() != dim {
        return Err(Error::ShapeMismatch("field and problem live on different grids".into()));
    }
    let times = chars.times();
    let yi = SpaceTimeInterpolant::new(y, InterpMode::CubicSpline)?;
    yi.check_time(times[0])?;
    let fi = if problem.is_unforced() {
        None
    } else {
        Some(SpaceTimeInterpolant::new(problem.forcing(), InterpMode::CubicSpline)?)
    };
    let h = Interpolant::new(problem.terminal(), InterpMode::CubicSpline)?;
    let sigma = (T::of(2.0) * problem.nu()).sqrt();
    let checkpoints: Vec<usize> = (1..=4).map(|q| (q * steps) / 4).filter(|&k| k > 0).collect();

    // Per path: squared residuals per step, and the start-averaged martingale
    // increments at the checkpoints.
    let per_path: Vec<(Vec<f64>, Vec<f64>)> = (0..paths)
        .into_par_iter()
        .map(|m| {
            let mut sq = vec![0.0; steps + 1];
            let mut mart = vec![0.0; checkpoints.len()];
            let mut z = vec![T::zero(); dim];
            let mut yv = vec![T::zero(); dim];
            let mut fv = vec![T::zero(); dim];
            let mut y_path = vec![T::zero(); (steps + 1) * dim];
            let mut f_path = vec![T::zero(); steps * dim];
            for e in 0..starts {
                let inc = noise.increments(m, e);
                for k in 0..=steps {
                    chars.position(m, e, k, &mut z);
                    yi.eval_into(times[k], &z, &mut yv);
                    y_path[k * dim..(k + 1) * dim].copy_from_slice(&yv);
                    if k < steps {
                        match &fi {
                            Some(f) => f.eval_into(times[k], &z, &mut fv),
                            None => fv.iter_mut().for_each(|v| *v = T::zero()),
                        }
                        f_path[k * dim..(k + 1) * dim].copy_from_slice(&fv);
                    }
                }
                chars.position(m, e, steps, &mut z);
                let mut target = vec![T::zero(); dim];
                h.eval_into(&z, &mut target);
                // Backward sweep for the residual.
                for k in (0..=steps).rev() {
                    if k < steps {
                        let dt = times[k + 1] - times[k];
                        let xk = x.at(m, e, k);
                        for a in 0..dim {
                            let mut xdw = T::zero();
                            for b in 0..dim {
                                xdw += xk[a * dim + b] * inc[k * dim + b];
                            }
                            target[a] = target[a] + f_path[k * dim + a] * dt - sigma * xdw;
                        }
                    }
                    for a in 0..dim {
                        sq[k] += (y_path[k * dim + a] - target[a]).as_f64().powi(2);
                    }
                }
                // Forward sweep for the martingale.
                let mut acc = vec![T::zero(); dim];
                let mut next = 0;
                for k in 0..=steps {
                    if next < checkpoints.len() && checkpoints[next] == k {
                        for a in 0..dim {
                            mart[next] += (y_path[k * dim + a] + acc[a] - y_path[a]).as_f64() / (starts * dim) as f64;
                        }
                        next += 1;
                    }
                    if k < steps {
                        let dt = times[k + 1] - times[k];
                        for a in 0..dim {
                            acc[a] += f_path[k * dim + a] * dt;
                        }
                    }
                }
            }
            (sq, mart)
        })
        .collect();

    let mut total = vec![0.0; steps + 1];
    let mut moments: Vec<Moments> = checkpoints.iter().map(|_| Moments::new(1)).collect();
    for (sq, mart) in &per_path {
        for (t, s) in total.iter_mut().zip(sq) {
            *t += s;
        }
        for (mo, v) in moments.iter_mut().zip(mart) {
            mo.push(&[*v]);
        }
    }
    let per_sample = (paths * starts * dim) as f64;
    let per_step_rms: Vec<f64> = total.iter().map(|s| (s / per_sample).sqrt()).collect();
    let rms = (total.iter().sum::<f64>() / (per_sample * (steps + 1) as f64)).sqrt();

    let start_se = match y_standard_error {
        None => 0.0,
        Some(se) => {
            let sei = SpaceTimeInterpolant::new(se, InterpMode::CubicSpline)?;
            let mut v = vec![T::zero(); dim];
            let mut sum = 0.0;
            for e in 0..starts {
                sei.eval_into(times[0], &chars.start_points()[e * dim..(e + 1) * dim], &mut v);
                sum += v.iter().map(|s| s.as_f64().abs()).sum::<f64>();
            }
            sum / (starts * dim) as f64
        }
    };
    Ok(BsdeResidual {
        times: times.iter().map(|t| t.as_f64()).collect(),
        per_step_rms,
        rms,
        martingale_drift: moments.iter().map(|m| m.mean()[0]).collect(),
        martingale_standard_error: moments
            .iter()
            .map(|m| (m.standard_error()[0].powi(2) + start_se * start_se).sqrt())
            .collect(),
        checkpoints,
    })
}
