use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::picard::budget::{horizon_bound, ContractionBudget};
use crate::picard::gamma::{gamma_map_detailed, McConfig};
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::torus::SpaceTimeField;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardConfig {
    /// Stop once the sup-grid change between iterates drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PicardConfig {
    fn default() -> Self {
        Self { tol: 5e-3, max_iter: 8 }
    }
}

/// Sup differences beyond this are treated as blow-up.
const DIVERGENCE_LIMIT: f64 = 1e8;

#[derive(Debug, Clone)]
pub struct PicardState<T> {
    pub iterate: SpaceTimeField<T>,
    pub standard_error: SpaceTimeField<T>,
    pub iterations: usize,
    pub diff_history: Vec<f64>,
    pub converged: bool,
    pub mc_config: McConfig,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per iteration. Not reproducible; kept apart from results.
    pub timings: Vec<f64>,
}

impl<T: Real> PicardState<T> {
    /// `d_k / d_{k-1}` for `k >= 1` (skipping zero denominators).
    pub fn diff_ratios(&self) -> Vec<f64> {
        self.diff_history
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct PicardSolution<T> {
    pub field: SpaceTimeField<T>,
    pub state: PicardState<T>,
    pub budget: ContractionBudget,
}

/// Fixed-point iteration `y⁽ᵏ⁺¹⁾ = Γ(y⁽ᵏ⁾)` from `y⁽⁰⁾ ≡ 0`.
///
/// The noise is keyed by slice, node and path but not by iteration, so each
/// iterate applies the same sampled map and the differences measure its
/// contraction rather than fresh sampling noise.
pub fn picard_solve<T: Real>(problem: &BurgersProblem<T>, mc: &McConfig, config: &PicardConfig) -> Result<PicardSolution<T>> {
    if !(config.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {}", config.tol)));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidArgument("max_iter must be >= 1".into()));
    }
    mc.validate()?;
    let budget = ContractionBudget::for_problem(problem.terminal(), problem.forcing())?;
    let mut warnings = Vec::new();
    if !horizon_bound(budget.k)?.admits(budget.horizon) {
        warnings.push(format!(
            "horizon T = {} is not below T0 = {:.6} (gamma = {:.4}); contraction is not guaranteed",
            budget.horizon,
            budget.t0.unwrap_or(f64::INFINITY),
            budget.gamma
        ));
    }

    let dim = problem.grid().dim();
    let mut iterate = SpaceTimeField::zeros(problem.times().to_vec(), problem.grid(), dim)?;
    let mut standard_error = iterate.clone();
    let mut diff_history = Vec::new();
    let mut timings = Vec::new();
    let mut converged = false;
    for k in 1..=config.max_iter {
        let started = Instant::now();
        let image = gamma_map_detailed(&iterate, problem, mc)?;
        let diff = image.field.sup_distance(&iterate)?.as_f64();
        timings.push(started.elapsed().as_secs_f64());
        if !diff.is_finite() || diff > DIVERGENCE_LIMIT {
            return Err(Error::Divergence { iteration: k, diff });
        }
        diff_history.push(diff);
        iterate = image.field;
        standard_error = image.standard_error;
        if diff < config.tol {
            converged = true;
            break;
        }
    }

    let ratios: Vec<f64> = diff_history.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect();
    if ratios.windows(2).any(|w| w[0] > 1.0 && w[1] > 1.0) {
        warnings.push(format!("successive differences are not contracting: ratios {ratios:?}"));
    }
    if !converged {
        warnings.push(format!(
            "no convergence to tol {} within {} iterations (last diff {:e})",
            config.tol,
            config.max_iter,
            diff_history.last().copied().unwrap_or(f64::NAN)
        ));
    }

    Ok(PicardSolution {
        field: iterate.clone(),
        state: PicardState {
            iterations: diff_history.len(),
            iterate,
            standard_error,
            diff_history,
            converged,
            mc_config: *mc,
            warnings,
            timings,
        },
        budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::torus::GridSpec;

    fn problem(h: Preset, f: Preset) -> BurgersProblem<f64> {
        BurgersProblem::from_presets(GridSpec::new(1, 16).unwrap(), &h, &f, 0.1, 0.5, 8).unwrap()
    }

    #[test]
    fn zero_problem_converges_immediately() {
        let s = picard_solve(&problem(Preset::Zero, Preset::Zero), &McConfig::new(20, 1), &PicardConfig::default()).unwrap();
        assert_eq!(s.state.diff_history, vec![0.0]);
        assert_eq!(s.state.iterations, 1);
        assert!(s.field.is_zero());
        assert_eq!(s.budget.t0, None);
    }

    #[test]
    fn constant_problem_converges_in_two() {
        let s = picard_solve(
            &problem(Preset::Constant { value: 0.3 }, Preset::Zero),
            &McConfig::new(20, 1),
            &PicardConfig::default(),
        )
        .unwrap();
        assert!(s.state.iterations <= 2);
        assert_eq!(s.state.diff_history.last(), Some(&0.0));
        assert!(s.field.slices().iter().all(|sl| sl.values().iter().all(|&v| v == 0.3)));
    }

    #[test]
    fn terminal_anchoring_and_finite_history() {
        let p = problem(Preset::sine(0.5, 1), Preset::sine(0.2, 2));
        let s = picard_solve(&p, &McConfig::new(200, 4), &PicardConfig { tol: 1e-9, max_iter: 3 }).unwrap();
        assert_eq!(s.field.terminal(), p.terminal());
        assert!(s.state.diff_history.iter().all(|d| d.is_finite() && *d >= 0.0));
        assert!(!s.state.converged);
        assert!(s.state.warnings.iter().any(|w| w.contains("no convergence")));
    }

    #[test]
    fn warns_beyond_horizon() {
        let p = BurgersProblem::from_presets(GridSpec::new(1, 16).unwrap(), &Preset::sine(3.0, 1), &Preset::Zero, 0.1, 0.5, 4)
            .unwrap();
        let s = picard_solve(&p, &McConfig::new(10, 1), &PicardConfig { tol: 1e-12, max_iter: 1 }).unwrap();
        assert!(s.budget.gamma > 1.0);
        assert!(s.state.warnings.iter().any(|w| w.contains("T0")));
    }

    #[test]
    fn rejects_bad_settings() {
        let p = problem(Preset::Zero, Preset::Zero);
        assert!(picard_solve(&p, &McConfig::new(2, 1), &PicardConfig { tol: 0.0, max_iter: 1 }).is_err());
        assert!(picard_solve(&p, &McConfig::new(2, 1), &PicardConfig { tol: 1.0, max_iter: 0 }).is_err());
    }
}
