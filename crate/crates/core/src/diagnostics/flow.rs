//! Flow checks: consistency of the backward process with the field along
//! characteristics, invariance under relabelling of start points, and
//! regularity of the stochastic flow.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::report::{standardized, CheckReport};
use crate::error::{Error, Result};
use crate::picard::gamma::Frozen;
use crate::picard::McConfig;
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::sde::noise::{domain, sample_brownian, NoiseMode, NoiseSpec};
use crate::sde::{integrate_forward, integrate_tangent, CharacteristicEnsemble, TangentEnsemble};
use crate::torus::{compose, operator_norm, InterpMode, Interpolant, PeriodicField, SpaceTimeField};

/// Probe times of a flow-consistency run, as indices into the field's time grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeTimes {
    pub start: usize,
    pub probe: usize,
}

/// `y(u, Z_u^{t,e})` against a fresh restart estimate of
/// `E[h(Z_T) + Σ F Δr | Z_u]`, for one common-noise characteristic per probe.
///
/// `y_standard_error` (the solver's per-node error) is interpolated at `Z_u`
/// and combined with the restart error. The statistic is the largest
/// discrepancy in standard errors.
pub fn flow_consistency<T: Real>(
    y: &SpaceTimeField<T>,
    y_standard_error: Option<&SpaceTimeField<T>>,
    problem: &BurgersProblem<T>,
    at: ProbeTimes,
    probes: &[T],
    restart: &McConfig,
) -> Result<CheckReport> {
    restart.validate()?;
    let steps = problem.steps();
    let ProbeTimes { start, probe } = at;
    if start > probe || probe > steps {
        return Err(Error::InvalidArgument(format!(
            "need t <= u <= T, got slice indices {start} and {probe} of {steps}"
        )));
    }
    if y.times() != problem.times() {
        return Err(Error::ShapeMismatch("field must live on the problem's time grid".into()));
    }
    let dim = problem.grid().dim();
    if probes.is_empty() || probes.len() % dim != 0 {
        return Err(Error::ShapeMismatch("probe coordinates must be a non-empty multiple of the dimension".into()));
    }
    let count = probes.len() / dim;
    let noise = sample_brownian(&problem.times()[start..], 0..1, dim, 1, NoiseSpec::new(restart.seed, NoiseMode::Common))?;
    let chars = integrate_forward(y, problem.times()[start], probes, &noise, problem.nu())?;

    let frozen = Frozen::new(y, problem)?;
    let field = Interpolant::new(y.slice(probe), InterpMode::CubicSpline)?;
    let error_field = y_standard_error
        .map(|e| Interpolant::new(e.slice(probe), InterpMode::CubicSpline))
        .transpose()?;
    let mc = McConfig {
        mode: NoiseMode::Independent,
        ..*restart
    };

    let rows: Vec<(f64, f64, f64)> = (0..count)
        .into_par_iter()
        .map(|p| {
            let mut z = vec![T::zero(); dim];
            chars.position(0, p, probe - start, &mut z);
            let mut lhs = vec![T::zero(); dim];
            field.eval_into(&z, &mut lhs);
            let mut lhs_se = vec![T::zero(); dim];
            if let Some(e) = &error_field {
                e.eval_into(&z, &mut lhs_se);
            }
            let (rhs, rhs_se) = frozen.estimate(probe, steps, &frozen.terminal, &z, &mc, (domain::PROBE, probe as u64, p as u64), None);
            // Worst component.
            (0..dim)
                .map(|a| {
                    let d = lhs[a].as_f64() - rhs[a];
                    let se = (lhs_se[a].as_f64().abs().powi(2) + rhs_se[a].powi(2)).sqrt();
                    (standardized(d, se), d, se)
                })
                .fold((0.0, 0.0, 0.0), |acc, r| if r.0 >= acc.0 { r } else { acc })
        })
        .collect();
    let worst = rows.iter().copied().fold((0.0, 0.0, 0.0), |acc, r| if r.0 >= acc.0 { r } else { acc });
    Ok(CheckReport::at_most("flow_consistency", worst.0, 3.0)
        .with_standard_error(worst.2)
        .with_meta("discrepancies", rows.iter().map(|r| r.1).collect::<Vec<_>>())
        .with_meta("standard_errors", rows.iter().map(|r| r.2).collect::<Vec<_>>())
        .with_meta("t", problem.times()[start].as_f64())
        .with_meta("u", problem.times()[probe].as_f64())
        .with_meta("restart_paths", restart.paths)
        .with_meta("seed", restart.seed))
}

fn determinant(m: &mut [f64], d: usize) -> f64 {
    let mut det = 1.0;
    for c in 0..d {
        let pivot = (c..d).max_by(|&a, &b| m[a * d + c].abs().total_cmp(&m[b * d + c].abs())).unwrap();
        if m[pivot * d + c] == 0.0 {
            return 0.0;
        }
        if pivot != c {
            for k in 0..d {
                m.swap(c * d + k, pivot * d + k);
            }
            det = -det;
        }
        det *= m[c * d + c];
        for r in c + 1..d {
            let f = m[r * d + c] / m[c * d + c];
            for k in c..d {
                m[r * d + k] -= f * m[c * d + k];
            }
        }
    }
    det
}

/// Smallest forward-difference Jacobian determinant of `θ ↦ θ + shift(θ)` over the grid.
pub fn min_grid_jacobian<T: Real>(shift: &PeriodicField<T>) -> f64 {
    let grid = shift.grid();
    let d = grid.dim();
    let h = grid.spacing::<f64>();
    let mut worst = f64::INFINITY;
    let mut m = vec![0.0; d * d];
    let mut idx = vec![0usize; d];
    for node in 0..grid.node_count() {
        grid.multi_index(node, &mut idx);
        for b in 0..d {
            let mut next = idx.clone();
            next[b] = (next[b] + 1) % grid.points_per_axis();
            let there = shift.node(grid.node_index(&next));
            let here = shift.node(node);
            for a in 0..d {
                let delta = if a == b { 1.0 } else { 0.0 };
                m[a * d + b] = delta + (there[a].as_f64() - here[a].as_f64()) / h;
            }
        }
        worst = worst.min(determinant(&mut m, d));
    }
    worst
}

/// Relabelling invariance `Z^{t,ξ(e)} = Z^{t,e}∘ξ` for `ξ(θ) = θ + shift(θ)`.
///
/// Characteristics from the grid and from `ξ(grid)` share common noise; the
/// grid displacement field is spline-composed with `ξ` and compared with the
/// directly integrated one. The statistic is the largest normalized L₂
/// difference over paths and steps.
pub fn composition_law<T: Real>(
    y: &SpaceTimeField<T>,
    shift: &PeriodicField<T>,
    nu: T,
    start: usize,
    mc: &McConfig,
    tol: f64,
) -> Result<CheckReport> {
    let grid = y.grid();
    let dim = grid.dim();
    if shift.grid() != grid || shift.components() != dim {
        return Err(Error::ShapeMismatch("the relabelling must be a vector field on the solution grid".into()));
    }
    let jac = min_grid_jacobian(shift);
    if !(jac > 0.0) {
        return Err(Error::NotDiffeomorphism(format!("smallest grid Jacobian determinant is {jac}")));
    }
    if start >= y.times().len() - 1 {
        return Err(Error::InvalidArgument("start slice must precede the horizon".into()));
    }
    let grid_points: Vec<T> = grid.points();
    let mapped: Vec<T> = grid_points.iter().zip(shift.values()).map(|(&p, &s)| p + s).collect();
    let noise = sample_brownian(&y.times()[start..], 0..mc.paths, dim, 1, NoiseSpec::new(mc.seed, NoiseMode::Common))?;
    let t = y.times()[start];
    let from_grid = integrate_forward(y, t, &grid_points, &noise, nu)?;
    let from_mapped = integrate_forward(y, t, &mapped, &noise, nu)?;

    let steps = from_grid.steps();
    let nodes = grid.node_count();
    let per_path: Vec<f64> = (0..mc.paths)
        .into_par_iter()
        .map(|m| -> Result<f64> {
            let mut worst = 0.0f64;
            for r in 0..=steps {
                let disp: Vec<T> = (0..nodes).flat_map(|i| from_grid.displacement(m, i, r).to_vec()).collect();
                let composed = compose(&PeriodicField::new(grid, dim, disp)?, &mapped, InterpMode::CubicSpline)?;
                let mut sq = 0.0;
                for i in 0..nodes {
                    let direct = from_mapped.displacement(m, i, r);
                    for a in 0..dim {
                        sq += (direct[a].as_f64() - composed[i * dim + a].as_f64()).powi(2);
                    }
                }
                worst = worst.max((sq / (nodes * dim) as f64).sqrt());
            }
            Ok(worst)
        })
        .collect::<Result<_>>()?;
    let stat = per_path.iter().copied().fold(0.0, f64::max);
    Ok(CheckReport::at_most("composition_law", stat, tol)
        .with_meta("min_grid_jacobian", jac)
        .with_meta("points_per_axis", grid.points_per_axis())
        .with_meta("paths", mc.paths)
        .with_meta("seed", mc.seed))
}

/// Accumulated flow-regularity statistics; blocks of paths merge in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRegularity {
    pub times: Vec<f64>,
    pub paths: usize,
    /// Paths whose grid Jacobian stays positive at every node and step (1-D).
    pub positive_paths: usize,
    pub exponents: Vec<f64>,
    /// `Σ_paths mean_nodes ‖∇Z‖^p`, per exponent and time.
    moment_sums: Vec<Vec<f64>>,
}

impl FlowRegularity {
    pub fn positivity_fraction(&self) -> f64 {
        if self.paths == 0 {
            return f64::NAN;
        }
        self.positive_paths as f64 / self.paths as f64
    }

    /// `E mean_nodes ‖∇Z_s‖^p` per exponent and time.
    pub fn moments(&self) -> Vec<Vec<f64>> {
        self.moment_sums
            .iter()
            .map(|row| row.iter().map(|s| s / self.paths as f64).collect())
            .collect()
    }

    pub fn merge(&mut self, other: &FlowRegularity) -> Result<()> {
        if self.times != other.times || self.exponents != other.exponents {
            return Err(Error::ShapeMismatch("flow statistics from different setups".into()));
        }
        self.paths += other.paths;
        self.positive_paths += other.positive_paths;
        for (a, b) in self.moment_sums.iter_mut().zip(&other.moment_sums) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        Ok(())
    }

    /// Passes when the fraction of non-monotone paths is at most `max_failure`.
    pub fn report(&self, max_failure: f64) -> CheckReport {
        let moments = self.moments();
        let running_max: Vec<Vec<f64>> = moments
            .iter()
            .map(|row| {
                row.iter()
                    .scan(0.0f64, |m, v| {
                        *m = m.max(*v);
                        Some(*m)
                    })
                    .collect()
            })
            .collect();
        CheckReport::at_most("flow_regularity", 1.0 - self.positivity_fraction(), max_failure)
            .with_meta("paths", self.paths)
            .with_meta("positivity_fraction", self.positivity_fraction())
            .with_meta("exponents", &self.exponents)
            .with_meta("moments", &moments)
            .with_meta("moment_running_max", running_max)
    }
}

/// Jacobian positivity and moments of `‖∇Z‖`. In 1-D positivity comes from
/// grid differences of flows started at every node; in higher dimensions
/// from the determinant of the tangent flow, which is then required.
pub fn flow_regularity<T: Real>(
    chars: &CharacteristicEnsemble<T>,
    tangent: Option<&TangentEnsemble<T>>,
    exponents: &[f64],
) -> Result<FlowRegularity> {
    let dim = chars.dim();
    let steps = chars.steps();
    let starts = chars.start_count();
    let paths = chars.path_count();
    let on_grid = dim == 1 && {
        let h = std::f64::consts::TAU / starts as f64;
        chars
            .start_points()
            .iter()
            .enumerate()
            .all(|(i, s)| (s.as_f64() - i as f64 * h).abs() <= 1e-12)
    };
    if dim == 1 && !on_grid {
        return Err(Error::InvalidArgument("1-D positivity needs characteristics started at every grid node in order".into()));
    }
    let positive_paths = if dim == 1 {
        (0..paths)
            .into_par_iter()
            .filter(|&m| {
                (0..=steps).all(|r| {
                    let pos = |i: usize| chars.start_points()[i] + chars.displacement(m, i, r)[0];
                    (0..starts).all(|i| {
                        let next = if i + 1 == starts { pos(0) + T::of(std::f64::consts::TAU) } else { pos(i + 1) };
                        next > pos(i)
                    })
                })
            })
            .count()
    } else {
        let tan = tangent.ok_or_else(|| Error::InvalidArgument("positivity in several dimensions needs the tangent flow".into()))?;
        (0..paths)
            .into_par_iter()
            .filter(|&m| {
                let mut buf = vec![0.0; dim * dim];
                (0..=steps).all(|r| {
                    (0..starts).all(|i| {
                        for (b, v) in buf.iter_mut().zip(tan.jacobian(m, i, r)) {
                            *b = v.as_f64();
                        }
                        determinant(&mut buf, dim) > 0.0
                    })
                })
            })
            .count()
    };
    let moment_sums = match tangent {
        None => vec![vec![0.0; steps + 1]; exponents.len()],
        Some(tan) => {
            if tan.path_count() != paths || tan.start_count() != starts || tan.steps() != steps || tan.dim() != dim {
                return Err(Error::ShapeMismatch("tangent and characteristic ensembles differ".into()));
            }
            let per_path: Vec<Vec<Vec<f64>>> = (0..paths)
                .into_par_iter()
                .map(|m| {
                    exponents
                        .iter()
                        .map(|&p| {
                            (0..=steps)
                                .map(|r| {
                                    (0..starts)
                                        .map(|i| operator_norm(tan.jacobian(m, i, r), dim).as_f64().powf(p))
                                        .sum::<f64>()
                                        / starts as f64
                                })
                                .collect()
                        })
                        .collect()
                })
                .collect();
            let mut sums = vec![vec![0.0; steps + 1]; exponents.len()];
            for path in &per_path {
                for (row, add) in sums.iter_mut().zip(path) {
                    for (x, y) in row.iter_mut().zip(add) {
                        *x += y;
                    }
                }
            }
            sums
        }
    };
    Ok(FlowRegularity {
        times: chars.times().iter().map(|t| t.as_f64()).collect(),
        paths,
        positive_paths,
        exponents: exponents.to_vec(),
        moment_sums,
    })
}

/// [`flow_regularity`] for `mc.paths` common-noise flows from `(t_start, grid)`,
/// generated and reduced in blocks of `block` paths to bound memory.
pub fn flow_regularity_mc<T: Real>(
    y: &SpaceTimeField<T>,
    nu: T,
    start: usize,
    mc: &McConfig,
    exponents: &[f64],
    block: usize,
) -> Result<FlowRegularity> {
    mc.validate()?;
    if block == 0 {
        return Err(Error::InvalidArgument("block size must be positive".into()));
    }
    let grid = y.grid();
    let points: Vec<T> = grid.points();
    let times = &y.times()[start..];
    let mut total: Option<FlowRegularity> = None;
    for first in (0..mc.paths).step_by(block) {
        let range = first..(first + block).min(mc.paths);
        let noise = sample_brownian(times, range, grid.dim(), 1, NoiseSpec::new(mc.seed, NoiseMode::Common))?;
        let chars = integrate_forward(y, times[0], &points, &noise, nu)?;
        let tangent = if exponents.is_empty() { None } else { Some(integrate_tangent(y, &chars)?) };
        let part = flow_regularity(&chars, tangent.as_ref(), exponents)?;
        match &mut total {
            None => total = Some(part),
            Some(t) => t.merge(&part)?,
        }
    }
    Ok(total.expect("at least one block"))
}

/// Tangent flow against central differences of common-noise characteristics
/// started at `x ± eps·e_b`. The statistic is the largest relative error
/// `‖J_fd - J‖ / ‖J‖` (Frobenius) over paths, starts and steps.
pub fn tangent_consistency<T: Real>(
    y: &SpaceTimeField<T>,
    nu: T,
    start: usize,
    starts: &[T],
    eps: T,
    noise_times: &[T],
    mc: &McConfig,
    tol: f64,
) -> Result<CheckReport> {
    let dim = y.grid().dim();
    if starts.is_empty() || starts.len() % dim != 0 {
        return Err(Error::ShapeMismatch("start points must be a non-empty multiple of the dimension".into()));
    }
    if !(eps > T::zero()) {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let t = y.times()[start];
    let noise = sample_brownian(noise_times, 0..mc.paths, dim, 1, NoiseSpec::new(mc.seed, NoiseMode::Common))?;
    let base = integrate_forward(y, t, starts, &noise, nu)?;
    let tangent = integrate_tangent(y, &base)?;
    let count = starts.len() / dim;
    let shifted = |b: usize, sign: T| -> Result<CharacteristicEnsemble<T>> {
        let pts: Vec<T> = starts
            .iter()
            .enumerate()
            .map(|(k, &x)| if k % dim == b { x + sign * eps } else { x })
            .collect();
        integrate_forward(y, t, &pts, &noise, nu)
    };
    let mut worst = 0.0f64;
    for b in 0..dim {
        let plus = shifted(b, T::one())?;
        let minus = shifted(b, -T::one())?;
        for m in 0..mc.paths {
            for i in 0..count {
                for r in 0..=base.steps() {
                    let jac = tangent.jacobian(m, i, r);
                    let (dp, dm) = (plus.displacement(m, i, r), minus.displacement(m, i, r));
                    let mut num = 0.0;
                    let mut den = 0.0;
                    for a in 0..dim {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let fd = delta + (dp[a] - dm[a]).as_f64() / (2.0 * eps.as_f64());
                        let j = jac[a * dim + b].as_f64();
                        num += (fd - j).powi(2);
                        den += j * j;
                    }
                    worst = worst.max((num / den.max(f64::MIN_POSITIVE)).sqrt());
                }
            }
        }
    }
    Ok(CheckReport::at_most("tangent_consistency", worst, tol)
        .with_meta("eps", eps.as_f64())
        .with_meta("paths", mc.paths)
        .with_meta("seed", mc.seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::torus::GridSpec;

    fn problem(h: Preset, n: usize) -> BurgersProblem<f64> {
        BurgersProblem::from_presets(GridSpec::new(1, n).unwrap(), &h, &Preset::Zero, 0.1, 0.5, 8).unwrap()
    }

    fn frozen_field(p: &BurgersProblem<f64>, preset: &Preset) -> SpaceTimeField<f64> {
        preset.sample_in_time(p.grid(), p.times().to_vec()).unwrap()
    }

    fn shift(n: usize, a: f64) -> PeriodicField<f64> {
        PeriodicField::<f64>::from_fn(GridSpec::new(1, n).unwrap(), 1, |x, o| o[0] = a * x[0].sin()).unwrap()
    }

    #[test]
    fn consistency_is_exact_on_constants() {
        for h in [Preset::Zero, Preset::Constant { value: 0.4 }] {
            let p = problem(h.clone(), 16);
            let y = frozen_field(&p, &h);
            let probes = [0.3, 1.1, 2.0, 4.4, 6.0];
            let r = flow_consistency(&y, None, &p, ProbeTimes { start: 0, probe: 4 }, &probes, &McConfig::new(64, 2)).unwrap();
            assert_eq!(r.statistic, 0.0);
            assert!(r.pass);
        }
    }

    #[test]
    fn consistency_rejects_reversed_times() {
        let p = problem(Preset::Zero, 16);
        let y = frozen_field(&p, &Preset::Zero);
        assert!(flow_consistency(&y, None, &p, ProbeTimes { start: 5, probe: 2 }, &[0.1], &McConfig::new(4, 1)).is_err());
    }

    #[test]
    fn composition_degenerate_cases_are_exact() {
        let p = problem(Preset::Zero, 16);
        let drift = frozen_field(&p, &Preset::sine(0.5, 1));
        let mc = McConfig::new(3, 7);
        let r = composition_law(&drift, &shift(16, 0.0), 0.1, 0, &mc, 0.0).unwrap();
        assert_eq!(r.statistic, 0.0);
        let zero = frozen_field(&p, &Preset::Zero);
        let r = composition_law(&zero, &shift(16, 0.3), 0.1, 2, &mc, 0.0).unwrap();
        assert_eq!(r.statistic, 0.0);
    }

    #[test]
    fn composition_rejects_folds_and_refines() {
        let p = problem(Preset::Zero, 16);
        let drift = frozen_field(&p, &Preset::sine(0.5, 1));
        let mc = McConfig::new(2, 7);
        assert!(matches!(
            composition_law(&drift, &shift(16, 1.5), 0.1, 0, &mc, 1.0),
            Err(Error::NotDiffeomorphism(_))
        ));
        let coarse = composition_law(&drift, &shift(16, 0.3), 0.1, 0, &mc, 1.0).unwrap().statistic;
        let p2 = problem(Preset::Zero, 32);
        let fine = composition_law(&frozen_field(&p2, &Preset::sine(0.5, 1)), &shift(32, 0.3), 0.1, 0, &mc, 1.0)
            .unwrap()
            .statistic;
        assert!(coarse > 0.0 && fine < coarse, "{coarse} {fine}");
    }

    #[test]
    fn grid_jacobian_in_two_dimensions() {
        let g = GridSpec::new(2, 8).unwrap();
        let id = PeriodicField::<f64>::zeros(g, 2);
        assert!((min_grid_jacobian(&id) - 1.0).abs() < 1e-14);
        let fold = PeriodicField::<f64>::from_fn(g, 2, |x, o| {
            o[0] = 2.0 * x[0].sin();
            o[1] = 0.0;
        })
        .unwrap();
        assert!(min_grid_jacobian(&fold) < 0.0);
    }

    #[test]
    fn regularity_of_translations() {
        for drift in [Preset::Zero, Preset::Constant { value: 0.7 }] {
            let p = problem(Preset::Zero, 16);
            let y = frozen_field(&p, &drift);
            let stats = flow_regularity_mc(&y, 0.1, 0, &McConfig::new(10, 3), &[1.0, 2.0], 4).unwrap();
            assert_eq!(stats.paths, 10);
            assert_eq!(stats.positivity_fraction(), 1.0);
            for row in stats.moments() {
                assert!(row.iter().all(|&m| (m - 1.0).abs() < 1e-12));
            }
            assert!(stats.report(0.0).pass);
        }
    }

    #[test]
    fn block_size_does_not_change_results() {
        let p = problem(Preset::Zero, 16);
        let y = frozen_field(&p, &Preset::sine(0.6, 1));
        let a = flow_regularity_mc(&y, 0.1, 0, &McConfig::new(12, 3), &[2.0], 5).unwrap();
        let b = flow_regularity_mc(&y, 0.1, 0, &McConfig::new(12, 3), &[2.0], 12).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_eq!(a.positive_paths, b.positive_paths);
        for (ra, rb) in a.moments().iter().zip(b.moments()) {
            for (x, y) in ra.iter().zip(rb) {
                assert!((x - y).abs() <= 1e-12 * x.abs());
            }
        }
    }

    #[test]
    fn tangent_matches_differences() {
        let p = problem(Preset::Zero, 32);
        let y = frozen_field(&p, &Preset::sine(0.5, 1));
        let times = SpaceTimeField::uniform_times(0.0, 0.5, 64).unwrap();
        let r = tangent_consistency(&y, 0.1, 0, &[0.4, 2.5], 1e-5, &times, &McConfig::new(2, 9), 1e-2).unwrap();
        assert!(r.pass, "{}", r.statistic);
    }
}
