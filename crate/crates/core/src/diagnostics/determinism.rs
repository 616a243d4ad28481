use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::report::{log_log_slope, CheckReport};
use crate::error::{Error, Result};
use crate::picard::gamma::Frozen;
use crate::picard::McConfig;
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::sde::noise::domain;
use crate::torus::SpaceTimeField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterminismStudy {
    pub paths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Across-seed sample variance, averaged over probe nodes, per path count.
    pub variances: Vec<f64>,
    pub slope: Option<f64>,
    /// Every estimate was identical across seeds.
    pub exact: bool,
}

impl DeterminismStudy {
    /// Slope within `[-1 - band, -1 + band]`; exact cases pass and are excluded from the fit.
    pub fn report(&self, band: f64) -> CheckReport {
        let stat = if self.exact { 0.0 } else { self.slope.map_or(f64::INFINITY, |s| (s + 1.0).abs()) };
        CheckReport::at_most("determinism", stat, band)
            .with_meta("paths", &self.paths)
            .with_meta("variances", &self.variances)
            .with_meta("slope", self.slope)
            .with_meta("exact", self.exact)
            .with_meta("seeds", self.seeds.len())
    }
}

/// Across-seed variance of the restart estimator of `y(t_j, θ_i)` at the
/// nodes `probes`, under the frozen `drift` (zero when absent), for each path
/// count in `paths`.
pub fn determinism_check<T: Real>(
    problem: &BurgersProblem<T>,
    drift: Option<&SpaceTimeField<T>>,
    slice: usize,
    probes: &[usize],
    paths: &[usize],
    seeds: &[u64],
) -> Result<DeterminismStudy> {
    if paths.len() < 2 || seeds.len() < 8 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 path counts and 8 seeds, got {} and {}",
            paths.len(),
            seeds.len()
        )));
    }
    if probes.is_empty() || slice >= problem.steps() {
        return Err(Error::InvalidArgument("need probe nodes and a slice before the horizon".into()));
    }
    let grid = problem.grid();
    let dim = grid.dim();
    if probes.iter().any(|&i| i >= grid.node_count()) {
        return Err(Error::InvalidArgument("probe node out of range".into()));
    }
    let zero;
    let drift = match drift {
        Some(d) => d,
        None => {
            zero = SpaceTimeField::zeros(problem.times().to_vec(), grid, dim)?;
            &zero
        }
    };
    let frozen = Frozen::new(drift, problem)?;
    let points: Vec<T> = grid.points();
    let tasks: Vec<(usize, u64, usize)> = paths
        .iter()
        .flat_map(|&m| seeds.iter().flat_map(move |&s| probes.iter().map(move |&p| (m, s, p))))
        .collect();
    let estimates: Vec<Vec<f64>> = tasks
        .par_iter()
        .map(|&(m, seed, node)| {
            let mc = McConfig::new(m, seed);
            let theta = &points[node * dim..(node + 1) * dim];
            frozen
                .estimate(slice, problem.steps(), &frozen.terminal, theta, &mc, (domain::RESTART, slice as u64, node as u64), None)
                .0
        })
        .collect();

    let per_m = seeds.len() * probes.len();
    let mut variances = Vec::with_capacity(paths.len());
    let mut exact = true;
    for block in estimates.chunks(per_m) {
        let mut var_sum = 0.0;
        for (p, _) in probes.iter().enumerate() {
            for a in 0..dim {
                let vals: Vec<f64> = (0..seeds.len()).map(|s| block[s * probes.len() + p][a]).collect();
                exact &= vals.iter().all(|v| *v == vals[0]);
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                var_sum += vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            }
        }
        variances.push(var_sum / (probes.len() * dim) as f64);
    }
    let slope = if exact {
        None
    } else {
        let x: Vec<f64> = paths.iter().map(|&m| m as f64).collect();
        log_log_slope(&x, &variances)
    };
    Ok(DeterminismStudy {
        paths: paths.to_vec(),
        seeds: seeds.to_vec(),
        variances,
        slope,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::torus::GridSpec;

    fn problem(h: Preset) -> BurgersProblem<f64> {
        BurgersProblem::from_presets(GridSpec::new(1, 16).unwrap(), &h, &Preset::Zero, 0.1, 0.5, 8).unwrap()
    }

    #[test]
    fn constant_data_is_exact() {
        let seeds: Vec<u64> = (0..8).collect();
        for h in [Preset::Zero, Preset::Constant { value: 0.3 }] {
            let s = determinism_check(&problem(h), None, 0, &[3], &[10, 40], &seeds).unwrap();
            assert!(s.exact && s.variances.iter().all(|&v| v == 0.0));
            assert!(s.report(0.3).pass);
        }
    }

    #[test]
    fn variance_scales_inversely_with_paths() {
        let seeds: Vec<u64> = (0..48).collect();
        let s = determinism_check(&problem(Preset::sine(0.5, 1)), None, 0, &[2, 9], &[50, 200, 800], &seeds).unwrap();
        assert!(s.report(0.3).pass, "{:?}", s.slope);
    }

    #[test]
    fn rejects_small_studies() {
        let p = problem(Preset::sine(0.5, 1));
        assert!(determinism_check(&p, None, 0, &[1], &[10], &[0; 8]).is_err());
        assert!(determinism_check(&p, None, 0, &[1], &[10, 20], &[0; 4]).is_err());
    }
}
