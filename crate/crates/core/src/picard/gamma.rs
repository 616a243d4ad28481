//! One application of the contraction map: Feynman–Kac restarts under a
//! frozen drift.
//!
//! For every grid time `t_j` and node `θ_i`, `M` characteristics
//! `Z_{r+1} = Z_r + y_k(t_r, Z_r)Δt_r + √(2ν)ΔW_r` are launched from
//! `(t_j, θ_i)` and the new value is the sample mean of
//! `h(Z_T) + Σ_r F(t_r, Z_r)Δt_r`. With a restart stride `c > 1` only
//! slices `j ≡ 0 (mod c)` are restarted to the horizon; the others use the
//! flow identity over one step, `y(t_j, θ) = E[y(t_{j+1}, Z_{t_{j+1}}) + F Δt]`,
//! against the slice just computed.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BurgersProblem;
use crate::scalar::Real;
use crate::sde::noise::{domain, sample_brownian, BrownianEnsemble, NoiseMode, NoiseSpec, NormalStream};
use crate::torus::{InterpMode, Interpolant, PeriodicField, SpaceTimeField, Spectral};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub paths: usize,
    pub seed: u64,
    pub mode: NoiseMode,
    pub antithetic: bool,
    /// Restart to the horizon only from every `restart_stride`-th slice.
    pub restart_stride: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            paths: 2000,
            seed: 0,
            mode: NoiseMode::Independent,
            antithetic: false,
            restart_stride: 1,
        }
    }
}

impl McConfig {
    pub fn new(paths: usize, seed: u64) -> Self {
        Self {
            paths,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(Error::InvalidArgument("Monte Carlo needs at least one path".into()));
        }
        if self.antithetic && self.paths % 2 != 0 {
            return Err(Error::InvalidArgument("antithetic sampling needs an even path count".into()));
        }
        if self.restart_stride == 0 {
            return Err(Error::InvalidArgument("restart stride must be >= 1".into()));
        }
        Ok(())
    }

    fn spec(&self) -> NoiseSpec {
        NoiseSpec::new(self.seed, self.mode).with_antithetic(self.antithetic)
    }
}

/// The image of one map application plus the per-node Monte Carlo standard error.
#[derive(Debug, Clone)]
pub struct GammaImage<T> {
    pub field: SpaceTimeField<T>,
    /// Standard error of the last sample mean at each node. For flow-identity
    /// slices this is the one-step error only.
    pub standard_error: SpaceTimeField<T>,
}

/// Paths stepped together in the scalar sampler.
const BLOCK: usize = 16;

/// Running sample statistics in `f64`.
#[derive(Clone)]
pub(crate) struct Moments {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    count: usize,
    first: Vec<f64>,
    all_equal: bool,
}

impl Moments {
    pub(crate) fn new(components: usize) -> Self {
        Self {
            sum: vec![0.0; components],
            sum_sq: vec![0.0; components],
            count: 0,
            first: Vec::new(),
            all_equal: true,
        }
    }

    pub(crate) fn push<T: Real>(&mut self, v: &[T]) {
        if self.count == 0 {
            self.first = v.iter().map(|x| x.as_f64()).collect();
        } else if self.all_equal {
            self.all_equal = v.iter().zip(&self.first).all(|(x, f)| x.as_f64() == *f);
        }
        for (c, x) in v.iter().enumerate() {
            let x = x.as_f64();
            self.sum[c] += x;
            self.sum_sq[c] += x * x;
        }
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &Moments) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = other.clone();
            return;
        }
        self.all_equal = self.all_equal && other.all_equal && self.first == other.first;
        for c in 0..self.sum.len() {
            self.sum[c] += other.sum[c];
            self.sum_sq[c] += other.sum_sq[c];
        }
        self.count += other.count;
    }

    /// Identical samples give their common value back without rounding.
    pub(crate) fn mean(&self) -> Vec<f64> {
        if self.all_equal {
            return self.first.clone();
        }
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }

    /// Standard error of the mean; zero when fewer than two samples.
    pub(crate) fn standard_error(&self) -> Vec<f64> {
        let n = self.count as f64;
        self.sum
            .iter()
            .zip(&self.sum_sq)
            .map(|(s, q)| {
                if self.count < 2 || self.all_equal {
                    return 0.0;
                }
                let var = ((q - s * s / n) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect()
    }
}

/// Sample moments over paths, folding antithetic pairs into their means
/// since the two halves of a pair are not independent.
#[derive(Clone)]
pub(crate) struct Accumulator<T> {
    pub(crate) moments: Moments,
    pair: Vec<T>,
    antithetic: bool,
}

impl<T: Real> Accumulator<T> {
    pub(crate) fn new(dim: usize, antithetic: bool) -> Self {
        Self {
            moments: Moments::new(dim),
            pair: vec![T::zero(); dim],
            antithetic,
        }
    }

    pub(crate) fn push(&mut self, path: usize, value: &[T]) {
        if !self.antithetic {
            self.moments.push(value);
            return;
        }
        if path % 2 == 0 {
            self.pair.copy_from_slice(value);
            return;
        }
        for (p, v) in self.pair.iter_mut().zip(value) {
            *p = (*p + *v) * T::of(0.5);
        }
        self.moments.push(&self.pair);
    }
}

pub(crate) enum Noise<'a, T> {
    Stream(&'a mut NormalStream, &'a [f64]),
    Path(&'a [T]),
}

impl<T: Real> Noise<'_, T> {
    #[inline(always)]
    fn increment(&mut self, step: usize, component: usize, dim: usize) -> T {
        match self {
            Noise::Stream(s, sqrt_dt) => T::of(sqrt_dt[step] * s.next_normal()),
            Noise::Path(p) => p[step * dim + component],
        }
    }
}

/// Per-slice interpolants of the frozen drift and of the data.
pub(crate) struct Frozen<T> {
    pub times: Vec<T>,
    pub sqrt_dt: Vec<f64>,
    pub drift: Vec<Interpolant<T>>,
    pub forcing: Option<Vec<Interpolant<T>>>,
    pub terminal: Interpolant<T>,
    pub diffusion: T,
    pub dim: usize,
}

impl<T: Real> Frozen<T> {
    pub(crate) fn new(drift: &SpaceTimeField<T>, problem: &BurgersProblem<T>) -> Result<Self> {
        let spectral = Spectral::new(problem.grid());
        let mode = InterpMode::CubicSpline;
        let drift_i = drift
            .slices()
            .iter()
            .map(|s| Interpolant::with_spectral(s, mode, &spectral))
            .collect::<Result<Vec<_>>>()?;
        let forcing = if problem.is_unforced() {
            None
        } else {
            Some(
                problem
                    .forcing()
                    .slices()
                    .iter()
                    .map(|s| Interpolant::with_spectral(s, mode, &spectral))
                    .collect::<Result<Vec<_>>>()?,
            )
        };
        let times = problem.times().to_vec();
        Ok(Self {
            sqrt_dt: times.windows(2).map(|w| (w[1] - w[0]).as_f64().sqrt()).collect(),
            times,
            drift: drift_i,
            forcing,
            terminal: Interpolant::with_spectral(problem.terminal(), mode, &spectral)?,
            diffusion: (T::of(2.0) * problem.nu()).sqrt(),
            dim: problem.grid().dim(),
        })
    }

    /// Runs one characteristic from `(t_from, theta)` to `t_to` and writes
    /// `end(Z_{t_to}) + Σ F(t_r, Z_r)Δt_r` into `out`.
    #[inline]
    pub(crate) fn sample(&self, from: usize, to: usize, end: &Interpolant<T>, theta: &[T], noise: &mut Noise<'_, T>, out: &mut [T]) {
        let dim = self.dim;
        if dim == 1 {
            let mut z = theta[0];
            let mut acc = T::zero();
            for r in from..to {
                let dt = self.times[r + 1] - self.times[r];
                if let Some(f) = &self.forcing {
                    acc += f[r].eval_scalar_1d(z) * dt;
                }
                let v = self.drift[r].eval_scalar_1d(z);
                z = z + v * dt + self.diffusion * noise.increment(r, 0, 1);
            }
            out[0] = end.eval_scalar_1d(z) + acc;
            return;
        }
        let mut z = [T::zero(); 8];
        let mut v = [T::zero(); 8];
        let mut acc = [T::zero(); 8];
        z[..dim].copy_from_slice(theta);
        for r in from..to {
            let dt = self.times[r + 1] - self.times[r];
            if let Some(f) = &self.forcing {
                f[r].eval_into(&z[..dim], &mut v[..dim]);
                for a in 0..dim {
                    acc[a] += v[a] * dt;
                }
            }
            self.drift[r].eval_into(&z[..dim], &mut v[..dim]);
            for a in 0..dim {
                z[a] = z[a] + v[a] * dt + self.diffusion * noise.increment(r, a, dim);
            }
        }
        end.eval_into(&z[..dim], out);
        for a in 0..dim {
            out[a] += acc[a];
        }
    }

    /// Scalar version of [`Self::sample`] for the consecutive paths
    /// `first..first + out.len()`, stepped together so their arithmetic
    /// overlaps. Each path sees exactly the operations of `sample`.
    #[allow(clippy::too_many_arguments)]
    fn sample_block_1d(
        &self,
        from: usize,
        to: usize,
        end: &Interpolant<T>,
        theta: T,
        mc: &McConfig,
        key: (u64, u64, u64),
        first: usize,
        out: &mut [T],
    ) {
        let len = out.len();
        let mut streams: [Option<NormalStream>; BLOCK] = Default::default();
        for (b, s) in streams[..len].iter_mut().enumerate() {
            *s = Some(NormalStream::new(mc.seed, key.0, key.1, key.2, (first + b) as u64, mc.antithetic));
        }
        let mut z = [theta; BLOCK];
        let mut acc = [T::zero(); BLOCK];
        for r in from..to {
            let dt = self.times[r + 1] - self.times[r];
            let drift = &self.drift[r];
            for b in 0..len {
                if let Some(f) = &self.forcing {
                    acc[b] += f[r].eval_scalar_1d(z[b]) * dt;
                }
                let v = drift.eval_scalar_1d(z[b]);
                let dw = T::of(self.sqrt_dt[r] * streams[b].as_mut().unwrap().next_normal());
                z[b] = z[b] + v * dt + self.diffusion * dw;
            }
        }
        for b in 0..len {
            out[b] = end.eval_scalar_1d(z[b]) + acc[b];
        }
    }

    /// Sample mean and standard error over `mc.paths` restarts.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn estimate(
        &self,
        from: usize,
        to: usize,
        end: &Interpolant<T>,
        theta: &[T],
        mc: &McConfig,
        key: (u64, u64, u64),
        common: Option<&BrownianEnsemble<T>>,
    ) -> (Vec<f64>, Vec<f64>) {
        let dim = self.dim;
        let mut acc = Accumulator::new(dim, mc.antithetic);
        if dim == 1 && common.is_none() {
            let mut block = [T::zero(); BLOCK];
            for first in (0..mc.paths).step_by(BLOCK) {
                let len = BLOCK.min(mc.paths - first);
                self.sample_block_1d(from, to, end, theta[0], mc, key, first, &mut block[..len]);
                for (b, v) in block[..len].iter().enumerate() {
                    acc.push(first + b, std::slice::from_ref(v));
                }
            }
        } else {
            let mut value = vec![T::zero(); dim];
            for m in 0..mc.paths {
                let mut stream;
                let mut noise = match common {
                    Some(e) => Noise::Path(e.increments(m, 0)),
                    None => {
                        stream = NormalStream::new(mc.seed, key.0, key.1, key.2, m as u64, mc.antithetic);
                        Noise::Stream(&mut stream, &self.sqrt_dt)
                    }
                };
                self.sample(from, to, end, theta, &mut noise, &mut value);
                acc.push(m, &value);
            }
        }
        (acc.moments.mean(), acc.moments.standard_error())
    }
}

fn common_ensemble<T: Real>(problem: &BurgersProblem<T>, mc: &McConfig) -> Result<Option<BrownianEnsemble<T>>> {
    match mc.mode {
        NoiseMode::Common => Ok(Some(sample_brownian(problem.times(), 0..mc.paths, problem.grid().dim(), 1, mc.spec())?)),
        NoiseMode::Independent => Ok(None),
    }
}

fn assemble<T: Real>(
    problem: &BurgersProblem<T>,
    j: usize,
    results: Vec<(Vec<f64>, Vec<f64>)>,
) -> Result<(PeriodicField<T>, PeriodicField<T>)> {
    let dim = problem.grid().dim();
    let mut values = Vec::with_capacity(results.len() * dim);
    let mut errors = Vec::with_capacity(results.len() * dim);
    for (node, (mean, se)) in results.into_iter().enumerate() {
        if mean.iter().chain(&se).any(|v| !v.is_finite()) {
            return Err(Error::MonteCarloNonFinite { time_index: j, node });
        }
        values.extend(mean.into_iter().map(T::of));
        errors.extend(se.into_iter().map(T::of));
    }
    Ok((
        PeriodicField::new(problem.grid(), dim, values)?,
        PeriodicField::new(problem.grid(), dim, errors)?,
    ))
}

/// Paths per parallel task in the one-step fill; fixed so the summation order
/// does not depend on the thread count.
const FILL_CHUNK: usize = 64;

/// One-step estimates at every node of slice `j`. Each path draws one stream
/// keyed by the slice and consumes it node by node.
fn fill_independent<T: Real>(
    frozen: &Frozen<T>,
    j: usize,
    next: &Interpolant<T>,
    points: &[T],
    mc: &McConfig,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let dim = frozen.dim;
    let nodes = points.len() / dim;
    let starts: Vec<usize> = (0..mc.paths).step_by(FILL_CHUNK).collect();
    let partial: Vec<Vec<Accumulator<T>>> = starts
        .par_iter()
        .map(|&first| {
            let mut accs = vec![Accumulator::new(dim, mc.antithetic); nodes];
            let mut value = vec![T::zero(); dim];
            for m in first..(first + FILL_CHUNK).min(mc.paths) {
                let mut stream = NormalStream::new(mc.seed, domain::FILL, j as u64, 0, m as u64, mc.antithetic);
                for (i, acc) in accs.iter_mut().enumerate() {
                    let mut noise = Noise::Stream(&mut stream, &frozen.sqrt_dt);
                    frozen.sample(j, j + 1, next, &points[i * dim..(i + 1) * dim], &mut noise, &mut value);
                    acc.push(m, &value);
                }
            }
            accs
        })
        .collect();
    (0..nodes)
        .map(|i| {
            let mut total = Moments::new(dim);
            for chunk in &partial {
                total.merge(&chunk[i].moments);
            }
            (total.mean(), total.standard_error())
        })
        .collect()
}

/// `Γ(y_k)` on the full time grid of `problem`.
pub fn gamma_map<T: Real>(drift: &SpaceTimeField<T>, problem: &BurgersProblem<T>, mc: &McConfig) -> Result<SpaceTimeField<T>> {
    Ok(gamma_map_detailed(drift, problem, mc)?.field)
}

pub fn gamma_map_detailed<T: Real>(
    drift: &SpaceTimeField<T>,
    problem: &BurgersProblem<T>,
    mc: &McConfig,
) -> Result<GammaImage<T>> {
    mc.validate()?;
    if drift.times() != problem.times() || drift.grid() != problem.grid() || drift.components() != problem.grid().dim() {
        return Err(Error::ShapeMismatch("drift must live on the problem's space-time grid".into()));
    }
    let frozen = Frozen::new(drift, problem)?;
    let common = common_ensemble(problem, mc)?;
    let grid = problem.grid();
    let dim = grid.dim();
    let steps = problem.steps();
    let nodes = grid.node_count();
    let points: Vec<T> = grid.points();
    let stride = mc.restart_stride;

    // Full restarts to the horizon, independent across (slice, node).
    let restart_slices: Vec<usize> = (0..steps).filter(|j| j % stride == 0).collect();
    let tasks: Vec<(usize, usize)> = restart_slices
        .iter()
        .flat_map(|&j| (0..nodes).map(move |i| (j, i)))
        .collect();
    let results: Vec<(Vec<f64>, Vec<f64>)> = tasks
        .par_iter()
        .map(|&(j, i)| {
            let key = match mc.mode {
                NoiseMode::Independent => (domain::RESTART, j as u64, i as u64),
                NoiseMode::Common => (domain::ENSEMBLE, 0, 0),
            };
            frozen.estimate(j, steps, &frozen.terminal, &points[i * dim..(i + 1) * dim], mc, key, common.as_ref())
        })
        .collect();

    let mut slices: Vec<Option<PeriodicField<T>>> = vec![None; steps + 1];
    let mut errors: Vec<Option<PeriodicField<T>>> = vec![None; steps + 1];
    slices[steps] = Some(problem.terminal().clone());
    errors[steps] = Some(PeriodicField::zeros(grid, dim));
    for (chunk, &j) in results.chunks(nodes).zip(&restart_slices) {
        let (v, e) = assemble(problem, j, chunk.to_vec())?;
        slices[j] = Some(v);
        errors[j] = Some(e);
    }

    // Remaining slices from the flow identity over one step, newest first.
    let spectral = Spectral::new(grid);
    for j in (0..steps).rev().filter(|j| j % stride != 0) {
        let next = Interpolant::with_spectral(slices[j + 1].as_ref().expect("later slice filled"), InterpMode::CubicSpline, &spectral)?;
        let results = match &common {
            None => fill_independent(&frozen, j, &next, &points, mc),
            Some(ensemble) => (0..nodes)
                .into_par_iter()
                .map(|i| {
                    frozen.estimate(j, j + 1, &next, &points[i * dim..(i + 1) * dim], mc, (domain::ENSEMBLE, 0, 0), Some(ensemble))
                })
                .collect(),
        };
        let (v, e) = assemble(problem, j, results)?;
        slices[j] = Some(v);
        errors[j] = Some(e);
    }

    let times = problem.times().to_vec();
    Ok(GammaImage {
        field: SpaceTimeField::new(times.clone(), slices.into_iter().map(Option::unwrap).collect())?,
        standard_error: SpaceTimeField::new(times, errors.into_iter().map(Option::unwrap).collect())?,
    })
}
