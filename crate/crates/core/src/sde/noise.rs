//! Brownian increments from counter-keyed streams.
//!
//! Every stream is addressed by `(seed, domain, a, b, path)`: the ChaCha key
//! holds the first four words and the stream id holds the path. Draws along a
//! stream are consumed step by step, component by component, so a given
//! increment depends only on its address and never on scheduling.

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// One Brownian path per sample, shared by every start point.
    Common,
    /// A separate Brownian path per sample and start point.
    #[default]
    Independent,
}

/// Stream domains, so different consumers never share draws.
pub mod domain {
    pub const ENSEMBLE: u64 = 0x454e_5345_4d42;
    pub const RESTART: u64 = 0x5245_5354_4152;
    pub const FILL: u64 = 0x4649_4c4c;
    pub const PROBE: u64 = 0x0050_524f_4245;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub seed: u64,
    pub mode: NoiseMode,
    /// Odd paths reuse the stream of the preceding even path with the sign flipped.
    pub antithetic: bool,
}

impl NoiseSpec {
    pub fn new(seed: u64, mode: NoiseMode) -> Self {
        Self {
            seed,
            mode,
            antithetic: false,
        }
    }

    pub fn with_antithetic(mut self, on: bool) -> Self {
        self.antithetic = on;
        self
    }
}

/// Standard normal draws along one addressed stream.
pub struct NormalStream {
    rng: ChaCha8Rng,
    sign: f64,
}

impl NormalStream {
    pub fn new(seed: u64, domain: u64, a: u64, b: u64, path: u64, antithetic: bool) -> Self {
        let (stream, sign) = if antithetic {
            (path / 2, if path % 2 == 1 { -1.0 } else { 1.0 })
        } else {
            (path, 1.0)
        };
        let mut key = [0u8; 32];
        for (chunk, word) in key.chunks_exact_mut(8).zip([seed, domain, a, b]) {
            chunk.copy_from_slice(&word.to_le_bytes());
        }
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(stream);
        Self { rng, sign }
    }

    #[inline(always)]
    pub fn next_normal(&mut self) -> f64 {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        self.sign * z
    }

    /// Fills `out` with `√dt · N(0,1)` draws.
    #[inline]
    pub fn fill_increments<T: Real>(&mut self, sqrt_dt: f64, out: &mut [T]) {
        for o in out {
            *o = T::of(sqrt_dt * self.next_normal());
        }
    }
}

/// Sampled increments `ΔW` for a block of paths on a time grid.
///
/// Layout is `[path][channel][step][component]`; common mode has a single
/// channel, independent mode one channel per start point.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEnsemble<T> {
    times: Vec<T>,
    dim: usize,
    paths: Range<usize>,
    channels: usize,
    spec: NoiseSpec,
    increments: Vec<T>,
}

/// Draws increments with variance `Δt_j` for paths `paths` (absolute indices,
/// so ensembles can be generated in blocks).
pub fn sample_brownian<T: Real>(
    times: &[T],
    paths: Range<usize>,
    dim: usize,
    starts: usize,
    spec: NoiseSpec,
) -> Result<BrownianEnsemble<T>> {
    if times.len() < 2 {
        return Err(Error::InvalidArgument("time grid needs at least two points".into()));
    }
    ensure_finite(times, "time grid")?;
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be strictly increasing".into()));
    }
    if paths.is_empty() {
        return Err(Error::InvalidArgument("need at least one path".into()));
    }
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let channels = match spec.mode {
        NoiseMode::Common => 1,
        NoiseMode::Independent => starts.max(1),
    };
    let steps = times.len() - 1;
    let sqrt_dt: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]).as_f64().sqrt()).collect();
    let per_channel = steps * dim;
    let mut increments = vec![T::zero(); paths.len() * channels * per_channel];
    for (local, path) in paths.clone().enumerate() {
        for ch in 0..channels {
            let mut stream = NormalStream::new(spec.seed, domain::ENSEMBLE, ch as u64, 0, path as u64, spec.antithetic);
            let base = (local * channels + ch) * per_channel;
            for (j, sdt) in sqrt_dt.iter().enumerate() {
                stream.fill_increments(*sdt, &mut increments[base + j * dim..base + (j + 1) * dim]);
            }
        }
    }
    Ok(BrownianEnsemble {
        times: times.to_vec(),
        dim,
        paths,
        channels,
        spec,
        increments,
    })
}

impl<T: Real> BrownianEnsemble<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn path_count(&self) -> usize {
        self.paths.len()
    }

    /// Absolute index range of the paths held.
    pub fn paths(&self) -> Range<usize> {
        self.paths.clone()
    }

    pub fn spec(&self) -> NoiseSpec {
        self.spec
    }

    pub fn mode(&self) -> NoiseMode {
        self.spec.mode
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Increments of local path `path` as seen from start point `start`,
    /// `steps * dim` values.
    pub fn increments(&self, path: usize, start: usize) -> &[T] {
        let ch = if self.channels == 1 { 0 } else { start };
        let per = self.steps() * self.dim;
        let base = (path * self.channels + ch) * per;
        &self.increments[base..base + per]
    }

    pub fn all_increments(&self) -> &[T] {
        &self.increments
    }

    /// Keeps the first `steps` steps only.
    pub fn truncated(&self, steps: usize) -> Result<Self> {
        if steps == 0 || steps > self.steps() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} steps to {steps}",
                self.steps()
            )));
        }
        let per = self.steps() * self.dim;
        let keep = steps * self.dim;
        let increments = self.increments.chunks_exact(per).flat_map(|c| c[..keep].iter().copied()).collect();
        Ok(Self {
            times: self.times[..=steps].to_vec(),
            dim: self.dim,
            paths: self.paths.clone(),
            channels: self.channels,
            spec: self.spec,
            increments,
        })
    }

    /// `W_{t_j} - W_{t_0}` for one path and start point, `dim` values.
    pub fn cumulative(&self, path: usize, start: usize, step: usize) -> Vec<T> {
        let inc = self.increments(path, start);
        let mut w = vec![T::zero(); self.dim];
        for j in 0..step {
            for (a, wa) in w.iter_mut().enumerate() {
                *wa += inc[j * self.dim + a];
            }
        }
        w
    }
}
