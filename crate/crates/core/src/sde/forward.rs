//! Euler–Maruyama characteristics `dZ = y(s, Z) ds + √(2ν) dW` and their
//! Jacobian flow `d∇Z = ∇y(s, Z)·∇Z ds`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;
use crate::sde::noise::BrownianEnsemble;
use crate::torus::{InterpMode, SpaceTimeField, SpaceTimeInterpolant, Spectral};

/// Content hash of a space-time field, used to tie ensembles to their drift.
pub fn fingerprint<T: Real>(field: &SpaceTimeField<T>) -> u64 {
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |x: u64| {
        h ^= x;
        h = h.wrapping_mul(PRIME);
    };
    eat(field.grid().dim() as u64);
    eat(field.grid().points_per_axis() as u64);
    for t in field.times() {
        eat(t.as_f64().to_bits());
    }
    for s in field.slices() {
        for v in s.values() {
            eat(v.as_f64().to_bits());
        }
    }
    h
}

/// Characteristics per path, start point and time step.
///
/// Positions are kept unwrapped in `R^n` as `start + displacement`; the
/// displacement is what the integrator accumulates, so start points that
/// share noise under a constant drift share displacements bit for bit.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicEnsemble<T> {
    times: Vec<T>,
    dim: usize,
    starts: Vec<T>,
    paths: usize,
    displacements: Vec<T>,
    drift_fingerprint: u64,
    nu: T,
}

impl<T: Real> CharacteristicEnsemble<T> {
    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn start_time(&self) -> T {
        self.times[0]
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start_count(&self) -> usize {
        self.starts.len() / self.dim
    }

    pub fn start_points(&self) -> &[T] {
        &self.starts
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn drift_fingerprint(&self) -> u64 {
        self.drift_fingerprint
    }

    fn offset(&self, path: usize, start: usize, step: usize) -> usize {
        ((path * self.start_count() + start) * (self.steps() + 1) + step) * self.dim
    }

    /// `Z - start` along one trajectory, `(steps + 1) * dim` values.
    pub fn trajectory_displacement(&self, path: usize, start: usize) -> &[T] {
        let a = self.offset(path, start, 0);
        &self.displacements[a..a + (self.steps() + 1) * self.dim]
    }

    pub fn displacement(&self, path: usize, start: usize, step: usize) -> &[T] {
        let a = self.offset(path, start, step);
        &self.displacements[a..a + self.dim]
    }

    /// Unwrapped position `Z_{t_step}`.
    pub fn position(&self, path: usize, start: usize, step: usize, out: &mut [T]) {
        let d = self.displacement(path, start, step);
        let s = &self.starts[start * self.dim..(start + 1) * self.dim];
        for a in 0..self.dim {
            out[a] = s[a] + d[a];
        }
    }

    /// All start points' positions for one path and step, flattened.
    pub fn positions_at(&self, path: usize, step: usize) -> Vec<T> {
        let mut out = vec![T::zero(); self.starts.len()];
        for (s, o) in out.chunks_exact_mut(self.dim).enumerate() {
            self.position(path, s, step, o);
        }
        out
    }

    /// Writes `(path, start_index, step, time, z0..)` rows.
    pub fn write_csv<W: Write>(&self, writer: W, max_rows: usize) -> Result<()> {
        let rows = self.paths * self.start_count() * (self.steps() + 1);
        if rows > max_rows {
            return Err(Error::InvalidArgument(format!(
                "path dump would have {rows} rows, limit is {max_rows}"
            )));
        }
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["path".to_string(), "start_index".into(), "step".into(), "time".into()];
        header.extend((0..self.dim).map(|a| format!("z{a}")));
        out.write_record(&header)?;
        let mut z = vec![T::zero(); self.dim];
        for p in 0..self.paths {
            for s in 0..self.start_count() {
                for (j, t) in self.times.iter().enumerate() {
                    self.position(p, s, j, &mut z);
                    let mut row = vec![p.to_string(), s.to_string(), j.to_string(), format!("{:e}", t.as_f64())];
                    row.extend(z.iter().map(|v| format!("{:e}", v.as_f64())));
                    out.write_record(&row)?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Jacobians `∇Z` per path, start point and step, row-major `dim × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentEnsemble<T> {
    dim: usize,
    steps: usize,
    starts: usize,
    paths: usize,
    jacobians: Vec<T>,
}

impl<T: Real> TangentEnsemble<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn start_count(&self) -> usize {
        self.starts
    }

    pub fn path_count(&self) -> usize {
        self.paths
    }

    pub fn jacobian(&self, path: usize, start: usize, step: usize) -> &[T] {
        let dd = self.dim * self.dim;
        let a = ((path * self.starts + start) * (self.steps + 1) + step) * dd;
        &self.jacobians[a..a + dd]
    }

    pub fn all(&self) -> &[T] {
        &self.jacobians
    }
}

fn times_match<T: Real>(a: T, b: T) -> bool {
    (a - b).abs() <= T::of(1e-12) * (T::one() + b.abs())
}

fn check_noise_grid<T: Real>(drift: &SpaceTimeField<T>, t: T, noise: &BrownianEnsemble<T>) -> Result<()> {
    drift.check_time_in_range(t)?;
    let nt = noise.times();
    if !times_match(nt[0], t) || !times_match(*nt.last().unwrap(), drift.horizon()) {
        return Err(Error::ShapeMismatch(format!(
            "noise grid [{}, {}] does not span [{}, {}]",
            nt[0],
            nt.last().unwrap(),
            t,
            drift.horizon()
        )));
    }
    Ok(())
}

/// Euler–Maruyama characteristics from `(t, start_points)` under `drift`,
/// evaluated with periodic cubic splines.
pub fn integrate_forward<T: Real>(
    drift: &SpaceTimeField<T>,
    t: T,
    start_points: &[T],
    noise: &BrownianEnsemble<T>,
    nu: T,
) -> Result<CharacteristicEnsemble<T>> {
    let interp = SpaceTimeInterpolant::new(drift, InterpMode::CubicSpline)?;
    integrate_forward_with(&interp, fingerprint(drift), drift, t, start_points, noise, nu)
}

/// As [`integrate_forward`] with a prepared interpolant of `drift`.
pub fn integrate_forward_with<T: Real>(
    interp: &SpaceTimeInterpolant<T>,
    drift_fingerprint: u64,
    drift: &SpaceTimeField<T>,
    t: T,
    start_points: &[T],
    noise: &BrownianEnsemble<T>,
    nu: T,
) -> Result<CharacteristicEnsemble<T>> {
    let dim = drift.grid().dim();
    if drift.components() != dim {
        return Err(Error::ShapeMismatch(format!(
            "drift has {} components, expected {dim}",
            drift.components()
        )));
    }
    if noise.dim() != dim {
        return Err(Error::ShapeMismatch(format!("noise dimension {} vs field dimension {dim}", noise.dim())));
    }
    if start_points.is_empty() || start_points.len() % dim != 0 {
        return Err(Error::ShapeMismatch("start points must be non-empty multiples of the dimension".into()));
    }
    if !(nu >= T::zero()) {
        return Err(Error::InvalidArgument(format!("viscosity must be >= 0, got {nu}")));
    }
    ensure_finite(start_points, "start points")?;
    check_noise_grid(drift, t, noise)?;

    let times = noise.times().to_vec();
    let steps = times.len() - 1;
    let starts = start_points.len() / dim;
    let diffusion = (T::of(2.0) * nu).sqrt();
    let per_traj = (steps + 1) * dim;
    let mut displacements = vec![T::zero(); noise.path_count() * starts * per_traj];

    displacements
        .par_chunks_mut(per_traj)
        .enumerate()
        .for_each(|(pair, traj)| {
            let (path, start) = (pair / starts, pair % starts);
            let origin = &start_points[start * dim..(start + 1) * dim];
            let inc = noise.increments(path, start);
            let mut z = [T::zero(); 8];
            let mut v = [T::zero(); 8];
            for j in 0..steps {
                let dt = times[j + 1] - times[j];
                for a in 0..dim {
                    z[a] = origin[a] + traj[j * dim + a];
                }
                if dim == 1 {
                    v[0] = interp.eval_scalar_1d(times[j], z[0]);
                } else {
                    interp.eval_into(times[j], &z[..dim], &mut v[..dim]);
                }
                for a in 0..dim {
                    traj[(j + 1) * dim + a] = traj[j * dim + a] + v[a] * dt + diffusion * inc[j * dim + a];
                }
            }
        });

    Ok(CharacteristicEnsemble {
        times,
        dim,
        starts: start_points.to_vec(),
        paths: noise.path_count(),
        displacements,
        drift_fingerprint,
        nu,
    })
}

/// Jacobian field `∇y(s, ·)` of every slice, as a space-time field of `dim²` components.
pub fn gradient_field<T: Real>(field: &SpaceTimeField<T>) -> Result<SpaceTimeField<T>> {
    let spectral = Spectral::new(field.grid());
    field.map_slices(|_, s| spectral.gradient(s))
}

/// `∇Z_{j+1} = ∇Z_j + ∇y(t_j, Z_j)·∇Z_j Δt_j`, started from the identity.
pub fn integrate_tangent<T: Real>(
    drift: &SpaceTimeField<T>,
    chars: &CharacteristicEnsemble<T>,
) -> Result<TangentEnsemble<T>> {
    if fingerprint(drift) != chars.drift_fingerprint() {
        return Err(Error::ShapeMismatch("characteristics were generated under a different drift".into()));
    }
    let grad = SpaceTimeInterpolant::new(&gradient_field(drift)?, InterpMode::CubicSpline)?;
    let dim = chars.dim();
    let dd = dim * dim;
    let steps = chars.steps();
    let starts = chars.start_count();
    let times = chars.times();
    let mut jacobians = vec![T::zero(); chars.path_count() * starts * (steps + 1) * dd];
    jacobians
        .par_chunks_mut((steps + 1) * dd)
        .enumerate()
        .for_each(|(pair, traj)| {
            let (path, start) = (pair / starts, pair % starts);
            for a in 0..dim {
                traj[a * dim + a] = T::one();
            }
            let mut z = [T::zero(); 8];
            let mut g = [T::zero(); 64];
            for j in 0..steps {
                let dt = times[j + 1] - times[j];
                chars.position(path, start, j, &mut z[..dim]);
                grad.eval_into(times[j], &z[..dim], &mut g[..dd]);
                let (done, rest) = traj.split_at_mut((j + 1) * dd);
                let cur = &done[j * dd..];
                let next = &mut rest[..dd];
                for r in 0..dim {
                    for c in 0..dim {
                        let mut acc = T::zero();
                        for k in 0..dim {
                            acc += g[r * dim + k] * cur[k * dim + c];
                        }
                        next[r * dim + c] = cur[r * dim + c] + acc * dt;
                    }
                }
            }
        });
    Ok(TangentEnsemble {
        dim,
        steps,
        starts,
        paths: chars.path_count(),
        jacobians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::noise::{sample_brownian, NoiseMode, NoiseSpec};
    use crate::torus::{GridSpec, PeriodicField};

    fn setup(field: PeriodicField<f64>, steps: usize) -> SpaceTimeField<f64> {
        let times = SpaceTimeField::uniform_times(0.0, 0.5, steps).unwrap();
        SpaceTimeField::constant_in_time(times, field).unwrap()
    }

    fn grid() -> GridSpec {
        GridSpec::new(1, 32).unwrap()
    }

    #[test]
    fn zero_drift_no_noise_is_stationary() {
        let drift = setup(PeriodicField::zeros(grid(), 1), 16);
        let noise = sample_brownian(drift.times(), 0..3, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        let starts = grid().points::<f64>();
        let ch = integrate_forward(&drift, 0.0, &starts, &noise, 0.0).unwrap();
        for p in 0..3 {
            for s in 0..32 {
                for j in 0..=16 {
                    let mut z = [0.0];
                    ch.position(p, s, j, &mut z);
                    assert_eq!(z[0], starts[s]);
                }
            }
        }
    }

    #[test]
    fn constant_drift_translates() {
        let c = 0.7;
        let drift = setup(PeriodicField::constant(grid(), c), 16);
        let noise = sample_brownian(drift.times(), 0..2, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        let starts = [0.1, 2.0, 5.5];
        let ch = integrate_forward(&drift, 0.0, &starts, &noise, 0.0).unwrap();
        for s in 0..3 {
            for (j, t) in drift.times().iter().enumerate() {
                let mut z = [0.0];
                ch.position(1, s, j, &mut z);
                assert!((z[0] - (starts[s] + c * t)).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn pure_noise_matches_brownian_path() {
        let nu = 0.1;
        let drift = setup(PeriodicField::zeros(grid(), 1), 16);
        let noise = sample_brownian(drift.times(), 0..4, 1, 2, NoiseSpec::new(5, NoiseMode::Independent)).unwrap();
        let starts = [1.0, 3.0];
        let ch = integrate_forward(&drift, 0.0, &starts, &noise, nu).unwrap();
        for p in 0..4 {
            for s in 0..2 {
                for j in 0..=16 {
                    let w = noise.cumulative(p, s, j)[0];
                    let mut z = [0.0];
                    ch.position(p, s, j, &mut z);
                    assert!((z[0] - (starts[s] + (2.0 * nu).sqrt() * w)).abs() <= 1e-14);
                }
            }
        }
    }

    #[test]
    fn common_noise_translation_is_exact() {
        let drift = setup(PeriodicField::zeros(grid(), 1), 32);
        let noise = sample_brownian(drift.times(), 0..5, 1, 1, NoiseSpec::new(8, NoiseMode::Common)).unwrap();
        let ch = integrate_forward(&drift, 0.0, &[0.3, 4.1], &noise, 0.2).unwrap();
        for p in 0..5 {
            assert_eq!(ch.trajectory_displacement(p, 0), ch.trajectory_displacement(p, 1));
        }
    }

    #[test]
    fn start_slice_and_step_bound() {
        let g = grid();
        let field = PeriodicField::<f64>::from_fn(g, 1, |x, o| o[0] = 0.5 * x[0].sin()).unwrap();
        let drift = setup(field.clone(), 32);
        let nu = 0.1;
        let noise = sample_brownian(drift.times(), 0..8, 1, 32, NoiseSpec::new(3, NoiseMode::Independent)).unwrap();
        let starts = g.points::<f64>();
        let ch = integrate_forward(&drift, 0.0, &starts, &noise, nu).unwrap();
        let sup = field.sup_norm();
        let dt = 0.5 / 32.0;
        for p in 0..8 {
            for s in 0..32 {
                let mut z0 = [0.0];
                ch.position(p, s, 0, &mut z0);
                assert_eq!(z0[0], starts[s]);
                let inc = noise.increments(p, s);
                for j in 0..32 {
                    let step = ch.displacement(p, s, j + 1)[0] - ch.displacement(p, s, j)[0];
                    let bound = sup * dt + (2.0 * nu).sqrt() * inc[j].abs();
                    assert!(step.abs() <= bound * (1.0 + 1e-6) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn adapted_to_noise_prefix() {
        let g = grid();
        let field = PeriodicField::<f64>::from_fn(g, 1, |x, o| o[0] = x[0].cos()).unwrap();
        let drift = setup(field, 16);
        let noise = sample_brownian(drift.times(), 0..3, 1, 1, NoiseSpec::new(11, NoiseMode::Common)).unwrap();
        let full = integrate_forward(&drift, 0.0, &[0.5, 1.5], &noise, 0.1).unwrap();
        // Truncating the noise also truncates the horizon, so re-run on the short drift.
        let short_times = drift.times()[..=9].to_vec();
        let short = SpaceTimeField::new(short_times, drift.slices()[..=9].to_vec()).unwrap();
        let cut = integrate_forward(&short, 0.0, &[0.5, 1.5], &noise.truncated(9).unwrap(), 0.1).unwrap();
        for p in 0..3 {
            for s in 0..2 {
                for j in 0..=9 {
                    assert_eq!(full.displacement(p, s, j), cut.displacement(p, s, j));
                }
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let drift = setup(PeriodicField::zeros(grid(), 1), 16);
        let other = SpaceTimeField::<f64>::uniform_times(0.0, 0.4, 16).unwrap();
        let noise = sample_brownian(&other, 0..1, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        assert!(integrate_forward(&drift, 0.0, &[0.0], &noise, 0.1).is_err());
        let ok = sample_brownian(drift.times(), 0..1, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        assert!(integrate_forward(&drift, 0.0, &[f64::INFINITY], &ok, 0.1).is_err());
        assert!(integrate_forward(&drift, 0.0, &[0.0], &ok, -1.0).is_err());
        assert!(integrate_forward(&drift, 0.7, &[0.0], &ok, 0.1).is_err());
    }

    #[test]
    fn tangent_is_identity_for_trivial_drifts() {
        for field in [PeriodicField::zeros(grid(), 1), PeriodicField::constant(grid(), 0.4)] {
            let drift = setup(field, 16);
            let noise = sample_brownian(drift.times(), 0..2, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
            let ch = integrate_forward(&drift, 0.0, &[0.1, 0.2], &noise, 0.1).unwrap();
            let tan = integrate_tangent(&drift, &ch).unwrap();
            assert!(tan.all().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn tangent_rejects_foreign_drift() {
        let drift = setup(PeriodicField::zeros(grid(), 1), 16);
        let other = setup(PeriodicField::constant(grid(), 1.0), 16);
        let noise = sample_brownian(drift.times(), 0..1, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        let ch = integrate_forward(&drift, 0.0, &[0.1], &noise, 0.1).unwrap();
        assert!(integrate_tangent(&other, &ch).is_err());
    }

    #[test]
    fn two_dimensional_smoke() {
        let g = GridSpec::new(2, 16).unwrap();
        let field = PeriodicField::<f64>::from_fn(g, 2, |x, o| {
            o[0] = 0.3 * x[1].sin();
            o[1] = 0.2 * x[0].cos();
        })
        .unwrap();
        let drift = setup(field, 8);
        let noise = sample_brownian(drift.times(), 0..2, 2, 1, NoiseSpec::new(4, NoiseMode::Common)).unwrap();
        let ch = integrate_forward(&drift, 0.0, &[0.5, 0.5, 2.0, 1.0], &noise, 0.05).unwrap();
        let tan = integrate_tangent(&drift, &ch).unwrap();
        assert_eq!(tan.jacobian(1, 1, 0), &[1.0, 0.0, 0.0, 1.0]);
        assert!(tan.all().iter().all(|v| v.is_finite()));
        let j = tan.jacobian(0, 0, 8);
        assert!((j[0] * j[3] - j[1] * j[2]) > 0.0);
    }

    #[test]
    fn csv_dump_respects_limit() {
        let drift = setup(PeriodicField::zeros(grid(), 1), 4);
        let noise = sample_brownian(drift.times(), 0..2, 1, 1, NoiseSpec::new(1, NoiseMode::Common)).unwrap();
        let ch = integrate_forward(&drift, 0.0, &[0.1, 0.2], &noise, 0.1).unwrap();
        let mut buf = Vec::new();
        ch.write_csv(&mut buf, 100).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + 2 * 2 * 5);
        assert!(ch.write_csv(Vec::new(), 10).is_err());
    }
}
