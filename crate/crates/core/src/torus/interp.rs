//! Evaluation of periodic fields off the grid.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;
use crate::torus::field::{locate_in, PeriodicField, SpaceTimeField};
use crate::torus::grid::GridSpec;
use crate::torus::spectral::Spectral;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterpMode {
    /// Band-limited Fourier interpolant. Exact for band-limited data, `O(N^n)` per point.
    Trigonometric,
    /// Periodic cubic B-spline interpolant, `O(4^n)` per point.
    #[default]
    CubicSpline,
}

/// A field prepared for evaluation at arbitrary points of `R^n` (taken mod 2π).
#[derive(Debug, Clone)]
pub struct Interpolant<T> {
    grid: GridSpec,
    components: usize,
    mode: InterpMode,
    nodes: Vec<T>,
    spline: Vec<T>,
    trig: Vec<Complex<T>>,
    inv_spacing: T,
    inv_count: T,
    snap: T,
    /// Set when the field does not depend on position.
    uniform: Option<Vec<T>>,
}

/// `floor(x)` as a float and an integer.
#[inline(always)]
fn floor_split<T: Real>(x: T) -> (T, i64) {
    let i = x.floor_i64();
    (T::of(i as f64), i)
}

impl<T: Real> Interpolant<T> {
    pub fn new(field: &PeriodicField<T>, mode: InterpMode) -> Result<Self> {
        Self::with_spectral(field, mode, &Spectral::new(field.grid()))
    }

    pub fn with_spectral(field: &PeriodicField<T>, mode: InterpMode, spectral: &Spectral<T>) -> Result<Self> {
        let grid = field.grid();
        let n = grid.points_per_axis();
        let comps = field.components();
        let first = &field.values()[..comps];
        let uniform = field
            .values()
            .chunks_exact(comps)
            .all(|v| v == first)
            .then(|| first.to_vec());
        let mut coeffs = spectral.forward(field)?;
        let (spline, trig) = match mode {
            InterpMode::CubicSpline => {
                // Cubic B-spline prefilter: divide by the symbol of [1, 4, 1]/6 on each axis.
                let tau = std::f64::consts::TAU;
                coeffs.apply(|k| {
                    let m: f64 = k
                        .iter()
                        .map(|&ka| (4.0 + 2.0 * (tau * ka as f64 / n as f64).cos()) / 6.0)
                        .product();
                    Complex::new(T::of(1.0 / m), T::zero())
                });
                (spectral.inverse(&coeffs)?.into_values(), Vec::new())
            }
            InterpMode::Trigonometric => (Vec::new(), coeffs.coeffs().to_vec()),
        };
        Ok(Self {
            grid,
            components: field.components(),
            mode,
            nodes: field.values().to_vec(),
            spline,
            trig,
            inv_spacing: T::of(n as f64 / std::f64::consts::TAU),
            inv_count: T::of(1.0 / n as f64),
            snap: T::epsilon().sqrt() * T::of(0.1),
            uniform,
        })
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn mode(&self) -> InterpMode {
        self.mode
    }

    /// Returns `(index mod N, fraction in [0,1), snapped-to-node)` along one axis.
    #[inline(always)]
    fn split(&self, x: T) -> (usize, T, bool) {
        let n = self.grid.points_per_axis();
        let nf = T::of_usize(n);
        let u = x * self.inv_spacing;
        // Wrapping by a whole number of periods is exact, so the fractional part is unchanged.
        let (_, periods) = floor_split(u * self.inv_count);
        let w = u - nf * T::of(periods as f64);
        let (fl, whole) = floor_split(w);
        let mut frac = w - fl;
        let mut base = whole as isize;
        let mut snapped = false;
        if frac < self.snap {
            frac = T::zero();
            snapped = true;
        } else if frac > T::one() - self.snap {
            frac = T::zero();
            base += 1;
            snapped = true;
        }
        let n = n as isize;
        if base < 0 {
            base += n;
        } else if base >= n {
            base -= n;
        }
        (base as usize, frac, snapped)
    }

    #[inline(always)]
    fn bspline_weights(t: T) -> [T; 4] {
        let sixth = T::of(1.0 / 6.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let s = T::one() - t;
        [
            s * s * s * sixth,
            (T::of(3.0) * t3 - T::of(6.0) * t2 + T::of(4.0)) * sixth,
            (T::of(-3.0) * t3 + T::of(3.0) * t2 + T::of(3.0) * t + T::one()) * sixth,
            t3 * sixth,
        ]
    }

    /// Fast path for one-dimensional scalar fields.
    #[inline(always)]
    pub fn eval_scalar_1d(&self, x: T) -> T {
        debug_assert!(self.grid.dim() == 1 && self.components == 1);
        if let Some(u) = &self.uniform {
            return u[0];
        }
        let (i, t, snapped) = self.split(x);
        if snapped {
            return self.nodes[i];
        }
        match self.mode {
            InterpMode::CubicSpline => {
                let n = self.grid.points_per_axis();
                let w = Self::bspline_weights(t);
                let c = &self.spline;
                let im1 = if i == 0 { n - 1 } else { i - 1 };
                let ip1 = if i + 1 == n { 0 } else { i + 1 };
                let ip2 = if ip1 + 1 == n { 0 } else { ip1 + 1 };
                w[0] * c[im1] + w[1] * c[i] + w[2] * c[ip1] + w[3] * c[ip2]
            }
            InterpMode::Trigonometric => {
                let mut out = [T::zero()];
                self.eval_trig(&[x], &mut out);
                out[0]
            }
        }
    }

    /// Writes the `components` values at point `x` (length `dim`) into `out`.
    pub fn eval_into(&self, x: &[T], out: &mut [T]) {
        let d = self.grid.dim();
        let comps = self.components;
        debug_assert_eq!(x.len(), d);
        debug_assert_eq!(out.len(), comps);
        if let Some(u) = &self.uniform {
            out.copy_from_slice(u);
            return;
        }
        if d == 1 && comps == 1 {
            out[0] = self.eval_scalar_1d(x[0]);
            return;
        }
        let n = self.grid.points_per_axis();
        let mut base = [0usize; 8];
        let mut frac = [T::zero(); 8];
        let mut all_snapped = true;
        assert!(d <= 8, "dimension above 8 is not supported");
        for a in 0..d {
            let (i, t, s) = self.split(x[a]);
            base[a] = i;
            frac[a] = t;
            all_snapped &= s;
        }
        if all_snapped {
            let node = self.grid.node_index(&base[..d]);
            out.copy_from_slice(&self.nodes[node * comps..(node + 1) * comps]);
            return;
        }
        match self.mode {
            InterpMode::Trigonometric => self.eval_trig(x, out),
            InterpMode::CubicSpline => {
                let weights: Vec<[T; 4]> = frac[..d].iter().map(|&t| Self::bspline_weights(t)).collect();
                out.iter_mut().for_each(|o| *o = T::zero());
                let mut multi = [0usize; 8];
                for corner in 0..4usize.pow(d as u32) {
                    let mut w = T::one();
                    let mut rest = corner;
                    for a in 0..d {
                        let off = rest % 4;
                        rest /= 4;
                        w *= weights[a][off];
                        multi[a] = (base[a] + n + off - 1) % n;
                    }
                    let node = self.grid.node_index(&multi[..d]);
                    for (c, o) in out.iter_mut().enumerate() {
                        *o += w * self.spline[node * comps + c];
                    }
                }
            }
        }
    }

    fn eval_trig(&self, x: &[T], out: &mut [T]) {
        let g = self.grid;
        let n = g.points_per_axis();
        let d = g.dim();
        // Per-axis phase tables; the Nyquist column uses cos so the interpolant stays real.
        let tables: Vec<Vec<Complex<T>>> = x
            .iter()
            .map(|&xa| {
                (0..n)
                    .map(|m| {
                        let k = T::of(g.wavenumber(m) as f64);
                        if g.is_nyquist(m) {
                            Complex::new((k * xa).cos(), T::zero())
                        } else {
                            Complex::new((k * xa).cos(), (k * xa).sin())
                        }
                    })
                    .collect()
            })
            .collect();
        let nodes = g.node_count();
        let mut multi = vec![0usize; d];
        out.iter_mut().for_each(|o| *o = T::zero());
        for idx in 0..nodes {
            g.multi_index(idx, &mut multi);
            let phase = multi
                .iter()
                .enumerate()
                .fold(Complex::new(T::one(), T::zero()), |p, (a, &m)| p * tables[a][m]);
            for (c, o) in out.iter_mut().enumerate() {
                *o += (self.trig[c * nodes + idx] * phase).re;
            }
        }
    }
}

/// Values of `field` at `positions` (flattened, `dim` coordinates per point).
pub fn compose<T: Real>(field: &PeriodicField<T>, positions: &[T], mode: InterpMode) -> Result<Vec<T>> {
    let d = field.grid().dim();
    if positions.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{} coordinates is not a multiple of dimension {d}",
            positions.len()
        )));
    }
    ensure_finite(positions, "positions")?;
    let interp = Interpolant::new(field, mode)?;
    let comps = field.components();
    let mut out = vec![T::zero(); positions.len() / d * comps];
    for (x, o) in positions.chunks_exact(d).zip(out.chunks_exact_mut(comps)) {
        interp.eval_into(x, o);
    }
    Ok(out)
}

/// A [`SpaceTimeField`] prepared for evaluation at arbitrary `(s, θ)`.
#[derive(Debug, Clone)]
pub struct SpaceTimeInterpolant<T> {
    times: Vec<T>,
    slices: Vec<Interpolant<T>>,
}

impl<T: Real> SpaceTimeInterpolant<T> {
    pub fn new(field: &SpaceTimeField<T>, mode: InterpMode) -> Result<Self> {
        let spectral = Spectral::new(field.grid());
        let slices = field
            .slices()
            .iter()
            .map(|s| Interpolant::with_spectral(s, mode, &spectral))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: field.times().to_vec(),
            slices,
        })
    }

    pub fn times(&self) -> &[T] {
        &self.times
    }

    pub fn slice(&self, j: usize) -> &Interpolant<T> {
        &self.slices[j]
    }

    pub fn components(&self) -> usize {
        self.slices[0].components()
    }

    pub fn grid(&self) -> GridSpec {
        self.slices[0].grid()
    }

    pub fn check_time(&self, s: T) -> Result<()> {
        let (a, b) = (self.times[0], *self.times.last().unwrap());
        if !(s >= a && s <= b) {
            return Err(Error::TimeOutOfRange {
                time: s.as_f64(),
                start: a.as_f64(),
                end: b.as_f64(),
            });
        }
        Ok(())
    }

    /// Linear in time between bracketing slices, then spatial interpolation.
    /// `s` must already be in range (see [`Self::check_time`]).
    pub fn eval_into(&self, s: T, x: &[T], out: &mut [T]) {
        let (j, w) = locate_in(&self.times, s);
        self.slices[j].eval_into(x, out);
        if w != T::zero() {
            let mut next = [T::zero(); 64];
            let next = &mut next[..out.len()];
            self.slices[j + 1].eval_into(x, next);
            for (o, &b) in out.iter_mut().zip(next.iter()) {
                *o = *o + w * (b - *o);
            }
        }
    }

    #[inline(always)]
    pub fn eval_scalar_1d(&self, s: T, x: T) -> T {
        let (j, w) = locate_in(&self.times, s);
        let a = self.slices[j].eval_scalar_1d(x);
        if w == T::zero() {
            a
        } else {
            a + w * (self.slices[j + 1].eval_scalar_1d(x) - a)
        }
    }
}

/// `field(s, ·)` at `positions`: linear in time, then [`compose`] in space.
pub fn eval_spacetime<T: Real>(
    field: &SpaceTimeField<T>,
    s: T,
    positions: &[T],
    mode: InterpMode,
) -> Result<Vec<T>> {
    let (j, w) = field.locate(s)?;
    let at_j = compose(field.slice(j), positions, mode)?;
    if w == T::zero() {
        return Ok(at_j);
    }
    let at_next = compose(field.slice(j + 1), positions, mode)?;
    Ok(at_j.iter().zip(&at_next).map(|(&a, &b)| a + w * (b - a)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn sine(n: usize) -> PeriodicField<f64> {
        PeriodicField::<f64>::from_fn(GridSpec::new(1, n).unwrap(), 1, |x, o| o[0] = x[0].sin()).unwrap()
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let f = PeriodicField::<f64>::from_fn(GridSpec::new(1, 32).unwrap(), 1, |x, o| {
            o[0] = (x[0]).sin().exp() + 0.1 * (3.0 * x[0]).cos()
        })
        .unwrap();
        let nodes = f.grid().points::<f64>();
        for mode in [InterpMode::Trigonometric, InterpMode::CubicSpline] {
            let v = compose(&f, &nodes, mode).unwrap();
            assert_eq!(v, f.values());
        }
    }

    #[test]
    fn half_period_shift_trig() {
        let f = sine(32);
        let shifted: Vec<f64> = f.grid().points::<f64>().iter().map(|&x| x + PI).collect();
        let v = compose(&f, &shifted, InterpMode::Trigonometric).unwrap();
        for (j, &vj) in v.iter().enumerate() {
            assert!((vj + f.values()[j]).abs() <= 1e-10);
        }
    }

    #[test]
    fn off_grid_trig_is_exact_for_band_limited() {
        let f = sine(32);
        let v = compose(&f, &[0.3, -5.0, 40.0], InterpMode::Trigonometric).unwrap();
        assert!((v[0] - 0.3f64.sin()).abs() <= 1e-10);
        assert!((v[1] - (-5.0f64).sin()).abs() <= 1e-10);
        assert!((v[2] - 40.0f64.sin()).abs() <= 1e-10);
    }

    #[test]
    fn cubic_spline_is_fourth_order() {
        let err = |n: usize| {
            let f = sine(n);
            let xs: Vec<f64> = (0..97).map(|i| 0.0137 + i as f64 * 0.0651).collect();
            let v = compose(&f, &xs, InterpMode::CubicSpline).unwrap();
            xs.iter().zip(&v).map(|(x, v)| (x.sin() - v).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(16), err(32));
        assert!(e1 < 1e-3, "{e1}");
        let order = (e1 / e2).log2();
        assert!(order > 3.7, "order {order}");
    }

    #[test]
    fn rejects_non_finite_positions() {
        assert!(matches!(
            compose(&sine(16), &[f64::NAN], InterpMode::CubicSpline),
            Err(Error::NonFinite { .. })
        ));
    }

    #[test]
    fn constant_field_stays_exact() {
        let f = PeriodicField::constant(GridSpec::new(1, 16).unwrap(), 0.3);
        let v = compose(&f, &[0.123, 7.7, -3.3], InterpMode::CubicSpline).unwrap();
        assert!(v.iter().all(|&x| x == 0.3));
    }

    #[test]
    fn two_dimensional_spline() {
        let g = GridSpec::new(2, 32).unwrap();
        let f = PeriodicField::<f64>::from_fn(g, 2, |x, o| {
            o[0] = x[0].sin() * x[1].cos();
            o[1] = (x[0] + x[1]).cos();
        })
        .unwrap();
        let pts = [0.4, 1.9, 3.3, -0.7];
        for mode in [InterpMode::CubicSpline, InterpMode::Trigonometric] {
            let v = compose(&f, &pts, mode).unwrap();
            for (p, o) in pts.chunks(2).zip(v.chunks(2)) {
                assert!((o[0] - p[0].sin() * p[1].cos()).abs() < 2e-4);
                assert!((o[1] - (p[0] + p[1]).cos()).abs() < 2e-4);
            }
        }
    }

    #[test]
    fn spacetime_interpolation() {
        let g = GridSpec::new(1, 16).unwrap();
        let times = vec![0.0, 1.0];
        let a = PeriodicField::<f64>::from_fn(g, 1, |x, o| o[0] = x[0].sin()).unwrap();
        let b = a.map(|v| 3.0 * v + 1.0).unwrap();
        let field = SpaceTimeField::new(times, vec![a.clone(), b.clone()]).unwrap();
        let nodes = g.points::<f64>();
        assert_eq!(eval_spacetime(&field, 0.0, &nodes, InterpMode::CubicSpline).unwrap(), a.values());
        assert_eq!(eval_spacetime(&field, 1.0, &nodes, InterpMode::CubicSpline).unwrap(), b.values());
        let mid = eval_spacetime(&field, 0.5, &nodes, InterpMode::CubicSpline).unwrap();
        for (j, m) in mid.iter().enumerate() {
            assert!((m - 0.5 * (a.values()[j] + b.values()[j])).abs() <= 1e-12);
        }
        assert!(matches!(
            eval_spacetime(&field, 1.5, &nodes, InterpMode::CubicSpline),
            Err(Error::TimeOutOfRange { .. })
        ));

        let frozen = SpaceTimeField::constant_in_time(vec![0.0, 0.3, 1.0], a.clone()).unwrap();
        let v = eval_spacetime(&frozen, 0.77, &[1.234], InterpMode::CubicSpline).unwrap();
        let w = compose(&a, &[1.234], InterpMode::CubicSpline).unwrap();
        assert_eq!(v, w);
    }

    proptest! {
        #[test]
        fn integer_shift_is_cyclic(shift in 0usize..32, k in 1usize..6) {
            let g = GridSpec::new(1, 32).unwrap();
            let f = PeriodicField::<f64>::from_fn(g, 1, |x, o| o[0] = (k as f64 * x[0]).cos() + 0.2).unwrap();
            let pts: Vec<f64> = (0..32).map(|j| g.coordinate::<f64>(j) + g.coordinate::<f64>(shift)).collect();
            for mode in [InterpMode::Trigonometric, InterpMode::CubicSpline] {
                let v = compose(&f, &pts, mode).unwrap();
                for j in 0..32 {
                    prop_assert_eq!(v[j], f.values()[(j + shift) % 32]);
                }
            }
        }
    }
}
