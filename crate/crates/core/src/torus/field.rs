use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;
use crate::torus::grid::GridSpec;

/// Values on a [`GridSpec`], `components` reals per node, stored
/// `node * components + component`.
///
/// Velocity fields carry `dim` components; Jacobian fields carry `dim²`
/// components laid out row-major (`i * dim + j` holds `∂f_i/∂θ_j`).
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicField<T> {
    grid: GridSpec,
    components: usize,
    values: Vec<T>,
}

impl<T: Real> PeriodicField<T> {
    pub fn new(grid: GridSpec, components: usize, values: Vec<T>) -> Result<Self> {
        if components == 0 {
            return Err(Error::ShapeMismatch("field needs at least one component".into()));
        }
        if values.len() != grid.node_count() * components {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values ({} nodes x {} components), got {}",
                grid.node_count() * components,
                grid.node_count(),
                components,
                values.len()
            )));
        }
        ensure_finite(&values, "field values")?;
        Ok(Self {
            grid,
            components,
            values,
        })
    }

    pub fn zeros(grid: GridSpec, components: usize) -> Self {
        Self {
            grid,
            components,
            values: vec![T::zero(); grid.node_count() * components],
        }
    }

    /// A velocity field (`dim` components) equal to `c` in every component.
    pub fn constant(grid: GridSpec, c: T) -> Self {
        Self {
            grid,
            components: grid.dim(),
            values: vec![c; grid.node_count() * grid.dim()],
        }
    }

    /// Samples `f(θ, out)` at every node.
    pub fn from_fn(grid: GridSpec, components: usize, mut f: impl FnMut(&[T], &mut [T])) -> Result<Self> {
        let mut values = vec![T::zero(); grid.node_count() * components];
        let mut theta = vec![T::zero(); grid.dim()];
        for (node, out) in values.chunks_exact_mut(components).enumerate() {
            grid.point(node, &mut theta);
            f(&theta, out);
        }
        Self::new(grid, components, values)
    }

    #[inline]
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    #[inline]
    pub fn components(&self) -> usize {
        self.components
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn node(&self, node: usize) -> &[T] {
        &self.values[node * self.components..(node + 1) * self.components]
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    /// Pointwise map over raw values. The result must stay finite.
    pub fn map(&self, f: impl Fn(T) -> T) -> Result<Self> {
        Self::new(self.grid, self.components, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.check_same_shape(other)?;
        Self::new(
            self.grid,
            self.components,
            self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        )
    }

    pub fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid || self.components != other.components {
            return Err(Error::ShapeMismatch(format!(
                "grid {:?}/{} components vs {:?}/{} components",
                self.grid, self.components, other.grid, other.components
            )));
        }
        Ok(())
    }

    pub fn sup_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        self.check_same_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Normalized grid L2 norm: `((2π)^{-n} ∫ |f|²)^{1/2}` by the rectangle rule.
    pub fn l2_norm(&self) -> T {
        let sum: T = self.values.iter().map(|&v| v * v).sum();
        (sum / T::of_usize(self.grid.node_count())).sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == T::zero())
    }

    /// Largest operator 2-norm over nodes of a Jacobian field (`dim²` components).
    pub fn max_operator_norm(&self) -> T {
        let d = self.grid.dim();
        assert_eq!(self.components, d * d, "not a Jacobian field");
        (0..self.grid.node_count())
            .map(|node| operator_norm(self.node(node), d))
            .fold(T::zero(), T::max)
    }

    pub fn cast<U: Real>(&self) -> PeriodicField<U> {
        PeriodicField {
            grid: self.grid,
            components: self.components,
            values: self.values.iter().map(|v| U::of(v.as_f64())).collect(),
        }
    }
}

/// Spectral norm of a row-major `d×d` matrix.
pub fn operator_norm<T: Real>(m: &[T], d: usize) -> T {
    match d {
        1 => m[0].abs(),
        2 => {
            // Largest singular value of [[a, b], [c, e]] in closed form.
            let (a, b, c, e) = (m[0], m[1], m[2], m[3]);
            let s1 = a * a + b * b + c * c + e * e;
            let det = a * e - b * c;
            let two = T::of(2.0);
            let disc = (s1 * s1 - T::of(4.0) * det * det).max(T::zero()).sqrt();
            ((s1 + disc) / two).sqrt()
        }
        _ => {
            // Power iteration on MᵀM.
            let mut v = vec![T::one(); d];
            let mut lambda = T::zero();
            for _ in 0..200 {
                let mv: Vec<T> = (0..d).map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum()).collect();
                let w: Vec<T> = (0..d).map(|j| (0..d).map(|i| m[i * d + j] * mv[i]).sum()).collect();
                let norm = w.iter().map(|&x| x * x).sum::<T>().sqrt();
                if norm == T::zero() {
                    return T::zero();
                }
                lambda = norm / v.iter().map(|&x| x * x).sum::<T>().sqrt();
                v = w.into_iter().map(|x| x / norm).collect();
            }
            lambda.sqrt()
        }
    }
}

/// A field sampled at strictly increasing times `t₀ < … < t_J = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField<T> {
    times: Vec<T>,
    slices: Vec<PeriodicField<T>>,
}

impl<T: Real> SpaceTimeField<T> {
    pub fn new(times: Vec<T>, slices: Vec<PeriodicField<T>>) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} times but {} slices",
                times.len(),
                slices.len()
            )));
        }
        ensure_finite(&times, "time grid")?;
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("times must be strictly increasing".into()));
        }
        for s in &slices[1..] {
            slices[0].check_same_shape(s)?;
        }
        Ok(Self { times, slices })
    }

    pub fn constant_in_time(times: Vec<T>, field: PeriodicField<T>) -> Result<Self> {
        let slices = vec![field; times.len()];
        Self::new(times, slices)
    }

    pub fn zeros(times: Vec<T>, grid: GridSpec, components: usize) -> Result<Self> {
        Self::constant_in_time(times, PeriodicField::zeros(grid, components))
    }

    #[inline]
    pub fn times(&self) -> &[T] {
        &self.times
    }

    #[inline]
    pub fn slices(&self) -> &[PeriodicField<T>] {
        &self.slices
    }

    #[inline]
    pub fn slice(&self, j: usize) -> &PeriodicField<T> {
        &self.slices[j]
    }

    pub fn slices_mut(&mut self) -> &mut [PeriodicField<T>] {
        &mut self.slices
    }

    pub fn into_parts(self) -> (Vec<T>, Vec<PeriodicField<T>>) {
        (self.times, self.slices)
    }

    pub fn grid(&self) -> GridSpec {
        self.slices[0].grid()
    }

    pub fn components(&self) -> usize {
        self.slices[0].components()
    }

    pub fn start(&self) -> T {
        self.times[0]
    }

    pub fn horizon(&self) -> T {
        *self.times.last().unwrap()
    }

    pub fn terminal(&self) -> &PeriodicField<T> {
        self.slices.last().unwrap()
    }

    pub fn initial(&self) -> &PeriodicField<T> {
        &self.slices[0]
    }

    pub fn is_zero(&self) -> bool {
        self.slices.iter().all(PeriodicField::is_zero)
    }

    pub fn sup_norm(&self) -> T {
        self.slices.iter().map(PeriodicField::sup_norm).fold(T::zero(), T::max)
    }

    pub fn sup_distance(&self, other: &Self) -> Result<T> {
        if self.times.len() != other.times.len() {
            return Err(Error::ShapeMismatch("different number of time slices".into()));
        }
        self.slices
            .iter()
            .zip(&other.slices)
            .try_fold(T::zero(), |m, (a, b)| Ok(m.max(a.sup_distance(b)?)))
    }

    pub fn check_time_in_range(&self, s: T) -> Result<()> {
        if !(s >= self.start() && s <= self.horizon()) {
            return Err(Error::TimeOutOfRange {
                time: s.as_f64(),
                start: self.start().as_f64(),
                end: self.horizon().as_f64(),
            });
        }
        Ok(())
    }

    /// Bracketing slice index `j` and weight `w` so that `s = (1-w)t_j + w t_{j+1}`.
    /// Grid times give `w = 0` exactly.
    pub fn locate(&self, s: T) -> Result<(usize, T)> {
        self.check_time_in_range(s)?;
        Ok(locate_in(&self.times, s))
    }

    /// Linear interpolation in time at node values. Grid times return the stored slice.
    pub fn slice_at(&self, s: T) -> Result<PeriodicField<T>> {
        let (j, w) = self.locate(s)?;
        if w == T::zero() {
            return Ok(self.slices[j].clone());
        }
        let next = &self.slices[j + 1];
        self.slices[j].zip_with(next, |a, b| a + w * (b - a))
    }

    /// Uniform grid `t_j = start + j·(end-start)/steps`, last point exactly `end`.
    pub fn uniform_times(start: T, end: T, steps: usize) -> Result<Vec<T>> {
        if steps == 0 || !(end > start) {
            return Err(Error::InvalidArgument(format!(
                "need end > start and at least one step, got [{start}, {end}] with {steps} steps"
            )));
        }
        let dt = (end - start) / T::of_usize(steps);
        let mut times: Vec<T> = (0..=steps).map(|j| start + T::of_usize(j) * dt).collect();
        times[steps] = end;
        Ok(times)
    }

    /// Same field with `s ↦ f(s)` applied slice by slice.
    pub fn map_slices(&self, mut f: impl FnMut(T, &PeriodicField<T>) -> Result<PeriodicField<T>>) -> Result<Self> {
        let slices = self
            .times
            .iter()
            .zip(&self.slices)
            .map(|(&t, s)| f(t, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(self.times.clone(), slices)
    }
}

pub(crate) fn locate_in<T: Real>(times: &[T], s: T) -> (usize, T) {
    let last = times.len() - 1;
    if last == 0 || s >= times[last] {
        return (last, T::zero());
    }
    // partition_point gives the first index with t > s; s >= t0 so it is >= 1.
    let j = times.partition_point(|&t| t <= s) - 1;
    let w = (s - times[j]) / (times[j + 1] - times[j]);
    (j, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::new(1, 16).unwrap()
    }

    #[test]
    fn shape_and_finiteness_are_enforced() {
        assert!(PeriodicField::<f64>::new(grid(), 1, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(matches!(
            PeriodicField::new(grid(), 1, v),
            Err(Error::NonFinite { index: 3, .. })
        ));
    }

    #[test]
    fn times_must_increase() {
        let f = PeriodicField::<f64>::zeros(grid(), 1);
        assert!(SpaceTimeField::new(vec![0.0, 0.0], vec![f.clone(), f.clone()]).is_err());
        assert!(SpaceTimeField::new(vec![0.0, 1.0], vec![f.clone(), f]).is_ok());
    }

    #[test]
    fn locate_hits_grid_times_exactly() {
        let times = SpaceTimeField::<f64>::uniform_times(0.0, 0.5, 128).unwrap();
        for (j, &t) in times.iter().enumerate() {
            let (k, w) = locate_in(&times, t);
            assert_eq!((k, w), (j, 0.0));
        }
        assert_eq!(times[128], 0.5);
    }

    #[test]
    fn operator_norm_matches_known_values() {
        assert_eq!(operator_norm(&[-3.0f64], 1), 3.0);
        let n = operator_norm(&[3.0f64, 0.0, 0.0, -2.0], 2);
        assert!((n - 3.0).abs() < 1e-14);
        let n3 = operator_norm(&[0.0f64, 0.0, 0.0, 0.0, 5.0, 0.0, 0.0, 0.0, 1.0], 3);
        assert!((n3 - 5.0).abs() < 1e-10);
    }
}
