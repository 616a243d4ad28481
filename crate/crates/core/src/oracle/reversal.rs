use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::torus::SpaceTimeField;

/// `v(s, ·) = -u(T - s, ·)` on the reflected time grid.
///
/// Maps classical solutions to backward ones and back; the same map sends a
/// forcing `F` to `-F(T - ·, ·)`. Values reverse bit for bit; times do too
/// whenever `T - t` is exact (e.g. dyadic grids).
pub fn time_reversal<T: Real>(u: &SpaceTimeField<T>, horizon: T) -> Result<SpaceTimeField<T>> {
    let tol = T::of(1e-12) * (T::one() + horizon.abs());
    if (u.horizon() - horizon).abs() > tol || u.start().abs() > tol {
        return Err(Error::InvalidArgument(format!(
            "field lives on [{}, {}], expected [0, {horizon}]",
            u.start(),
            u.horizon()
        )));
    }
    let times: Vec<T> = u.times().iter().rev().map(|&t| horizon - t).collect();
    let slices = u
        .slices()
        .iter()
        .rev()
        .map(|s| s.map(|v| -v))
        .collect::<Result<Vec<_>>>()?;
    SpaceTimeField::new(times, slices)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{GridSpec, PeriodicField};

    #[test]
    fn involution_and_constants() {
        let g = GridSpec::new(1, 16).unwrap();
        let times = SpaceTimeField::uniform_times(0.0, 0.5, 128).unwrap();
        let slices: Vec<_> = times
            .iter()
            .map(|&t| PeriodicField::<f64>::from_fn(g, 1, |x, o| o[0] = (x[0] + t).sin() * (1.0 + t)).unwrap())
            .collect();
        let u = SpaceTimeField::new(times, slices).unwrap();
        let v = time_reversal(&u, 0.5).unwrap();
        assert_eq!(v.slice(0).values()[3], -u.terminal().values()[3]);
        assert_eq!(time_reversal(&v, 0.5).unwrap(), u);

        let c = SpaceTimeField::constant_in_time(vec![0.0, 0.25, 0.5], PeriodicField::constant(g, 0.3)).unwrap();
        let r = time_reversal(&c, 0.5).unwrap();
        assert!(r.slices().iter().all(|s| s.values().iter().all(|&v| v == -0.3)));
        assert!(time_reversal(&c, 0.6).is_err());
    }
}
