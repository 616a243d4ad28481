//! Closed-form solution of the classical unforced 1-D viscous Burgers
//! equation `∂_t u + u ∂_θ u = ν ∂²_θ u` through `u = -2ν ∂_θ log φ`, with
//! `φ` solving the heat equation exactly in Fourier space.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::torus::{PeriodicField, Spectral};

pub fn cole_hopf_solution<T: Real>(u0: &PeriodicField<T>, nu: T, t: T) -> Result<PeriodicField<T>> {
    let grid = u0.grid();
    if grid.dim() != 1 || u0.components() != 1 {
        return Err(Error::InvalidArgument("the Cole-Hopf oracle is one-dimensional".into()));
    }
    if !(nu > T::zero()) {
        return Err(Error::InvalidArgument(format!("viscosity must be positive, got {nu}")));
    }
    if !(t >= T::zero()) {
        return Err(Error::InvalidArgument(format!("time must be >= 0, got {t}")));
    }
    let spectral = Spectral::new(grid);
    let coeffs = spectral.forward(u0)?;
    let mean = coeffs.at(0, &[0]).norm();
    let scale = u0.sup_norm().max(T::one());
    if mean > T::of(1e-12) * scale {
        return Err(Error::InvalidArgument(format!("initial data must have zero mean, got {mean}")));
    }

    // Periodic antiderivative of u0.
    let n = grid.points_per_axis();
    let mut potential = coeffs;
    potential.apply(|k| {
        let k = k[0];
        if k == 0 || k.unsigned_abs() as usize * 2 == n {
            Complex::default()
        } else {
            Complex::new(T::zero(), -T::one() / T::of(k as f64))
        }
    });
    let potential = spectral.inverse(&potential)?;
    // exp(-U / 2ν), shifted by the minimum of U so the largest value is 1.
    let two_nu = T::of(2.0) * nu;
    let umin = potential.values().iter().copied().fold(T::infinity(), T::min);
    let phi0 = potential.map(|u| (-(u - umin) / two_nu).exp())?;

    let mut phi_hat = spectral.forward(&phi0)?;
    phi_hat.apply(|k| Complex::new((-nu * T::of((k[0] * k[0]) as f64) * t).exp(), T::zero()));
    let phi = spectral.inverse(&phi_hat)?;
    let mut dphi_hat = phi_hat;
    dphi_hat.apply(|k| {
        let k = k[0];
        if k.unsigned_abs() as usize * 2 == n {
            Complex::default()
        } else {
            Complex::new(T::zero(), T::of(k as f64))
        }
    });
    let dphi = spectral.inverse(&dphi_hat)?;
    dphi.zip_with(&phi, |d, p| -two_nu * d / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::GridSpec;

    fn minus_half_sine() -> PeriodicField<f64> {
        PeriodicField::<f64>::from_fn(GridSpec::new(1, 128).unwrap(), 1, |x, o| o[0] = -0.5 * x[0].sin()).unwrap()
    }

    #[test]
    fn zero_stays_zero() {
        let u0 = PeriodicField::<f64>::zeros(GridSpec::new(1, 32).unwrap(), 1);
        let u = cole_hopf_solution(&u0, 0.1, 0.7).unwrap();
        assert!(u.sup_norm() == 0.0);
    }

    #[test]
    fn time_zero_round_trips() {
        let u0 = minus_half_sine();
        let u = cole_hopf_solution(&u0, 0.1, 0.0).unwrap();
        assert!(u.sup_distance(&u0).unwrap() <= 1e-10);
    }

    #[test]
    fn rejects_bad_inputs() {
        let u0 = minus_half_sine();
        assert!(cole_hopf_solution(&u0, 0.1, -0.1).is_err());
        assert!(cole_hopf_solution(&u0, 0.0, 0.1).is_err());
        let shifted = u0.map(|v| v + 0.2).unwrap();
        assert!(cole_hopf_solution(&shifted, 0.1, 0.1).is_err());
    }

    #[test]
    fn heat_limit_for_small_data() {
        // For tiny amplitude the nonlinearity is negligible: u ≈ a e^{-νt} sin θ.
        let a = 1e-6;
        let u0 = PeriodicField::<f64>::from_fn(GridSpec::new(1, 32).unwrap(), 1, |x, o| o[0] = a * x[0].sin()).unwrap();
        let u = cole_hopf_solution(&u0, 0.2, 1.0).unwrap();
        let g = u0.grid();
        for j in 0..32 {
            let exact = a * (-0.2f64).exp() * g.coordinate::<f64>(j).sin();
            assert!((u.values()[j] - exact).abs() < 1e-11);
        }
    }
}
