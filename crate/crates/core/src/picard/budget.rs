use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::torus::{PeriodicField, SpaceTimeField, Spectral};

/// `K = sup|∇h| + sup_s sup|∇F(s)|` with operator norms of spectral Jacobians.
pub fn lipschitz_budget<T: Real>(h: &PeriodicField<T>, forcing: &SpaceTimeField<T>) -> Result<f64> {
    let spectral = Spectral::new(h.grid());
    let grad_h = spectral.gradient(h)?.max_operator_norm().as_f64();
    let grad_f = forcing
        .slices()
        .iter()
        .map(|s| Ok(spectral.gradient(s)?.max_operator_norm().as_f64()))
        .collect::<Result<Vec<f64>>>()?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(grad_h + grad_f)
}

/// Largest horizon with `T·e^T·K < 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// `K = 0`: the contraction factor vanishes for every horizon.
    Unbounded,
    Finite(f64),
}

impl Horizon {
    pub fn admits(&self, t: f64) -> bool {
        match self {
            Horizon::Unbounded => true,
            Horizon::Finite(t0) => t < *t0,
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Horizon::Unbounded => None,
            Horizon::Finite(t) => Some(*t),
        }
    }
}

/// Root of `T·e^T·K = 1` by bisection to `1e-12`.
pub fn horizon_bound(k: f64) -> Result<Horizon> {
    if !(k >= 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!("Lipschitz budget must be finite and >= 0, got {k}")));
    }
    if k == 0.0 {
        return Ok(Horizon::Unbounded);
    }
    let f = |t: f64| t * t.exp() * k - 1.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Horizon::Finite(0.5 * (lo + hi)))
}

pub fn contraction_factor(k: f64, horizon: f64) -> f64 {
    horizon * horizon.exp() * k
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionBudget {
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub gamma: f64,
    /// `None` when unbounded.
    #[serde(rename = "T0")]
    pub t0: Option<f64>,
}

impl ContractionBudget {
    pub fn new(k: f64, horizon: f64) -> Result<Self> {
        Ok(Self {
            k,
            horizon,
            gamma: contraction_factor(k, horizon),
            t0: horizon_bound(k)?.value(),
        })
    }

    pub fn for_problem<T: Real>(h: &PeriodicField<T>, forcing: &SpaceTimeField<T>) -> Result<Self> {
        Self::new(lipschitz_budget(h, forcing)?, forcing.horizon().as_f64())
    }

    pub fn is_contraction(&self) -> bool {
        self.gamma < 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::Preset;
    use crate::torus::GridSpec;
    use proptest::prelude::*;

    /// Independent oracle: Newton's method on `T e^T - 1/K`.
    fn newton_root(k: f64) -> f64 {
        let mut t = 0.5f64;
        for _ in 0..100 {
            let g = t * t.exp() - 1.0 / k;
            let dg = (1.0 + t) * t.exp();
            t -= g / dg;
        }
        t
    }

    #[test]
    fn lipschitz_examples() {
        let g = GridSpec::new(1, 64).unwrap();
        let times = SpaceTimeField::<f64>::uniform_times(0.0, 0.5, 4).unwrap();
        let zero_f = Preset::Zero.sample_in_time(g, times.clone()).unwrap();
        let h = Preset::sine(0.5, 1).sample(g).unwrap();
        assert!((lipschitz_budget(&h, &zero_f).unwrap() - 0.5).abs() < 1e-10);
        let zero_h = Preset::Zero.sample::<f64>(g).unwrap();
        assert_eq!(lipschitz_budget(&zero_h, &zero_f).unwrap(), 0.0);
        let h1 = Preset::sine(1.0, 1).sample(g).unwrap();
        let f = Preset::sine(0.3, 1).sample_in_time(g, times).unwrap();
        assert!((lipschitz_budget(&h1, &f).unwrap() - 1.3).abs() < 1e-10);
    }

    #[test]
    fn horizon_examples() {
        assert_eq!(horizon_bound(0.0).unwrap(), Horizon::Unbounded);
        let t05 = horizon_bound(0.5).unwrap().value().unwrap();
        assert!((t05 - newton_root(0.5)).abs() < 1e-11);
        assert!((t05 - 0.8526).abs() < 1e-4);
        let t1 = horizon_bound(1.0).unwrap().value().unwrap();
        assert!((t1 - newton_root(1.0)).abs() < 1e-11);
        assert!((t1 - 0.5671).abs() < 1e-4);
        assert!(horizon_bound(-1.0).is_err());
        assert!(horizon_bound(1e-9).unwrap().value().unwrap() > 10.0);
    }

    #[test]
    fn reference_budget() {
        let b = ContractionBudget::new(0.5, 0.5).unwrap();
        assert!((b.gamma - 0.25 * 0.5f64.exp()).abs() < 1e-15);
        assert!((b.gamma - 0.412).abs() < 1e-3);
        assert!(b.is_contraction());
        let json = serde_json::to_value(b).unwrap();
        assert!(json.get("K").is_some() && json.get("T0").is_some());
    }

    proptest! {
        #[test]
        fn gamma_below_one_iff_below_t0(k in 0.01f64..20.0, t in 0.0f64..3.0) {
            let t0 = horizon_bound(k).unwrap().value().unwrap();
            prop_assume!((t - t0).abs() > 1e-9);
            prop_assert_eq!(contraction_factor(k, t) < 1.0, t < t0);
        }

        #[test]
        fn t0_decreasing_in_k(k in 0.01f64..20.0, dk in 0.001f64..5.0) {
            let a = horizon_bound(k).unwrap().value().unwrap();
            let b = horizon_bound(k + dk).unwrap().value().unwrap();
            prop_assert!(b < a);
        }
    }
}
