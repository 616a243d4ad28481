//! Fourier-space calculus on the torus.
//!
//! Coefficients follow `c_k = (2π)^{-n} ∫ f(θ) e^{-ik·θ} dθ`, computed
//! exactly for band-limited data as `N^{-n} Σ_j f(θ_j) e^{-ik·θ_j}`.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{ensure_finite, Error, Result};
use crate::scalar::Real;
use crate::torus::field::PeriodicField;
use crate::torus::grid::GridSpec;

/// Complex Fourier coefficients of a real field, `component * N^n + k_index`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs<T> {
    grid: GridSpec,
    components: usize,
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> SpectralCoeffs<T> {
    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn components(&self) -> usize {
        self.components
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn component(&self, c: usize) -> &[Complex<T>] {
        let m = self.grid.node_count();
        &self.coeffs[c * m..(c + 1) * m]
    }

    /// Coefficient at signed wavevector `k` (each entry in `(-N/2, N/2]`).
    pub fn at(&self, component: usize, k: &[i64]) -> Complex<T> {
        let n = self.grid.points_per_axis() as i64;
        let multi: Vec<usize> = k.iter().map(|&ki| ki.rem_euclid(n) as usize).collect();
        self.component(component)[self.grid.node_index(&multi)]
    }

    /// Largest violation of `c_{-k} = conj(c_k)`.
    pub fn conjugate_symmetry_defect(&self) -> T {
        let g = self.grid;
        let n = g.points_per_axis();
        let d = g.dim();
        let mut multi = vec![0usize; d];
        let mut neg = vec![0usize; d];
        let mut worst = T::zero();
        for c in 0..self.components {
            let cc = self.component(c);
            for idx in 0..g.node_count() {
                g.multi_index(idx, &mut multi);
                for (a, &m) in multi.iter().enumerate() {
                    neg[a] = (n - m) % n;
                }
                let diff = cc[idx] - cc[g.node_index(&neg)].conj();
                worst = worst.max(diff.norm());
            }
        }
        worst
    }

    /// Multiplies every coefficient by `m(k)`.
    pub fn apply(&mut self, m: impl Fn(&[i64]) -> Complex<T>) {
        let g = self.grid;
        let nodes = g.node_count();
        let mut multi = vec![0usize; g.dim()];
        let mut k = vec![0i64; g.dim()];
        for idx in 0..nodes {
            g.multi_index(idx, &mut multi);
            for (ka, &ma) in k.iter_mut().zip(&multi) {
                *ka = g.wavenumber(ma);
            }
            let factor = m(&k);
            for c in 0..self.components {
                self.coeffs[c * nodes + idx] *= factor;
            }
        }
    }
}

/// FFT plans for one grid.
#[derive(Clone)]
pub struct Spectral<T: Real> {
    grid: GridSpec,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Real> std::fmt::Debug for Spectral<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("grid", &self.grid).finish()
    }
}

impl<T: Real> Spectral<T> {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.points_per_axis();
        Self {
            grid,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    fn transform_axes(&self, data: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let g = self.grid;
        let n = g.points_per_axis();
        let total = g.node_count();
        if g.dim() == 1 {
            fft.process(data);
            return;
        }
        let mut line = vec![Complex::default(); n];
        for axis in 0..g.dim() {
            let stride = n.pow(axis as u32);
            for start in 0..total {
                if (start / stride) % n != 0 {
                    continue;
                }
                for (i, l) in line.iter_mut().enumerate() {
                    *l = data[start + i * stride];
                }
                fft.process(&mut line);
                for (i, l) in line.iter().enumerate() {
                    data[start + i * stride] = *l;
                }
            }
        }
    }

    pub fn forward(&self, field: &PeriodicField<T>) -> Result<SpectralCoeffs<T>> {
        self.check_grid(field.grid())?;
        ensure_finite(field.values(), "field values")?;
        let nodes = self.grid.node_count();
        let comps = field.components();
        let scale = T::one() / T::of_usize(nodes);
        let mut coeffs = vec![Complex::default(); nodes * comps];
        for c in 0..comps {
            let block = &mut coeffs[c * nodes..(c + 1) * nodes];
            for (node, z) in block.iter_mut().enumerate() {
                *z = Complex::new(field.values()[node * comps + c], T::zero());
            }
            self.transform_axes(block, &self.forward);
            for z in block.iter_mut() {
                *z = *z * scale;
            }
        }
        Ok(SpectralCoeffs {
            grid: self.grid,
            components: comps,
            coeffs,
        })
    }

    /// Real part of the synthesized field.
    pub fn inverse(&self, coeffs: &SpectralCoeffs<T>) -> Result<PeriodicField<T>> {
        self.check_grid(coeffs.grid)?;
        let nodes = self.grid.node_count();
        let comps = coeffs.components;
        let mut values = vec![T::zero(); nodes * comps];
        let mut block = vec![Complex::default(); nodes];
        for c in 0..comps {
            block.copy_from_slice(coeffs.component(c));
            self.transform_axes(&mut block, &self.inverse);
            for (node, z) in block.iter().enumerate() {
                values[node * comps + c] = z.re;
            }
        }
        PeriodicField::new(self.grid, comps, values)
    }

    fn check_grid(&self, grid: GridSpec) -> Result<()> {
        if grid != self.grid {
            return Err(Error::ShapeMismatch(format!(
                "transform planned for {:?}, got {:?}",
                self.grid, grid
            )));
        }
        Ok(())
    }

    /// Jacobian field: component `i * dim + j` is `∂f_i/∂θ_j`.
    pub fn gradient(&self, field: &PeriodicField<T>) -> Result<PeriodicField<T>> {
        let g = self.grid;
        let d = g.dim();
        let comps = field.components();
        let coeffs = self.forward(field)?;
        let nodes = g.node_count();
        let mut out = vec![T::zero(); nodes * comps * d];
        for axis in 0..d {
            let mut dc = coeffs.clone();
            dc.apply(|k| {
                let ka = k[axis];
                // The Nyquist mode has no odd derivative on a real grid.
                if ka.unsigned_abs() as usize * 2 == g.points_per_axis() {
                    Complex::default()
                } else {
                    Complex::new(T::zero(), T::of(ka as f64))
                }
            });
            let deriv = self.inverse(&dc)?;
            for node in 0..nodes {
                for i in 0..comps {
                    out[node * comps * d + i * d + axis] = deriv.values()[node * comps + i];
                }
            }
        }
        PeriodicField::new(g, comps * d, out)
    }

    pub fn laplacian(&self, field: &PeriodicField<T>) -> Result<PeriodicField<T>> {
        let mut coeffs = self.forward(field)?;
        coeffs.apply(|k| Complex::new(-T::of(k.iter().map(|&x| (x * x) as f64).sum()), T::zero()));
        self.inverse(&coeffs)
    }

    pub fn sobolev_norm(&self, field: &PeriodicField<T>, alpha: f64) -> Result<T> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("Sobolev order must be >= 0, got {alpha}")));
        }
        let coeffs = self.forward(field)?;
        let g = self.grid;
        let nodes = g.node_count();
        let mut multi = vec![0usize; g.dim()];
        let mut sum = 0.0f64;
        for idx in 0..nodes {
            g.multi_index(idx, &mut multi);
            let k2: f64 = multi.iter().map(|&m| (g.wavenumber(m) as f64).powi(2)).sum();
            let weight = (1.0 + k2).powf(alpha);
            for c in 0..coeffs.components {
                sum += weight * coeffs.coeffs[c * nodes + idx].norm_sqr().as_f64();
            }
        }
        Ok(T::of(sum.sqrt()))
    }

    /// Zeroes every mode with some `|k_a|` above the 2/3-rule cutoff.
    pub fn dealias(&self, coeffs: &mut SpectralCoeffs<T>) {
        let cutoff = self.grid.dealias_cutoff();
        coeffs.apply(|k| {
            if k.iter().any(|&ka| ka.abs() > cutoff) {
                Complex::default()
            } else {
                Complex::new(T::one(), T::zero())
            }
        });
    }
}

pub fn spectral_gradient<T: Real>(field: &PeriodicField<T>) -> Result<PeriodicField<T>> {
    Spectral::new(field.grid()).gradient(field)
}

pub fn spectral_laplacian<T: Real>(field: &PeriodicField<T>) -> Result<PeriodicField<T>> {
    Spectral::new(field.grid()).laplacian(field)
}

/// `(Σ_k (1+|k|²)^α |c_k|²)^{1/2}` summed over components.
pub fn sobolev_norm<T: Real>(field: &PeriodicField<T>, alpha: f64) -> Result<T> {
    Spectral::new(field.grid()).sobolev_norm(field, alpha)
}
