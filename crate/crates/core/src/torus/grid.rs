use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform grid on the n-torus `[0, 2π)^n` with `N` points per axis.
///
/// Nodes are numbered with axis 0 varying fastest. The grid points
/// themselves play the role of the identity map of the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    dim: usize,
    points_per_axis: usize,
}

impl GridSpec {
    pub fn new(dim: usize, points_per_axis: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidGrid("dimension must be positive".into()));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {points_per_axis}"
            )));
        }
        let nodes = points_per_axis.checked_pow(dim as u32);
        if nodes.is_none_or(|n| n > (1 << 28)) {
            return Err(Error::InvalidGrid(format!(
                "{points_per_axis}^{dim} nodes is too large"
            )));
        }
        Ok(Self {
            dim,
            points_per_axis,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn points_per_axis(&self) -> usize {
        self.points_per_axis
    }

    #[inline]
    pub fn node_count(&self) -> usize {
        self.points_per_axis.pow(self.dim as u32)
    }

    pub fn period(&self) -> f64 {
        TAU
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::of(TAU / self.points_per_axis as f64)
    }

    /// Coordinate of index `i` along any axis: `i·2π/N`.
    #[inline]
    pub fn coordinate<T: Real>(&self, i: usize) -> T {
        T::of(i as f64 * TAU / self.points_per_axis as f64)
    }

    pub fn multi_index(&self, mut node: usize, out: &mut [usize]) {
        for slot in out.iter_mut().take(self.dim) {
            *slot = node % self.points_per_axis;
            node /= self.points_per_axis;
        }
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .rev()
            .fold(0, |acc, &i| acc * self.points_per_axis + i % self.points_per_axis)
    }

    /// Writes the coordinates of `node` into `out[..dim]`.
    pub fn point<T: Real>(&self, node: usize, out: &mut [T]) {
        let mut rest = node;
        for slot in out.iter_mut().take(self.dim) {
            *slot = self.coordinate(rest % self.points_per_axis);
            rest /= self.points_per_axis;
        }
    }

    /// All node coordinates, flattened `node * dim + axis`.
    pub fn points<T: Real>(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.node_count() * self.dim];
        for (node, chunk) in out.chunks_exact_mut(self.dim).enumerate() {
            self.point(node, chunk);
        }
        out
    }

    /// Signed wavenumber of FFT index `i`; the Nyquist index maps to `+N/2`.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> i64 {
        let n = self.points_per_axis as i64;
        let i = i as i64;
        if i <= n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.points_per_axis / 2
    }

    /// Largest wavenumber kept by the 2/3 dealiasing rule.
    pub fn dealias_cutoff(&self) -> i64 {
        (self.points_per_axis / 3) as i64
    }

    /// Same dimension, `N` doubled.
    pub fn refined(&self) -> Result<Self> {
        Self::new(self.dim, self.points_per_axis * 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_or_small() {
        assert!(GridSpec::new(1, 7).is_err());
        assert!(GridSpec::new(1, 6).is_err());
        assert!(GridSpec::new(1, 9).is_err());
        assert!(GridSpec::new(0, 16).is_err());
        assert!(GridSpec::new(2, 8).is_ok());
    }

    #[test]
    fn coordinates_are_uniform() {
        let g = GridSpec::new(1, 16).unwrap();
        assert_eq!(g.spacing::<f64>(), TAU / 16.0);
        for j in 0..16 {
            assert_eq!(g.coordinate::<f64>(j), j as f64 * TAU / 16.0);
        }
    }

    #[test]
    fn node_index_round_trips() {
        let g = GridSpec::new(3, 8).unwrap();
        let mut m = [0usize; 3];
        for node in 0..g.node_count() {
            g.multi_index(node, &mut m);
            assert_eq!(g.node_index(&m), node);
        }
    }

    #[test]
    fn wavenumbers() {
        let g = GridSpec::new(1, 8).unwrap();
        let k: Vec<i64> = (0..8).map(|i| g.wavenumber(i)).collect();
        assert_eq!(k, vec![0, 1, 2, 3, 4, -3, -2, -1]);
        assert_eq!(g.dealias_cutoff(), 2);
    }
}
