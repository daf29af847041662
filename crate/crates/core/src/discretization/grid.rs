use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Uniform structured grid on the unit interval (`dim == 1`) or the unit
/// square (`dim == 2`).
///
/// Nodes are numbered row-major: node `(i, j)` has index `j * (n + 1) + i`,
/// with `i` running along `x`. In 1D `j` is always 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct Grid {
    dim: usize,
    n: usize,
}

impl Grid {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::UnsupportedDimension(dim));
        }
        if n < 2 {
            return Err(Error::GridTooCoarse(n));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Cells per axis.
    pub fn cells(&self) -> usize {
        self.n
    }

    /// Nodes per axis.
    pub fn nodes_per_axis(&self) -> usize {
        self.n + 1
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_axis().pow(self.dim as u32)
    }

    pub fn spacing<T: Real>(&self) -> T {
        T::one() / T::from_count(self.n)
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i <= self.n && j <= self.n);
        debug_assert!(self.dim == 2 || j == 0);
        j * self.nodes_per_axis() + i
    }

    /// Lattice coordinates `(i, j)` of a node index.
    pub fn lattice(&self, idx: usize) -> (usize, usize) {
        let m = self.nodes_per_axis();
        (idx % m, idx / m)
    }

    pub fn coords<T: Real>(&self, idx: usize) -> [T; 2] {
        let (i, j) = self.lattice(idx);
        let n = T::from_count(self.n);
        [T::from_count(i) / n, T::from_count(j) / n]
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (i, j) = self.lattice(idx);
        let on_x = i == 0 || i == self.n;
        if self.dim == 1 {
            on_x
        } else {
            on_x || j == 0 || j == self.n
        }
    }

    /// Number of grid axes along which the node sits on the boundary.
    fn boundary_axes(&self, idx: usize) -> usize {
        let (i, j) = self.lattice(idx);
        let mut k = usize::from(i == 0 || i == self.n);
        if self.dim == 2 {
            k += usize::from(j == 0 || j == self.n);
        }
        k
    }

    /// Trapezoidal (lumped mass) weight of a node: `h^dim`, halved once per
    /// boundary axis the node lies on. The weights sum to 1.
    pub fn weight<T: Real>(&self, idx: usize) -> T {
        let h = self.spacing::<T>();
        let cell = if self.dim == 1 { h } else { h * h };
        let half = T::lit(0.5);
        (0..self.boundary_axes(idx)).fold(cell, |w, _| w * half)
    }

    pub fn weights<T: Real>(&self) -> Vec<T> {
        (0..self.node_count()).map(|p| self.weight(p)).collect()
    }

    pub fn interior_nodes(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&p| !self.is_boundary(p))
            .collect()
    }

    /// Lattice neighbours of a node (2 or 4 in the interior, fewer on the
    /// boundary), in ascending index order.
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (i, j) = self.lattice(idx);
        let n = self.n;
        let m = self.nodes_per_axis();
        let two_d = self.dim == 2;
        let below = (two_d && j > 0).then(|| idx - m);
        let left = (i > 0).then(|| idx - 1);
        let right = (i < n).then(|| idx + 1);
        let above = (two_d && j < n).then(|| idx + m);
        [below, left, right, above].into_iter().flatten()
    }

    /// Each lattice edge once, as `(p, q)` with `p < q`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for p in 0..self.node_count() {
            for q in self.neighbors(p) {
                if p < q {
                    out.push((p, q));
                }
            }
        }
        out
    }

    /// Whether edge `(p, q)` runs along the boundary (both ends on the same
    /// boundary line). Only possible in 2D.
    pub fn edge_on_boundary(&self, p: usize, q: usize) -> bool {
        if self.dim == 1 {
            return false;
        }
        let (ip, jp) = self.lattice(p);
        let (iq, jq) = self.lattice(q);
        let n = self.n;
        (ip == iq && (ip == 0 || ip == n)) || (jp == jq && (jp == 0 || jp == n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_grid() {
        let g = Grid::new(1, 4).unwrap();
        assert_eq!(g.node_count(), 5);
        assert_eq!(g.spacing::<f64>(), 0.25);
        let xs: Vec<f64> = (0..5).map(|p| g.coords::<f64>(p)[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn two_dimensional_grid() {
        let g = Grid::new(2, 2).unwrap();
        assert_eq!(g.node_count(), 9);
        assert_eq!(g.spacing::<f64>(), 0.5);
        assert_eq!(g.interior_nodes(), vec![4]);
        assert_eq!(g.neighbors(4).collect::<Vec<_>>(), vec![1, 3, 5, 7]);
        assert_eq!(g.edges().len(), 12);
    }

    #[test]
    fn rejects_too_coarse_and_bad_dimension() {
        assert_eq!(Grid::new(1, 1), Err(Error::GridTooCoarse(1)));
        assert_eq!(Grid::new(3, 4), Err(Error::UnsupportedDimension(3)));
    }

    #[test]
    fn lattice_indexing_is_bijective() {
        let g = Grid::new(2, 5).unwrap();
        for p in 0..g.node_count() {
            let (i, j) = g.lattice(p);
            assert_eq!(g.index(i, j), p);
        }
    }

    #[test]
    fn weights_sum_to_one() {
        for (dim, n) in [(1, 3), (1, 8), (2, 2), (2, 7)] {
            let g = Grid::new(dim, n).unwrap();
            let total: f64 = g.weights::<f64>().iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "dim {dim} n {n}: {total}");
        }
    }
}
