use serde::Serialize;

use super::grid::Grid;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Boundary treatment attached to a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FieldKind {
    /// No constraint on boundary values (temperatures, sources).
    Free,
    /// Boundary nodal values are exactly zero (mould, membrane).
    ZeroTrace,
}

/// Nodal values of one scalar quantity on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField<T> {
    grid: Grid,
    values: Vec<T>,
    kind: FieldKind,
}

impl<T: Real> ScalarField<T> {
    pub fn new(grid: Grid, values: Vec<T>, kind: FieldKind) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::ShapeMismatch {
                expected: grid.node_count(),
                found: values.len(),
            });
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite field value at node {p}"
            )));
        }
        if kind == FieldKind::ZeroTrace {
            if let Some(p) = (0..values.len()).find(|&p| grid.is_boundary(p) && values[p] != T::zero())
            {
                return Err(Error::InvalidParameter(format!(
                    "zero-trace field has nonzero boundary value at node {p}"
                )));
            }
        }
        Ok(Self { grid, values, kind })
    }

    pub fn constant(grid: Grid, c: T) -> Self {
        Self {
            grid,
            values: vec![c; grid.node_count()],
            kind: FieldKind::Free,
        }
    }

    pub fn zeros(grid: Grid) -> Self {
        Self::constant(grid, T::zero())
    }

    pub fn zero_trace_zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![T::zero(); grid.node_count()],
            kind: FieldKind::ZeroTrace,
        }
    }

    /// Samples `f(x, y)` at every node (`y = 0` in 1D).
    pub fn from_fn(grid: Grid, f: impl Fn(T, T) -> T) -> Self {
        let values = (0..grid.node_count())
            .map(|p| {
                let [x, y] = grid.coords::<T>(p);
                f(x, y)
            })
            .collect();
        Self {
            grid,
            values,
            kind: FieldKind::Free,
        }
    }

    /// Samples `f` at interior nodes and pins the boundary to zero.
    pub fn zero_trace_from_fn(grid: Grid, f: impl Fn(T, T) -> T) -> Self {
        let mut field = Self::from_fn(grid, f);
        field.kind = FieldKind::ZeroTrace;
        field.pin_boundary();
        field
    }

    /// Builds a zero-trace field from values at interior nodes, in the
    /// ordering of [`Grid::interior_nodes`].
    pub fn from_interior(grid: Grid, interior: &[T]) -> Self {
        let mut values = vec![T::zero(); grid.node_count()];
        for (&p, &v) in grid.interior_nodes().iter().zip(interior) {
            values[p] = v;
        }
        Self {
            grid,
            values,
            kind: FieldKind::ZeroTrace,
        }
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn kind(&self) -> FieldKind {
        self.kind
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn interior_values(&self) -> Vec<T> {
        self.grid
            .interior_nodes()
            .into_iter()
            .map(|p| self.values[p])
            .collect()
    }

    /// Re-tags the field as zero-trace, overwriting boundary values with 0.
    pub fn into_zero_trace(mut self) -> Self {
        self.kind = FieldKind::ZeroTrace;
        self.pin_boundary();
        self
    }

    fn pin_boundary(&mut self) {
        for p in 0..self.values.len() {
            if self.grid.is_boundary(p) {
                self.values[p] = T::zero();
            }
        }
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            kind: FieldKind::Free,
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        debug_assert_eq!(self.grid, other.grid);
        Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            kind: FieldKind::Free,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn min(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_abs(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    /// Max-norm distance to another field on the same grid.
    pub fn dist_inf(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    /// Trapezoidal integral over the unit box; exact for constants and
    /// (multi)linear fields.
    pub fn integrate(&self) -> T {
        self.values
            .iter()
            .enumerate()
            .map(|(p, &v)| self.grid.weight::<T>(p) * v)
            .sum()
    }

    /// Discrete L¹ norm with trapezoidal weights.
    pub fn l1_norm(&self) -> T {
        self.map(T::abs).integrate()
    }

    /// Discrete L² norm with trapezoidal weights.
    pub fn l2_norm(&self) -> T {
        self.map(|v| v * v).integrate().sqrt()
    }
}
