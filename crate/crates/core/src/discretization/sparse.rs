use std::collections::BTreeMap;

use crate::scalar::Real;

/// Square matrix in compressed sparse row storage.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix<T> {
    dim: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

/// Accumulates `(row, col, value)` contributions; duplicates are summed.
#[derive(Debug, Clone)]
pub struct TripletBuilder<T> {
    dim: usize,
    rows: Vec<BTreeMap<usize, T>>,
}

impl<T: Real> TripletBuilder<T> {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            rows: vec![BTreeMap::new(); dim],
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: T) {
        debug_assert!(row < self.dim && col < self.dim);
        let slot = self.rows[row].entry(col).or_insert_with(T::zero);
        *slot = *slot + value;
    }

    pub fn build(self) -> SparseMatrix<T> {
        let mut row_offsets = Vec::with_capacity(self.dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_offsets.push(0);
        for row in self.rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_offsets.push(cols.len());
        }
        SparseMatrix {
            dim: self.dim,
            row_offsets,
            cols,
            vals,
        }
    }
}

impl<T: Real> SparseMatrix<T> {
    pub fn identity(dim: usize) -> Self {
        let mut b = TripletBuilder::new(dim);
        for i in 0..dim {
            b.add(i, i, T::one());
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// `(col, value)` pairs of one row, columns ascending.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let span = self.row_offsets[i]..self.row_offsets[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => T::zero(),
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_vec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).fold(T::zero(), |acc, (j, a)| acc + a * x[j]);
        }
    }

    /// Product of row `i` with `x`.
    pub fn row_dot(&self, i: usize, x: &[T]) -> T {
        self.row(i).fold(T::zero(), |acc, (j, a)| acc + a * x[j])
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.dim)
            .map(|i| self.row(i).fold(T::zero(), |acc, (_, a)| acc + a))
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> T {
        (0..self.dim)
            .map(|i| self.row(i).fold(T::zero(), |acc, (_, a)| acc + a.abs()))
            .fold(T::zero(), T::max)
    }

    /// `max |A - Aᵀ|` over all stored entries.
    pub fn asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            vals: self.vals.iter().map(|&v| v * s).collect(),
            ..self.clone()
        }
    }

    /// `A + diag(d)`.
    pub fn plus_diagonal(&self, d: &[T]) -> Self {
        assert_eq!(d.len(), self.dim);
        let mut b = TripletBuilder::new(self.dim);
        for i in 0..self.dim {
            for (j, a) in self.row(i) {
                b.add(i, j, a);
            }
            b.add(i, i, d[i]);
        }
        b.build()
    }
}
