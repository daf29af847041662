//! Finite-difference operators on the unit box.
//!
//! The Neumann operator `-κΔ + c` is assembled in flux (finite-volume) form:
//! each lattice edge carries a conductance, boundary cells have halved mass,
//! and the stored matrix is `K + diag(w c)` with `w` the trapezoidal nodal
//! weights. In the interior this is the usual 5-point (3-point) stencil
//! scaled by `w`; at the boundary it coincides with the mirror-reflected
//! stencil. The scaled form is symmetric and its stiffness part has zero row
//! sums.
//!
//! Dirichlet operators act on interior unknowns only; boundary values are
//! eliminated (they are zero).

use super::field::{FieldKind, ScalarField};
use super::grid::Grid;
use super::sparse::{SparseMatrix, TripletBuilder};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::thermal::CoefficientFunction;

/// `-κΔ + c` with homogeneous Neumann closure.
#[derive(Debug, Clone)]
pub struct NeumannOperator<T> {
    grid: Grid,
    conductances: Vec<(usize, usize, T)>,
    weights: Vec<T>,
    reaction: Vec<T>,
    matrix: SparseMatrix<T>,
}

pub fn assemble_neumann_helmholtz<T: Real>(
    grid: Grid,
    kappa: T,
    reaction: &ScalarField<T>,
) -> Result<NeumannOperator<T>> {
    if reaction.grid() != grid {
        return Err(Error::ShapeMismatch {
            expected: grid.node_count(),
            found: reaction.values().len(),
        });
    }
    if !(kappa > T::zero()) {
        return Err(Error::InvalidParameter(format!("diffusivity must be positive, got {kappa}")));
    }
    let h = grid.spacing::<T>();
    // dual face length / edge length
    let base = if grid.dim() == 1 { kappa / h } else { kappa };
    let half = T::lit(0.5);
    let conductances: Vec<(usize, usize, T)> = grid
        .edges()
        .into_iter()
        .map(|(p, q)| {
            let k = if grid.edge_on_boundary(p, q) { base * half } else { base };
            (p, q, k)
        })
        .collect();
    let weights = grid.weights::<T>();
    let n = grid.node_count();
    let mut b = TripletBuilder::new(n);
    for &(p, q, k) in &conductances {
        b.add(p, p, k);
        b.add(q, q, k);
        b.add(p, q, -k);
        b.add(q, p, -k);
    }
    for p in 0..n {
        b.add(p, p, weights[p] * reaction.values()[p]);
    }
    Ok(NeumannOperator {
        grid,
        conductances,
        weights,
        reaction: reaction.values().to_vec(),
        matrix: b.build(),
    })
}

impl<T: Real> NeumannOperator<T> {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    /// Symmetric weighted matrix `K + diag(w c)`.
    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// Weighted action `K v + w c v`, evaluated edge by edge so that
    /// constants are annihilated exactly when `c = 0`.
    pub fn apply_weighted(&self, v: &[T]) -> Vec<T> {
        let mut out: Vec<T> = (0..v.len())
            .map(|p| self.weights[p] * self.reaction[p] * v[p])
            .collect();
        for &(p, q, k) in &self.conductances {
            let flux = k * (v[p] - v[q]);
            out[p] = out[p] + flux;
            out[q] = out[q] - flux;
        }
        out
    }

    /// Pointwise operator value `(-κΔ + c) v` at every node.
    pub fn apply(&self, v: &ScalarField<T>) -> ScalarField<T> {
        let mut out = self.apply_weighted(v.values());
        for (o, &w) in out.iter_mut().zip(&self.weights) {
            *o = *o / w;
        }
        ScalarField::new(self.grid, out, FieldKind::Free).expect("finite operator output")
    }
}

/// Divergence-form operator `-∇·(k ∇·)` restricted to interior nodes.
#[derive(Debug, Clone)]
pub struct DirichletOperator<T> {
    grid: Grid,
    interior: Vec<usize>,
    matrix: SparseMatrix<T>,
}

/// Assembles `-∇·(k∇·)` with zero Dirichlet data; `coeff_edge(p, q)` gives
/// the (positive) coefficient on the lattice edge between nodes `p` and `q`.
pub fn assemble_dirichlet_laplacian<T: Real>(
    grid: Grid,
    coeff_edge: impl Fn(usize, usize) -> T,
) -> Result<DirichletOperator<T>> {
    let interior = grid.interior_nodes();
    let mut slot = vec![usize::MAX; grid.node_count()];
    for (k, &p) in interior.iter().enumerate() {
        slot[p] = k;
    }
    let h = grid.spacing::<T>();
    let inv_h2 = T::one() / (h * h);
    let mut b = TripletBuilder::new(interior.len());
    for (row, &p) in interior.iter().enumerate() {
        for q in grid.neighbors(p) {
            let k = coeff_edge(p.min(q), p.max(q));
            if !(k > T::zero()) {
                return Err(Error::InvalidParameter(format!(
                    "edge coefficient must be positive, got {k} on ({p}, {q})"
                )));
            }
            b.add(row, row, k * inv_h2);
            if slot[q] != usize::MAX {
                b.add(row, slot[q], -k * inv_h2);
            }
        }
    }
    Ok(DirichletOperator {
        grid,
        interior,
        matrix: b.build(),
    })
}

/// `A_θ = -∇·(a(θ₁)∇·)` with edge coefficient the arithmetic mean of the
/// nodal values of `a(θ₁)`.
pub fn assemble_atheta<T: Real>(
    grid: Grid,
    a: &CoefficientFunction<T>,
    theta1: &ScalarField<T>,
) -> Result<DirichletOperator<T>> {
    let nodal: Vec<T> = theta1.values().iter().map(|&s| a.eval(s)).collect();
    let half = T::lit(0.5);
    assemble_dirichlet_laplacian(grid, |p, q| half * (nodal[p] + nodal[q]))
}

impl<T: Real> DirichletOperator<T> {
    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn matrix(&self) -> &SparseMatrix<T> {
        &self.matrix
    }

    /// Interior node indices, in unknown order.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Applies the operator to the interior values of `v` (boundary values
    /// are treated as zero). The result carries the operator value at
    /// interior nodes and zero on the boundary.
    pub fn apply(&self, v: &ScalarField<T>) -> ScalarField<T> {
        let x = v.interior_values();
        ScalarField::from_interior(self.grid, &self.matrix.mul_vec(&x))
    }
}

/// Interior unknowns of a field, in [`Grid::interior_nodes`] order.
pub fn interior_of<T: Real>(v: &ScalarField<T>) -> Vec<T> {
    v.interior_values()
}

/// Centered-difference gradient at every interior node (one-sided on the
/// boundary).
pub fn nodal_gradient<T: Real>(v: &ScalarField<T>) -> Vec<[T; 2]> {
    let grid = v.grid();
    let n = grid.cells();
    let h = grid.spacing::<T>();
    let two_h = h + h;
    let vals = v.values();
    (0..grid.node_count())
        .map(|p| {
            let (i, j) = grid.lattice(p);
            let dx = if i == 0 {
                (vals[p + 1] - vals[p]) / h
            } else if i == n {
                (vals[p] - vals[p - 1]) / h
            } else {
                (vals[p + 1] - vals[p - 1]) / two_h
            };
            let dy = if grid.dim() == 1 {
                T::zero()
            } else {
                let m = grid.nodes_per_axis();
                if j == 0 {
                    (vals[p + m] - vals[p]) / h
                } else if j == n {
                    (vals[p] - vals[p - m]) / h
                } else {
                    (vals[p + m] - vals[p - m]) / two_h
                }
            };
            [dx, dy]
        })
        .collect()
}
