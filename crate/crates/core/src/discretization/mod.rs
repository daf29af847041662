//! Structured grids, nodal fields, sparse storage and the discrete
//! differential operators built on them.

mod field;
mod grid;
mod operators;
mod sparse;

pub use field::{FieldKind, ScalarField};
pub use grid::Grid;
pub use operators::{
    assemble_atheta, assemble_dirichlet_laplacian, assemble_neumann_helmholtz, interior_of,
    nodal_gradient, DirichletOperator, NeumannOperator,
};
pub use sparse::{SparseMatrix, TripletBuilder};

use crate::error::Result;

/// Convenience constructor mirroring [`Grid::new`].
pub fn build_grid(dim: usize, n: usize) -> Result<Grid> {
    Grid::new(dim, n)
}

/// Trapezoidal integral of a field over the unit box.
pub fn integrate<T: crate::Real>(field: &ScalarField<T>) -> T {
    field.integrate()
}
