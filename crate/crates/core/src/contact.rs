//! Mould displacement, membrane obstacle problem and contact-set
//! extraction.

use crate::discretization::{
    assemble_atheta, assemble_dirichlet_laplacian, FieldKind, Grid, ScalarField,
};
use crate::error::{Error, Result};
use crate::linalg::{attainable_tol, cg_solve_from, psor_solve_from, LcpProblem, SolveStats};
use crate::scalar::Real;
use crate::thermal::{CoefficientFunction, Coefficients};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContactParams<T> {
    /// Gap below which a node counts as touching; `None` picks
    /// [`default_delta_contact`].
    pub delta_contact: Option<T>,
    pub omega: T,
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ContactParams<T> {
    fn default() -> Self {
        Self {
            delta_contact: None,
            omega: T::lit(1.5),
            tol: T::default_tol(),
            max_iter: 200_000,
        }
    }
}

impl<T: Real> ContactParams<T> {
    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.delta_contact {
            if !(d > T::zero()) {
                return Err(Error::InvalidParameter(format!("contact threshold must be positive, got {d}")));
            }
        }
        if !(self.omega > T::zero() && self.omega < T::lit(2.0)) {
            return Err(Error::InvalidParameter(format!("relaxation {} outside (0, 2)", self.omega)));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }

    /// Threshold actually used for the given load.
    pub fn delta_for(&self, f: &ScalarField<T>, a: &CoefficientFunction<T>) -> T {
        self.delta_contact
            .unwrap_or_else(|| default_delta_contact(f, a, self.tol))
    }
}

/// `h² ‖f‖∞ / λ₁`, floored at `100·tol` so that zero loads still get a
/// positive threshold.
pub fn default_delta_contact<T: Real>(f: &ScalarField<T>, a: &CoefficientFunction<T>, tol: T) -> T {
    let h = f.grid().spacing::<T>();
    (h * h * f.max_abs() / a.lower()).max(T::lit(100.0) * tol)
}

fn same_grid<T: Real>(grid: Grid, f: &ScalarField<T>) -> Result<()> {
    if f.grid() != grid {
        return Err(Error::ShapeMismatch {
            expected: grid.node_count(),
            found: f.values().len(),
        });
    }
    Ok(())
}

/// Solves `-ΔΦ = α(θ₁ - θ₂)χ + g`, `Φ = 0` on the boundary.
pub fn solve_mould<T: Real>(
    grid: Grid,
    alpha: T,
    theta1: &ScalarField<T>,
    theta2: &ScalarField<T>,
    chi: &ScalarField<T>,
    g: &ScalarField<T>,
    tol: T,
) -> Result<ScalarField<T>> {
    solve_mould_from(grid, alpha, theta1, theta2, chi, g, None, tol)
}

#[allow(clippy::too_many_arguments)]
pub fn solve_mould_from<T: Real>(
    grid: Grid,
    alpha: T,
    theta1: &ScalarField<T>,
    theta2: &ScalarField<T>,
    chi: &ScalarField<T>,
    g: &ScalarField<T>,
    init: Option<&ScalarField<T>>,
    tol: T,
) -> Result<ScalarField<T>> {
    for f in [theta1, theta2, chi, g] {
        same_grid(grid, f)?;
    }
    let slack = T::lit(1e-12);
    if chi.min() < -slack || chi.max() > T::one() + slack {
        return Err(Error::InvalidParameter("contact weight must lie in [0, 1]".into()));
    }
    let lap = assemble_dirichlet_laplacian(grid, |_, _| T::one())?;
    let rhs: Vec<T> = lap
        .interior()
        .iter()
        .map(|&p| alpha * (theta1.values()[p] - theta2.values()[p]) * chi.values()[p] + g.values()[p])
        .collect();
    let mut x = match init {
        Some(f) => f.interior_values(),
        None => vec![T::zero(); rhs.len()],
    };
    // ‖(-Δ)⁻¹‖∞ ≤ 1/8 on the unit box
    let tol = attainable_tol(lap.matrix(), T::lit(0.125), tol);
    cg_solve_from(lap.matrix(), &rhs, &mut x, tol, 20 * rhs.len() + 100).require("mould solve")?;
    Ok(ScalarField::from_interior(grid, &x))
}

/// Obstacle problem `u ≤ Φ`, `A_θu ≤ f`, `(A_θu - f)(u - Φ) = 0`.
pub fn solve_membrane<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    theta1: &ScalarField<T>,
    f: &ScalarField<T>,
    phi: &ScalarField<T>,
    params: &ContactParams<T>,
) -> Result<(ScalarField<T>, SolveStats)> {
    solve_membrane_from(grid, coeffs, theta1, f, phi, None, params)
}

/// Warm-started variant of [`solve_membrane`]; `init` is projected below
/// the obstacle before the first sweep.
pub fn solve_membrane_from<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    theta1: &ScalarField<T>,
    f: &ScalarField<T>,
    phi: &ScalarField<T>,
    init: Option<&ScalarField<T>>,
    params: &ContactParams<T>,
) -> Result<(ScalarField<T>, SolveStats)> {
    params.validate()?;
    for v in [theta1, f, phi] {
        same_grid(grid, v)?;
    }
    let op = assemble_atheta(grid, &coeffs.a, theta1)?;
    let rhs: Vec<T> = op.interior().iter().map(|&p| f.values()[p]).collect();
    let upper: Vec<Option<T>> = op.interior().iter().map(|&p| Some(phi.values()[p])).collect();
    let mut x = match init {
        Some(u) => {
            same_grid(grid, u)?;
            u.interior_values()
        }
        None => upper.iter().map(|u| u.map_or(T::zero(), |v| v.min(T::zero()))).collect(),
    };
    // rounding floor of the natural residual, from a size estimate of u
    let size = x
        .iter()
        .fold(T::one().max(f.max_abs() / (T::lit(8.0) * coeffs.a.lower())), |m, v| m.max(v.abs()));
    let lcp = LcpProblem::new(op.matrix().clone(), rhs, upper)?;
    let floor = T::lit(10.0) * T::epsilon() * lcp.matrix.norm_inf() * size / lcp.scale();
    let stats = psor_solve_from(&lcp, &mut x, params.omega, params.tol.max(floor), params.max_iter)?;
    stats.require("membrane obstacle solve")?;
    Ok((ScalarField::from_interior(grid, &x), stats))
}

/// Binary contact indicator: 1 at interior nodes with `Φ - u ≤ δ`, 0
/// elsewhere (boundary nodes are never counted as contact).
pub fn contact_set<T: Real>(u: &ScalarField<T>, phi: &ScalarField<T>, delta: T) -> ScalarField<T> {
    let grid = u.grid();
    let vals = (0..grid.node_count())
        .map(|p| {
            let touching = !grid.is_boundary(p) && phi.values()[p] - u.values()[p] <= delta;
            if touching {
                T::one()
            } else {
                T::zero()
            }
        })
        .collect();
    ScalarField::new(grid, vals, FieldKind::ZeroTrace).expect("binary values are finite")
}

/// Largest violation at interior nodes of `min(f, A_θΦ) ≤ A_θu ≤ f`.
///
/// With `band = Some(χ)`, nodes whose stencil meets both contact and
/// non-contact nodes of `χ` are skipped.
pub fn lewy_stampacchia_violation<T: Real>(
    coeffs: &Coefficients<T>,
    theta1: &ScalarField<T>,
    u: &ScalarField<T>,
    phi: &ScalarField<T>,
    f: &ScalarField<T>,
    band: Option<&ScalarField<T>>,
) -> Result<T> {
    let grid = u.grid();
    let op = assemble_atheta(grid, &coeffs.a, theta1)?;
    let au = op.apply(u);
    let aphi = op.apply(phi);
    let mut worst = T::zero();
    for &p in op.interior() {
        if let Some(chi) = band {
            let c = chi.values()[p];
            if grid
                .neighbors(p)
                .any(|q| !grid.is_boundary(q) && chi.values()[q] != c)
            {
                continue;
            }
        }
        let (lo, hi) = (f.values()[p].min(aphi.values()[p]), f.values()[p]);
        let v = au.values()[p];
        worst = worst.max(lo - v).max(v - hi);
    }
    Ok(worst)
}

/// Discrete `∫ χ (Φ - u)⁺`.
pub fn contact_identity<T: Real>(chi: &ScalarField<T>, u: &ScalarField<T>, phi: &ScalarField<T>) -> T {
    let gap = phi.zip_map(u, |p, v| (p - v).pos());
    chi.zip_map(&gap, |c, d| c * d).integrate()
}
