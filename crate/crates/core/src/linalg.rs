//! Iterative solvers: Jacobi-preconditioned conjugate gradients for SPD
//! systems and projected SOR for the upper-obstacle complementarity problem
//!
//! ```text
//! x ≤ ψ,   A x ≤ b,   (A x − b)ᵢ (xᵢ − ψᵢ) = 0.
//! ```

use serde::Serialize;

use crate::discretization::SparseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveStats {
    pub iterations: usize,
    /// Scaled residual; see each solver for its normalisation.
    pub residual: f64,
    pub converged: bool,
}

impl SolveStats {
    /// Turns a non-converged solve into an error.
    pub fn require(self, what: &'static str) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence {
                what,
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

fn norm2<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Solves `A x = b` from `x = 0`. The reported residual is
/// `‖A x − b‖₂ / max(1, ‖b‖₂)`.
pub fn cg_solve<T: Real>(a: &SparseMatrix<T>, b: &[T], tol: T, max_iter: usize) -> (Vec<T>, SolveStats) {
    let mut x = vec![T::zero(); b.len()];
    let stats = cg_solve_from(a, b, &mut x, tol, max_iter);
    (x, stats)
}

/// Warm-started conjugate gradients; `x` holds the initial guess on entry.
pub fn cg_solve_from<T: Real>(
    a: &SparseMatrix<T>,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
) -> SolveStats {
    let n = b.len();
    assert_eq!(a.dim(), n);
    assert_eq!(x.len(), n);
    let scale = norm2(b).max(T::one());
    let inv_diag: Vec<T> = a
        .diagonal()
        .into_iter()
        .map(|d| if d > T::zero() { T::one() / d } else { T::one() })
        .collect();

    let mut r = a.mul_vec(x);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let mut res = norm2(&r) / scale;
    if res <= tol {
        return SolveStats {
            iterations: 0,
            residual: res.to_f64_lossy(),
            converged: true,
        };
    }
    let mut z: Vec<T> = r.iter().zip(&inv_diag).map(|(&ri, &m)| ri * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    for it in 1..=max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > T::zero()) {
            // not SPD along p, or breakdown
            return SolveStats {
                iterations: it,
                residual: res.to_f64_lossy(),
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] = x[i] + alpha * p[i];
            r[i] = r[i] - alpha * ap[i];
        }
        res = norm2(&r) / scale;
        if res <= tol {
            // confirm against the true residual to guard against drift
            let mut true_r = a.mul_vec(x);
            for (ri, &bi) in true_r.iter_mut().zip(b) {
                *ri = bi - *ri;
            }
            let true_res = norm2(&true_r) / scale;
            if true_res <= tol {
                return SolveStats {
                    iterations: it,
                    residual: true_res.to_f64_lossy(),
                    converged: true,
                };
            }
            // recurrence drifted: restart from the true residual
            r = true_r;
            res = true_res;
            for i in 0..n {
                z[i] = r[i] * inv_diag[i];
                p[i] = z[i];
            }
            rz = dot(&r, &z);
            continue;
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    SolveStats {
        iterations: max_iter,
        residual: res.to_f64_lossy(),
        converged: false,
    }
}

/// Smallest relative residual worth asking of CG on `a`, given a bound
/// `inv_bound ≥ ‖a⁻¹‖∞`: below roughly `ε‖a‖∞‖a⁻¹‖∞` rounding dominates.
pub fn attainable_tol<T: Real>(a: &SparseMatrix<T>, inv_bound: T, tol: T) -> T {
    tol.max(T::lit(10.0) * T::epsilon() * a.norm_inf() * inv_bound)
}

/// Upper-obstacle linear complementarity problem. `None` entries in `upper`
/// are unconstrained.
#[derive(Debug, Clone)]
pub struct LcpProblem<T> {
    pub matrix: SparseMatrix<T>,
    pub rhs: Vec<T>,
    pub upper: Vec<Option<T>>,
}

impl<T: Real> LcpProblem<T> {
    pub fn new(matrix: SparseMatrix<T>, rhs: Vec<T>, upper: Vec<Option<T>>) -> Result<Self> {
        let n = matrix.dim();
        for len in [rhs.len(), upper.len()] {
            if len != n {
                return Err(Error::ShapeMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        Ok(Self { matrix, rhs, upper })
    }

    /// Natural residual `max_i |min(ψᵢ − xᵢ, bᵢ − (A x)ᵢ)|`, unscaled.
    pub fn natural_residual(&self, x: &[T]) -> T {
        let mut worst = T::zero();
        for i in 0..x.len() {
            let slack = self.rhs[i] - self.matrix.row_dot(i, x);
            let r = match self.upper[i] {
                Some(psi) => (psi - x[i]).min(slack),
                None => slack,
            };
            worst = worst.max(r.abs());
        }
        worst
    }

    /// `1 + ‖b‖_∞`, the scale the natural residual is measured against.
    pub fn scale(&self) -> T {
        T::one() + self.rhs.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

/// Projected SOR from `x = min(0, ψ)`. The residual in the returned stats
/// is the natural residual divided by `1 + ‖b‖_∞`.
pub fn psor_solve<T: Real>(p: &LcpProblem<T>, omega: T, tol: T, max_iter: usize) -> Result<(Vec<T>, SolveStats)> {
    let mut x: Vec<T> = p
        .upper
        .iter()
        .map(|u| u.map_or(T::zero(), |psi| psi.min(T::zero())))
        .collect();
    let stats = psor_solve_from(p, &mut x, omega, tol, max_iter)?;
    Ok((x, stats))
}

const RESIDUAL_STRIDE: usize = 4;

/// Warm-started projected SOR. Sweeps in ascending index order; after the
/// relaxation step each component is projected onto `xᵢ ≤ ψᵢ`.
pub fn psor_solve_from<T: Real>(
    p: &LcpProblem<T>,
    x: &mut [T],
    omega: T,
    tol: T,
    max_iter: usize,
) -> Result<SolveStats> {
    if !(omega > T::zero() && omega < T::lit(2.0)) {
        return Err(Error::InvalidParameter(format!("relaxation {omega} outside (0, 2)")));
    }
    let n = p.matrix.dim();
    assert_eq!(x.len(), n);
    let diag = p.matrix.diagonal();
    if let Some(i) = diag.iter().position(|&d| !(d > T::zero())) {
        return Err(Error::InvalidParameter(format!("non-positive diagonal at row {i}")));
    }
    for (xi, u) in x.iter_mut().zip(&p.upper) {
        if let Some(psi) = *u {
            *xi = xi.min(psi);
        }
    }
    let scale = p.scale();
    let mut res = p.natural_residual(x) / scale;
    if res <= tol {
        return Ok(SolveStats {
            iterations: 0,
            residual: res.to_f64_lossy(),
            converged: true,
        });
    }
    for it in 1..=max_iter {
        for i in 0..n {
            let r = p.rhs[i] - p.matrix.row_dot(i, x);
            let mut xi = x[i] + omega * r / diag[i];
            if let Some(psi) = p.upper[i] {
                xi = xi.min(psi);
            }
            x[i] = xi;
        }
        // the residual costs as much as a sweep; sample it periodically
        if it % RESIDUAL_STRIDE != 0 && it != max_iter {
            continue;
        }
        res = p.natural_residual(x) / scale;
        if res <= tol {
            return Ok(SolveStats {
                iterations: it,
                residual: res.to_f64_lossy(),
                converged: true,
            });
        }
    }
    Ok(SolveStats {
        iterations: max_iter,
        residual: res.to_f64_lossy(),
        converged: false,
    })
}
