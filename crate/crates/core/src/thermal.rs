//! The weakly coupled temperature pair
//!
//! ```text
//! -κ₁Δθ₁ + c₁θ₁ = h₁ - b₁(θ₁ - θ₂)σ
//! -κ₂Δθ₂ + c₂θ₂ = h₂ + b₂(θ₁ - θ₂)σ      ∂ₙθᵢ = 0
//! ```
//!
//! for a given exchange weight `σ ∈ [0, 1]`, together with the a-priori
//! bounds, comparison and L¹-dependence estimates it satisfies.

use serde::Serialize;

use crate::conditions::Gated;
use crate::discretization::{assemble_neumann_helmholtz, FieldKind, Grid, ScalarField};
use crate::error::{Error, Result};
use crate::linalg::{attainable_tol, cg_solve_from, SolveStats};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
enum Shape<T> {
    Constant(T),
    /// Breakpoints with strictly increasing abscissae; linear in between,
    /// clamped outside.
    Table(Vec<(T, T)>),
}

/// Temperature-dependent membrane stiffness `a(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientFunction<T> {
    shape: Shape<T>,
    lower: T,
    upper: T,
    lip: T,
}

impl<T: Real> CoefficientFunction<T> {
    pub fn constant(value: T) -> Result<Self> {
        if !(value > T::zero()) || !value.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coefficient must be positive, got {value}"
            )));
        }
        Ok(Self {
            shape: Shape::Constant(value),
            lower: value,
            upper: value,
            lip: T::zero(),
        })
    }

    /// Piecewise-linear interpolant through `points`.
    pub fn table(points: Vec<(T, T)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidParameter("table needs at least two points".into()));
        }
        let mut lower = T::infinity();
        let mut upper = T::neg_infinity();
        let mut lip = T::zero();
        for (k, &(s, v)) in points.iter().enumerate() {
            if !(v > T::zero()) || !v.is_finite() || !s.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "table value must be finite and positive, got {v} at {s}"
                )));
            }
            lower = lower.min(v);
            upper = upper.max(v);
            if k > 0 {
                let (s0, v0) = points[k - 1];
                if !(s > s0) {
                    return Err(Error::InvalidParameter(
                        "table abscissae must be strictly increasing".into(),
                    ));
                }
                lip = lip.max(((v - v0) / (s - s0)).abs());
            }
        }
        Ok(Self {
            shape: Shape::Table(points),
            lower,
            upper,
            lip,
        })
    }

    /// Tabulates `f` at `count` equispaced points of `[lo, hi]`.
    pub fn sampled(lo: T, hi: T, count: usize, f: impl Fn(T) -> T) -> Result<Self> {
        if count < 2 || !(hi > lo) {
            return Err(Error::InvalidParameter("empty sampling range".into()));
        }
        let step = (hi - lo) / T::from_count(count - 1);
        Self::table(
            (0..count)
                .map(|k| {
                    let s = if k + 1 == count { hi } else { lo + step * T::from_count(k) };
                    (s, f(s))
                })
                .collect(),
        )
    }

    pub fn eval(&self, s: T) -> T {
        match &self.shape {
            Shape::Constant(v) => *v,
            Shape::Table(pts) => {
                let first = pts[0];
                let last = pts[pts.len() - 1];
                if !(s > first.0) {
                    return first.1;
                }
                if s >= last.0 {
                    return last.1;
                }
                // first index with abscissa > s; guaranteed in 1..len
                let k = pts.partition_point(|&(x, _)| x <= s);
                let (s0, v0) = pts[k - 1];
                let (s1, v1) = pts[k];
                v0 + (v1 - v0) * (s - s0) / (s1 - s0)
            }
        }
    }

    /// Lower bound `λ₁`.
    pub fn lower(&self) -> T {
        self.lower
    }

    /// Upper bound `λ₂`.
    pub fn upper(&self) -> T {
        self.upper
    }

    /// Bound on `|a'|`.
    pub fn lip(&self) -> T {
        self.lip
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.shape, Shape::Constant(_))
    }

    pub fn constant_value(&self) -> Option<T> {
        match self.shape {
            Shape::Constant(v) => Some(v),
            Shape::Table(_) => None,
        }
    }

    /// Table breakpoints, or `None` for the constant kind.
    pub fn points(&self) -> Option<&[(T, T)]> {
        match &self.shape {
            Shape::Table(p) => Some(p),
            Shape::Constant(_) => None,
        }
    }
}

/// Model constants.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients<T> {
    pub kappa1: T,
    pub kappa2: T,
    pub c1: T,
    pub c2: T,
    pub b1: T,
    pub b2: T,
    pub alpha: T,
    pub a: CoefficientFunction<T>,
}

impl<T: Real> Coefficients<T> {
    /// Unit diffusivities, reactions and exchange, `α = 1`, `a ≡ 1`.
    pub fn unit() -> Self {
        Self {
            kappa1: T::one(),
            kappa2: T::one(),
            c1: T::one(),
            c2: T::one(),
            b1: T::one(),
            b2: T::one(),
            alpha: T::one(),
            a: CoefficientFunction::constant(T::one()).expect("positive"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("kappa1", self.kappa1, true),
            ("kappa2", self.kappa2, true),
            ("c1", self.c1, true),
            ("c2", self.c2, true),
            ("b1", self.b1, false),
            ("b2", self.b2, false),
            ("alpha", self.alpha, false),
        ];
        for (name, v, strict) in named {
            let ok = v.is_finite() && if strict { v > T::zero() } else { v >= T::zero() };
            if !ok {
                let rel = if strict { "> 0" } else { ">= 0" };
                return Err(Error::InvalidParameter(format!("{name} must be {rel}, got {v}")));
            }
        }
        Ok(())
    }

    /// Coercivity constant for `σ` bounded by one.
    pub fn c0(&self) -> T {
        coercivity_margin(self, T::one())
    }

    /// `γ₀ = min(c₁ - (b₂ - b₁)⁺, c₂ - (b₁ - b₂)⁺)`.
    pub fn gamma0(&self) -> T {
        (self.c1 - (self.b2 - self.b1).pos()).min(self.c2 - (self.b1 - self.b2).pos())
    }

    /// `(γ₁, γ₂)` for a comparison weight bounded by `sigma_inf`.
    pub fn gammas(&self, sigma_inf: T) -> (T, T) {
        (
            self.c1 - (self.b2 - self.b1).pos() * sigma_inf,
            self.c2 - (self.b1 - self.b2).pos() * sigma_inf,
        )
    }

    /// Whether `c₂/κ₂ ≥ c₁/κ₁`.
    pub fn reaction_ordered(&self) -> bool {
        self.c2 / self.kappa2 >= self.c1 / self.kappa1
    }

    /// Reactions shifted by `1/τ`, as in one implicit-Euler step.
    pub fn augmented(&self, tau: T) -> Self {
        let shift = T::one() / tau;
        Self {
            c1: self.c1 + shift,
            c2: self.c2 + shift,
            ..self.clone()
        }
    }
}

/// `c_σ = min(c₁ - (b₂-b₁)⁺ σ∞/4, c₂ - (b₁-b₂)⁺ σ∞/4)`; may be non-positive.
pub fn coercivity_margin<T: Real>(coeffs: &Coefficients<T>, sigma_inf: T) -> T {
    let q = T::lit(0.25) * sigma_inf;
    (coeffs.c1 - (coeffs.b2 - coeffs.b1).pos() * q).min(coeffs.c2 - (coeffs.b1 - coeffs.b2).pos() * q)
}

/// Collected bound constants of one data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundsReport {
    pub m: f64,
    #[serde(rename = "M")]
    pub upper_m: f64,
    pub l: Option<f64>,
    #[serde(rename = "L")]
    pub upper_l: Option<f64>,
    pub c0: f64,
    pub c_sigma: f64,
    pub gamma0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

pub fn bounds_report<T: Real>(
    coeffs: &Coefficients<T>,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
    sigma_inf: T,
) -> BoundsReport {
    let (m, big_m) = bounds_m_upper(coeffs, h1, h2);
    let (g1, g2) = coeffs.gammas(sigma_inf);
    BoundsReport {
        m: m.to_f64_lossy(),
        upper_m: big_m.to_f64_lossy(),
        l: None,
        upper_l: None,
        c0: coeffs.c0().to_f64_lossy(),
        c_sigma: coercivity_margin(coeffs, sigma_inf).to_f64_lossy(),
        gamma0: coeffs.gamma0().to_f64_lossy(),
        gamma1: g1.to_f64_lossy(),
        gamma2: g2.to_f64_lossy(),
    }
}

/// `(m, M)`: extreme nodal values of `h₁/c₁` and `h₂/c₂`.
pub fn bounds_m_upper<T: Real>(coeffs: &Coefficients<T>, h1: &ScalarField<T>, h2: &ScalarField<T>) -> (T, T) {
    let m = (h1.min() / coeffs.c1).min(h2.min() / coeffs.c2);
    let big_m = (h1.max() / coeffs.c1).max(h2.max() / coeffs.c2);
    (m, big_m)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThermalParams<T> {
    /// Bound on the max-norm change between block sweeps, relative to
    /// `1 + ‖θ‖∞`.
    pub tol: T,
    pub max_outer: usize,
    pub cg_max_iter: usize,
}

impl<T: Real> Default for ThermalParams<T> {
    fn default() -> Self {
        Self {
            tol: T::default_tol(),
            max_outer: 500,
            cg_max_iter: 20_000,
        }
    }
}

fn check_grid<T: Real>(grid: Grid, f: &ScalarField<T>) -> Result<()> {
    if f.grid() != grid {
        return Err(Error::ShapeMismatch {
            expected: grid.node_count(),
            found: f.values().len(),
        });
    }
    Ok(())
}

/// Solves the pair from zero.
pub fn solve_pair<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
    sigma: &ScalarField<T>,
    params: &ThermalParams<T>,
) -> Result<(ScalarField<T>, ScalarField<T>, SolveStats)> {
    solve_pair_from(grid, coeffs, h1, h2, sigma, None, params)
}

/// Block Gauss–Seidel between the two equations, each solved by CG,
/// optionally warm-started from `init`.
pub fn solve_pair_from<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
    sigma: &ScalarField<T>,
    init: Option<(&ScalarField<T>, &ScalarField<T>)>,
    params: &ThermalParams<T>,
) -> Result<(ScalarField<T>, ScalarField<T>, SolveStats)> {
    coeffs.validate()?;
    for f in [h1, h2, sigma] {
        check_grid(grid, f)?;
    }
    let slack = T::lit(1e-12);
    if sigma.min() < -slack || sigma.max() > T::one() + slack {
        return Err(Error::InvalidParameter("exchange weight must lie in [0, 1]".into()));
    }
    let margin = coercivity_margin(coeffs, sigma.max_abs());
    if !(margin > T::zero()) {
        return Err(Error::Coercivity {
            margin: margin.to_f64_lossy(),
        });
    }

    let s = sigma.values();
    let r1 = sigma.map(|v| coeffs.c1 + coeffs.b1 * v);
    let r2 = sigma.map(|v| coeffs.c2 + coeffs.b2 * v);
    // Rescale by 1/h^dim so interior rows carry unit mass.
    let h = grid.spacing::<T>();
    let cell = if grid.dim() == 1 { h } else { h * h };
    let scale = T::one() / cell;
    let a1 = assemble_neumann_helmholtz(grid, coeffs.kappa1, &r1)?.matrix().scaled(scale);
    let a2 = assemble_neumann_helmholtz(grid, coeffs.kappa2, &r2)?.matrix().scaled(scale);
    let mass: Vec<T> = grid.weights::<T>().into_iter().map(|w| w * scale).collect();

    let n = grid.node_count();
    let (mut t1, mut t2) = match init {
        Some((a, b)) => {
            check_grid(grid, a)?;
            check_grid(grid, b)?;
            (a.values().to_vec(), b.values().to_vec())
        }
        None => (vec![T::zero(); n], vec![T::zero(); n]),
    };
    // Rows are diagonally dominant by mass·reaction, which bounds the inverse.
    let inv_bound = |r: &ScalarField<T>| {
        let least = mass
            .iter()
            .zip(r.values())
            .fold(T::infinity(), |m, (&w, &c)| m.min(w * c));
        T::one() / least
    };
    let tol1 = attainable_tol(&a1, inv_bound(&r1), params.tol * T::lit(0.1));
    let tol2 = attainable_tol(&a2, inv_bound(&r2), params.tol * T::lit(0.1));
    let mut rhs = vec![T::zero(); n];
    let mut change = T::infinity();
    for outer in 1..=params.max_outer {
        let prev1 = t1.clone();
        let prev2 = t2.clone();
        for p in 0..n {
            rhs[p] = mass[p] * (h1.values()[p] + coeffs.b1 * s[p] * t2[p]);
        }
        let st = cg_solve_from(&a1, &rhs, &mut t1, tol1, params.cg_max_iter);
        st.require("temperature solve")?;
        for p in 0..n {
            rhs[p] = mass[p] * (h2.values()[p] + coeffs.b2 * s[p] * t1[p]);
        }
        let st = cg_solve_from(&a2, &rhs, &mut t2, tol2, params.cg_max_iter);
        st.require("temperature solve")?;

        let mut size = T::one();
        change = T::zero();
        for p in 0..n {
            change = change.max((t1[p] - prev1[p]).abs()).max((t2[p] - prev2[p]).abs());
            size = size.max(t1[p].abs()).max(t2[p].abs());
        }
        change = change / size;
        if change <= params.tol {
            let stats = SolveStats {
                iterations: outer,
                residual: change.to_f64_lossy(),
                converged: true,
            };
            return Ok((
                ScalarField::new(grid, t1, FieldKind::Free)?,
                ScalarField::new(grid, t2, FieldKind::Free)?,
                stats,
            ));
        }
    }
    Err(Error::NonConvergence {
        what: "temperature pair",
        iterations: params.max_outer,
        residual: change.to_f64_lossy(),
    })
}

/// Max-norm violation of `θ₁ ≥ θ₂ ≥ 0`, when `c₂/κ₂ ≥ c₁/κ₁` and
/// `h₁/κ₁ ≥ h₂/κ₂ ≥ 0` hold nodewise.
pub fn check_comparison<T: Real>(
    theta1: &ScalarField<T>,
    theta2: &ScalarField<T>,
    coeffs: &Coefficients<T>,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
) -> Gated<T> {
    if !comparison_applicable(coeffs, h1, h2) {
        return Gated::NotApplicable("requires c2/kappa2 >= c1/kappa1 and h1/kappa1 >= h2/kappa2 >= 0");
    }
    let mut worst = T::zero();
    for (&a, &b) in theta1.values().iter().zip(theta2.values()) {
        worst = worst.max(b - a).max(-b);
    }
    Gated::Value(worst)
}

pub fn comparison_applicable<T: Real>(coeffs: &Coefficients<T>, h1: &ScalarField<T>, h2: &ScalarField<T>) -> bool {
    coeffs.reaction_ordered()
        && h1
            .values()
            .iter()
            .zip(h2.values())
            .all(|(&a, &b)| b >= T::zero() && a / coeffs.kappa1 >= b / coeffs.kappa2)
}

/// `‖h₁‖∞ / c₁`, the bound on `θ₁` under the comparison preconditions.
pub fn linfty_theta1<T: Real>(coeffs: &Coefficients<T>, h1: &ScalarField<T>) -> T {
    h1.max_abs() / coeffs.c1
}

/// Discrete heat balance defect
/// `|∫(c₁θ₁ + c₂θ₂) - ∫(h₁ + h₂) - (b₂ - b₁)∫σ(θ₁ - θ₂)|`.
pub fn conservation_residual<T: Real>(
    coeffs: &Coefficients<T>,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
    sigma: &ScalarField<T>,
    theta1: &ScalarField<T>,
    theta2: &ScalarField<T>,
) -> T {
    let grid = h1.grid();
    let mut total = T::zero();
    for p in 0..grid.node_count() {
        let (t1, t2) = (theta1.values()[p], theta2.values()[p]);
        let local = coeffs.c1 * t1 + coeffs.c2 * t2
            - h1.values()[p]
            - h2.values()[p]
            - (coeffs.b2 - coeffs.b1) * sigma.values()[p] * (t1 - t2);
        total = total + grid.weight::<T>(p) * local;
    }
    total.abs()
}

/// Data and solution of one pair problem, for comparisons.
#[derive(Debug, Clone, Copy)]
pub struct PairSnapshot<'a, T> {
    pub h1: &'a ScalarField<T>,
    pub h2: &'a ScalarField<T>,
    pub sigma: &'a ScalarField<T>,
    pub theta1: &'a ScalarField<T>,
    pub theta2: &'a ScalarField<T>,
}

/// Slack `RHS - LHS` of the L¹ dependence estimate
///
/// ```text
/// γ₁‖θ₁-θ̂₁‖₁ + γ₂‖θ₂-θ̂₂‖₁ ≤ ‖h₁-ĥ₁‖₁ + ‖h₂-ĥ₂‖₁ + (M-m)(b₁+b₂)‖σ-σ̂‖₁
/// ```
///
/// with `M, m` from the base data and `γᵢ` from `‖σ̂‖∞`.
pub fn l1_dependence_slack<T: Real>(
    coeffs: &Coefficients<T>,
    base: PairSnapshot<'_, T>,
    other: PairSnapshot<'_, T>,
) -> Gated<T> {
    let (g1, g2) = coeffs.gammas(other.sigma.max_abs());
    if !(g1 > T::zero() && g2 > T::zero()) {
        return Gated::NotApplicable("requires positive gamma1 and gamma2");
    }
    let (m, big_m) = bounds_m_upper(coeffs, base.h1, base.h2);
    let d = |a: &ScalarField<T>, b: &ScalarField<T>| a.sub(b).l1_norm();
    let rhs = d(base.h1, other.h1)
        + d(base.h2, other.h2)
        + (big_m - m) * (coeffs.b1 + coeffs.b2) * d(base.sigma, other.sigma);
    let lhs = g1 * d(base.theta1, other.theta1) + g2 * d(base.theta2, other.theta2);
    Gated::Value(rhs - lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn coeffs(c1: f64, c2: f64, b1: f64, b2: f64) -> Coefficients<f64> {
        Coefficients {
            c1,
            c2,
            b1,
            b2,
            ..Coefficients::unit()
        }
    }

    #[test]
    fn coercivity_examples() {
        assert_eq!(coercivity_margin(&coeffs(1.0, 1.0, 2.0, 2.0), 7.0), 1.0);
        assert_eq!(coercivity_margin(&coeffs(1.0, 1.0, 5.0, 1.0), 1.0), 0.0);
        assert_eq!(coercivity_margin(&coeffs(2.0, 4.0, 0.0, 12.0), 0.5), 0.5);
    }

    #[test]
    fn table_evaluation_clamps_and_interpolates() {
        let a = CoefficientFunction::table(vec![(0.0, 1.0), (1.0, 2.0), (3.0, 2.5)]).unwrap();
        assert_eq!(a.eval(-4.0), 1.0);
        assert_eq!(a.eval(0.5), 1.5);
        assert_eq!(a.eval(2.0), 2.25);
        assert_eq!(a.eval(9.0), 2.5);
        assert_eq!((a.lower(), a.upper(), a.lip()), (1.0, 2.5, 1.0));
        assert!(CoefficientFunction::table(vec![(1.0, 1.0), (1.0, 2.0)]).is_err());
        assert!(CoefficientFunction::table(vec![(0.0, 1.0), (1.0, -2.0)]).is_err());
        assert!(CoefficientFunction::constant(0.0).is_err());
    }

    #[test]
    fn sampled_table_tracks_function() {
        let a = CoefficientFunction::sampled(-2.0, 2.0, 401, |s: f64| 1.0 + s * s).unwrap();
        for s in [-1.3, 0.0, 0.77, 1.9] {
            assert!((a.eval(s) - (1.0 + s * s)).abs() < 1e-4);
        }
        assert!((a.lip() - 4.0).abs() < 0.02);
    }

    #[test]
    fn constant_temperature_without_exchange() {
        let g = Grid::new(2, 4).unwrap();
        let c = coeffs(4.0, 1.0, 1.0, 1.0);
        let (t1, _, st) = solve_pair(
            g,
            &c,
            &ScalarField::constant(g, 2.0),
            &ScalarField::zeros(g),
            &ScalarField::zeros(g),
            &ThermalParams::default(),
        )
        .unwrap();
        assert!(st.converged);
        assert!(t1.values().iter().all(|&v| (v - 0.5).abs() < 1e-10));
    }

    #[test]
    fn algebraic_pair() {
        for (dim, n) in [(1, 3), (2, 6)] {
            let g = Grid::new(dim, n).unwrap();
            let (t1, t2, _) = solve_pair(
                g,
                &Coefficients::<f64>::unit(),
                &ScalarField::constant(g, 3.0),
                &ScalarField::zeros(g),
                &ScalarField::constant(g, 1.0),
                &ThermalParams::default(),
            )
            .unwrap();
            assert!(t1.values().iter().all(|&v| (v - 2.0).abs() < 1e-8));
            assert!(t2.values().iter().all(|&v| (v - 1.0).abs() < 1e-8));
        }
    }

    #[test]
    fn rejects_non_coercive_data() {
        let g = Grid::new(1, 4).unwrap();
        let r = solve_pair(
            g,
            &coeffs(1.0, 1.0, 5.0, 1.0),
            &ScalarField::zeros(g),
            &ScalarField::zeros(g),
            &ScalarField::constant(g, 1.0),
            &ThermalParams::default(),
        );
        assert!(matches!(r, Err(Error::Coercivity { .. })));
    }

    #[test]
    fn bounds_examples() {
        let g = Grid::new(1, 4).unwrap();
        let c = coeffs(4.0, 1.0, 0.0, 0.0);
        let (m, big_m) = bounds_m_upper(&c, &ScalarField::constant(g, 2.0), &ScalarField::constant(g, 3.0));
        assert_eq!((m, big_m), (0.5, 3.0));
        let z = ScalarField::zeros(g);
        assert_eq!(bounds_m_upper(&c, &z, &z), (0.0, 0.0));
        let c = coeffs(2.0, 1.0, 0.0, 0.0);
        let ramp = ScalarField::from_fn(g, |x: f64, _| 4.0 * x);
        assert_eq!(bounds_m_upper(&c, &ramp, &ScalarField::constant(g, 1.0)), (0.0, 2.0));
        assert_eq!(linfty_theta1(&c, &ramp), 2.0);
    }

    #[test]
    fn comparison_gate() {
        let g = Grid::new(1, 4).unwrap();
        let one = ScalarField::constant(g, 1.0);
        let two = ScalarField::constant(g, 2.0);
        let c = Coefficients::unit();
        assert_eq!(check_comparison(&two, &one, &c, &ScalarField::constant(g, 3.0), &ScalarField::zeros(g)), Gated::Value(0.0));
        let bad = coeffs(2.0, 1.0, 1.0, 1.0);
        assert!(!check_comparison(&two, &one, &bad, &two, &one).is_applicable());
    }

    #[test]
    fn symmetric_data_gives_equal_temperatures() {
        let g = Grid::new(2, 8).unwrap();
        let h = ScalarField::from_fn(g, |x: f64, y| 1.0 + x * y);
        let sigma = ScalarField::from_fn(g, |x: f64, _| x);
        let (t1, t2, _) =
            solve_pair(g, &coeffs(1.0, 1.0, 0.7, 0.7), &h, &h, &sigma, &ThermalParams::default()).unwrap();
        assert!(t1.dist_inf(&t2) < 1e-9);
    }

    #[test]
    fn identical_data_has_zero_slack() {
        let g = Grid::new(1, 8).unwrap();
        let h1 = ScalarField::constant(g, 3.0);
        let z = ScalarField::zeros(g);
        let s = ScalarField::constant(g, 1.0);
        let (t1, t2, _) = solve_pair(g, &Coefficients::unit(), &h1, &z, &s, &ThermalParams::default()).unwrap();
        let snap = PairSnapshot {
            h1: &h1,
            h2: &z,
            sigma: &s,
            theta1: &t1,
            theta2: &t2,
        };
        assert_eq!(l1_dependence_slack(&Coefficients::unit(), snap, snap), Gated::Value(0.0));
    }

    fn field(grid: Grid, vals: &[f64]) -> ScalarField<f64> {
        ScalarField::new(grid, vals.to_vec(), FieldKind::Free).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn pair_invariants(
            h1v in prop::collection::vec(0.0f64..5.0, 17),
            h2f in prop::collection::vec(0.0f64..1.0, 17),
            sv in prop::collection::vec(0.0f64..1.0, 17),
            b1 in 0.0f64..2.0,
            b2 in 0.0f64..2.0,
            c2extra in 0.0f64..1.0,
        ) {
            let g = Grid::new(1, 16).unwrap();
            let c = Coefficients { c1: 1.0, c2: 1.0 + c2extra, b1, b2, ..Coefficients::unit() };
            prop_assume!(c.c0() > 0.05);
            let h1 = field(g, &h1v);
            // h₂ ≤ h₁ keeps the comparison preconditions
            let h2v: Vec<f64> = h1v.iter().zip(&h2f).map(|(a, t)| a * t).collect();
            let h2 = field(g, &h2v);
            let sigma = field(g, &sv);
            let tol = 1e-10;
            let (t1, t2, _) = solve_pair(g, &c, &h1, &h2, &sigma, &ThermalParams::default()).unwrap();
            let (m, big_m) = bounds_m_upper(&c, &h1, &h2);
            for t in [&t1, &t2] {
                prop_assert!(t.min() >= m - 1e-8 && t.max() <= big_m + 1e-8);
                prop_assert!(t.min() >= -1e-8);
            }
            prop_assert!(t1.dist_inf(&t2) <= big_m - m + 1e-8);
            let viol = check_comparison(&t1, &t2, &c, &h1, &h2).value().unwrap();
            prop_assert!(viol <= 10.0 * tol * (1.0 + big_m));
            prop_assert!(t1.max() <= linfty_theta1(&c, &h1) + 1e-8);
            let cons = conservation_residual(&c, &h1, &h2, &sigma, &t1, &t2);
            prop_assert!(cons <= 1e-8 * (1.0 + h1.max_abs()));
        }

        #[test]
        fn l1_dependence_holds(
            sv in prop::collection::vec(0.0f64..1.0, 9),
            shat in prop::collection::vec(0.0f64..1.0, 9),
            dh in -0.5f64..0.5,
        ) {
            let g = Grid::new(1, 8).unwrap();
            let c = Coefficients::unit();
            let h1 = ScalarField::from_fn(g, |x: f64, _| 2.0 + x);
            let h1b = h1.map(|v| v + dh);
            let h2 = ScalarField::constant(g, 0.5);
            let (s, sh) = (field(g, &sv), field(g, &shat));
            let p = ThermalParams::default();
            let (a1, a2, _) = solve_pair(g, &c, &h1, &h2, &s, &p).unwrap();
            let (b1, b2, _) = solve_pair(g, &c, &h1b, &h2, &sh, &p).unwrap();
            let base = PairSnapshot { h1: &h1, h2: &h2, sigma: &s, theta1: &a1, theta2: &a2 };
            let other = PairSnapshot { h1: &h1b, h2: &h2, sigma: &sh, theta1: &b1, theta2: &b2 };
            prop_assert!(l1_dependence_slack(&c, base, other).value().unwrap() >= -1e-8);
        }
    }
}
