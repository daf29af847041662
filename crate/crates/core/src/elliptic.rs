//! Stationary coupled problem: regularised contact indicator, damped
//! Picard iteration of the composed map (temperatures → mould → membrane),
//! continuation in the regularisation width, and the a-priori condition
//! evaluators.

use serde::Serialize;

use crate::conditions::ConditionReport;
use crate::contact::{
    contact_identity, contact_set, solve_membrane_from, solve_mould_from, ContactParams,
};
use crate::discretization::{
    assemble_atheta, assemble_dirichlet_laplacian, assemble_neumann_helmholtz, nodal_gradient,
    FieldKind, Grid, ScalarField,
};
use crate::error::{Error, Result};
use crate::linalg::cg_solve;
use crate::scalar::Real;
use crate::thermal::{bounds_m_upper, comparison_applicable, solve_pair_from, Coefficients, ThermalParams};

/// Regularised complement of the Heaviside graph:
/// `χ_ε(s) = clamp(1 - s/ε, 0, 1)`.
pub fn chi_eps<T: Real>(s: T, eps: T) -> T {
    (T::one() - s / eps).max(T::zero()).min(T::one())
}

/// Loads and heat sources of the stationary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticSources<T> {
    /// Membrane load.
    pub f: ScalarField<T>,
    /// Mould load.
    pub g: ScalarField<T>,
    pub h1: ScalarField<T>,
    pub h2: ScalarField<T>,
}

impl<T: Real> EllipticSources<T> {
    pub fn zeros(grid: Grid) -> Self {
        let z = ScalarField::zeros(grid);
        Self {
            f: z.clone(),
            g: z.clone(),
            h1: z.clone(),
            h2: z,
        }
    }

    pub fn grid(&self) -> Grid {
        self.f.grid()
    }

    fn check(&self, grid: Grid) -> Result<()> {
        for s in [&self.f, &self.g, &self.h1, &self.h2] {
            if s.grid() != grid {
                return Err(Error::ShapeMismatch {
                    expected: grid.node_count(),
                    found: s.values().len(),
                });
            }
        }
        Ok(())
    }
}

/// Geometric schedule of regularisation widths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegSchedule<T> {
    pub eps0: T,
    pub factor: T,
    /// Final width; `None` means `h²`.
    pub eps_min: Option<T>,
}

impl<T: Real> Default for RegSchedule<T> {
    fn default() -> Self {
        Self {
            eps0: T::one(),
            factor: T::lit(0.5),
            eps_min: None,
        }
    }
}

impl<T: Real> RegSchedule<T> {
    /// Constant in `χ_ε(s) s ≤ C ε` for `s > 0`.
    pub const C_NU: f64 = 0.25;

    /// Widths visited, from `eps0` down to (and including) `eps_min`.
    pub fn widths(&self, grid: Grid) -> Result<Vec<T>> {
        let h = grid.spacing::<T>();
        let eps_min = self.eps_min.unwrap_or(h * h);
        if !(eps_min > T::zero()) || !(self.eps0 > T::zero()) {
            return Err(Error::InvalidParameter("regularisation widths must be positive".into()));
        }
        if eps_min > self.eps0 {
            return Err(Error::InvalidParameter(format!(
                "final width {eps_min} exceeds initial width {}",
                self.eps0
            )));
        }
        if !(self.factor > T::zero() && self.factor < T::one()) {
            return Err(Error::InvalidParameter(format!("schedule factor {} outside (0, 1)", self.factor)));
        }
        let mut out = vec![self.eps0];
        let mut e = self.eps0 * self.factor;
        while e > eps_min {
            out.push(e);
            e = e * self.factor;
        }
        if *out.last().expect("nonempty") > eps_min {
            out.push(eps_min);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams<T> {
    pub thermal: ThermalParams<T>,
    pub contact: ContactParams<T>,
    /// Initial relaxation of the Picard update, in `(0, 1]`.
    pub damping: T,
    /// Floor for automatic halving of `damping`.
    pub min_damping: T,
    /// Fixed-point tolerance on `‖S(x) - x‖∞ / (1 + ‖Φ‖∞)`.
    pub tol: T,
    pub max_outer: usize,
    /// Rounds of the final pass with a binary contact indicator; 0 skips it.
    pub polish_rounds: usize,
}

impl<T: Real> Default for SolverParams<T> {
    fn default() -> Self {
        Self {
            thermal: ThermalParams::default(),
            contact: ContactParams::default(),
            damping: T::one(),
            min_damping: T::lit(1.0 / 64.0),
            tol: T::lit(1e-9).max(T::epsilon() * T::lit(1e4)),
            max_outer: 500,
            polish_rounds: 20,
        }
    }
}

impl<T: Real> SolverParams<T> {
    pub fn validate(&self) -> Result<()> {
        self.contact.validate()?;
        if !(self.damping > T::zero() && self.damping <= T::one()) {
            return Err(Error::InvalidParameter(format!("damping {} outside (0, 1]", self.damping)));
        }
        if !(self.min_damping > T::zero() && self.min_damping <= self.damping) {
            return Err(Error::InvalidParameter("minimum damping must lie in (0, damping]".into()));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
}

/// Residuals of the four discrete equations, in max norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EquationResiduals {
    pub theta1: f64,
    pub theta2: f64,
    pub mould: f64,
    /// `max |min(Φ - u, f - A_θu)|` over interior nodes.
    pub membrane: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NondegeneracyReport {
    /// Minimum over interior nodes of `f - A_θΦ` against 0.
    pub pointwise: ConditionReport,
    /// The a-priori sufficient condition on the data.
    pub sufficient: ConditionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    pub stages: Vec<StageReport>,
    pub eps_reached: f64,
    pub final_residual: f64,
    pub polish_rounds: usize,
    /// Whether the binary-indicator pass reached a stable contact set.
    pub polish_converged: bool,
    pub delta_contact: f64,
    pub contact_identity: f64,
    pub residuals: Option<EquationResiduals>,
    pub nondegeneracy: Option<NondegeneracyReport>,
    pub uniqueness: Option<ConditionReport>,
}

impl SolveReport {
    pub fn empty() -> Self {
        Self {
            stages: Vec::new(),
            eps_reached: f64::NAN,
            final_residual: f64::NAN,
            polish_rounds: 0,
            polish_converged: false,
            delta_contact: f64::NAN,
            contact_identity: f64::NAN,
            residuals: None,
            nondegeneracy: None,
            uniqueness: None,
        }
    }
}

/// Discrete solution of the stationary problem.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipticState<T> {
    pub theta1: ScalarField<T>,
    pub theta2: ScalarField<T>,
    pub phi: ScalarField<T>,
    pub u: ScalarField<T>,
    /// Binary contact indicator.
    pub chi: ScalarField<T>,
    /// Exchange weight that actually entered the temperature and mould
    /// equations (equals `chi` after a successful polish pass).
    pub sigma: ScalarField<T>,
    pub report: SolveReport,
}

impl<T: Real> EllipticState<T> {
    pub fn zeros(grid: Grid) -> Self {
        let z = ScalarField::zeros(grid);
        let zt = ScalarField::zero_trace_zeros(grid);
        Self {
            theta1: z.clone(),
            theta2: z,
            phi: zt.clone(),
            u: zt.clone(),
            chi: zt.clone(),
            sigma: zt,
            report: SolveReport::empty(),
        }
    }

    pub fn grid(&self) -> Grid {
        self.u.grid()
    }

    /// Fraction of interior nodes in contact.
    pub fn contact_fraction(&self) -> T {
        let interior = self.grid().interior_nodes();
        let hits = interior.iter().filter(|&&p| self.chi.values()[p] > T::lit(0.5)).count();
        T::from_count(hits) / T::from_count(interior.len().max(1))
    }

    /// Max-norm distance over all five fields.
    pub fn distance(&self, other: &Self) -> T {
        self.theta1
            .dist_inf(&other.theta1)
            .max(self.theta2.dist_inf(&other.theta2))
            .max(self.phi.dist_inf(&other.phi))
            .max(self.u.dist_inf(&other.u))
    }
}

/// Iterate of the Picard loop.
struct Iterate<T> {
    w: ScalarField<T>,
    phi: ScalarField<T>,
    theta1: ScalarField<T>,
    theta2: ScalarField<T>,
}

struct Sweep<T> {
    u: ScalarField<T>,
    phi: ScalarField<T>,
    theta1: ScalarField<T>,
    theta2: ScalarField<T>,
    sigma: ScalarField<T>,
}

fn regularised_weight<T: Real>(w: &ScalarField<T>, phi: &ScalarField<T>, eps: T) -> ScalarField<T> {
    let grid = w.grid();
    let vals = (0..grid.node_count())
        .map(|p| {
            if grid.is_boundary(p) {
                T::zero()
            } else {
                chi_eps(phi.values()[p] - w.values()[p], eps)
            }
        })
        .collect();
    ScalarField::new(grid, vals, FieldKind::ZeroTrace).expect("finite weight")
}

/// One application of the composed map with a given exchange weight.
fn sweep<T: Real>(
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    it: &Iterate<T>,
    sigma: ScalarField<T>,
    params: &SolverParams<T>,
) -> Result<Sweep<T>> {
    let grid = src.grid();
    let (theta1, theta2, _) = solve_pair_from(
        grid,
        coeffs,
        &src.h1,
        &src.h2,
        &sigma,
        Some((&it.theta1, &it.theta2)),
        &params.thermal,
    )?;
    let phi = solve_mould_from(
        grid,
        coeffs.alpha,
        &theta1,
        &theta2,
        &sigma,
        &src.g,
        Some(&it.phi),
        params.thermal.tol * T::lit(0.1),
    )?;
    let (u, _) = solve_membrane_from(grid, coeffs, &theta1, &src.f, &phi, Some(&it.w), &params.contact)?;
    Ok(Sweep {
        u,
        phi,
        theta1,
        theta2,
        sigma,
    })
}

fn change<T: Real>(s: &Sweep<T>, it: &Iterate<T>) -> T {
    s.u.dist_inf(&it.w).max(s.phi.dist_inf(&it.phi)) / (T::one() + s.phi.max_abs())
}

/// Damped Picard loop at a fixed width. Returns the last sweep.
fn picard<T: Real>(
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    it: &mut Iterate<T>,
    eps: T,
    params: &SolverParams<T>,
) -> Result<(Sweep<T>, StageReport)> {
    let mut lambda = params.damping;
    let mut prev = T::infinity();
    for k in 1..=params.max_outer {
        let sigma = regularised_weight(&it.w, &it.phi, eps);
        let s = sweep(coeffs, src, it, sigma, params)?;
        let r = change(&s, it);
        if r <= params.tol {
            it.w = s.u.clone();
            it.phi = s.phi.clone();
            it.theta1 = s.theta1.clone();
            it.theta2 = s.theta2.clone();
            let rep = StageReport {
                eps: eps.to_f64_lossy(),
                iterations: k,
                residual: r.to_f64_lossy(),
                damping: lambda.to_f64_lossy(),
            };
            return Ok((s, rep));
        }
        if r > T::lit(0.99) * prev {
            lambda = (lambda * T::lit(0.5)).max(params.min_damping);
        }
        prev = r;
        let keep = T::one() - lambda;
        it.w = it.w.zip_map(&s.u, |a, b| keep * a + lambda * b).into_zero_trace();
        it.phi = it.phi.zip_map(&s.phi, |a, b| keep * a + lambda * b).into_zero_trace();
        it.theta1 = s.theta1;
        it.theta2 = s.theta2;
    }
    Err(Error::NonConvergence {
        what: "fixed-point iteration",
        iterations: params.max_outer,
        residual: prev.to_f64_lossy(),
    })
}

fn iterate_from<T: Real>(grid: Grid, init: Option<&EllipticState<T>>) -> Iterate<T> {
    match init {
        Some(s) => Iterate {
            w: s.u.clone(),
            phi: s.phi.clone(),
            theta1: s.theta1.clone(),
            theta2: s.theta2.clone(),
        },
        None => {
            let z = EllipticState::zeros(grid);
            Iterate {
                w: z.u,
                phi: z.phi,
                theta1: z.theta1,
                theta2: z.theta2,
            }
        }
    }
}

fn finish<T: Real>(
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    s: Sweep<T>,
    delta: T,
    report: SolveReport,
) -> EllipticState<T> {
    let chi = contact_set(&s.u, &s.phi, delta);
    let mut state = EllipticState {
        theta1: s.theta1,
        theta2: s.theta2,
        phi: s.phi,
        u: s.u,
        chi,
        sigma: s.sigma,
        report,
    };
    state.report.delta_contact = delta.to_f64_lossy();
    state.report.contact_identity = contact_identity(&state.chi, &state.u, &state.phi).to_f64_lossy();
    state.report.residuals = equation_residuals(&state, coeffs, src).ok();
    state
}

/// Picard iteration of the regularised problem at one width `eps`.
pub fn fixed_point_solve<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    eps: T,
    params: &SolverParams<T>,
    init: Option<&EllipticState<T>>,
) -> Result<EllipticState<T>> {
    coeffs.validate()?;
    params.validate()?;
    src.check(grid)?;
    if !(eps > T::zero()) {
        return Err(Error::InvalidParameter("regularisation width must be positive".into()));
    }
    require_c0(coeffs)?;
    let mut it = iterate_from(grid, init);
    let (s, stage) = picard(coeffs, src, &mut it, eps, params)?;
    let mut report = SolveReport::empty();
    report.eps_reached = stage.eps;
    report.final_residual = stage.residual;
    report.stages.push(stage);
    let delta = params.contact.delta_for(&src.f, &coeffs.a);
    Ok(finish(coeffs, src, s, delta, report))
}

fn require_c0<T: Real>(coeffs: &Coefficients<T>) -> Result<()> {
    let c0 = coeffs.c0();
    if !(c0 > T::zero()) {
        return Err(Error::Coercivity {
            margin: c0.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Full stationary solve: continuation over the schedule, then a pass with
/// the binary contact indicator, then the condition evaluators.
pub fn continuation_solve<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
) -> Result<EllipticState<T>> {
    continuation_solve_from(grid, coeffs, src, schedule, params, None)
}

pub fn continuation_solve_from<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
    init: Option<&EllipticState<T>>,
) -> Result<EllipticState<T>> {
    coeffs.validate()?;
    params.validate()?;
    src.check(grid)?;
    require_c0(coeffs)?;
    let widths = schedule.widths(grid)?;
    let mut it = iterate_from(grid, init);
    let mut report = SolveReport::empty();
    let mut last = None;
    for &eps in &widths {
        let (s, stage) = picard(coeffs, src, &mut it, eps, params)?;
        report.eps_reached = stage.eps;
        report.final_residual = stage.residual;
        report.stages.push(stage);
        last = Some(s);
    }
    let mut best = last.expect("at least one width");
    let delta = params.contact.delta_for(&src.f, &coeffs.a);

    // Binary pass: freeze the contact set, re-solve, repeat until stable.
    let mut chi = contact_set(&best.u, &best.phi, delta);
    for round in 1..=params.polish_rounds {
        let s = sweep(coeffs, src, &it, chi.clone(), params)?;
        let next = contact_set(&s.u, &s.phi, delta);
        let r = change(&s, &it);
        report.polish_rounds = round;
        it.w = s.u.clone();
        it.phi = s.phi.clone();
        it.theta1 = s.theta1.clone();
        it.theta2 = s.theta2.clone();
        if next == chi {
            report.polish_converged = true;
            report.final_residual = r.to_f64_lossy();
            best = s;
            break;
        }
        chi = next;
    }

    let mut state = finish(coeffs, src, best, delta, report);
    state.report.nondegeneracy = nondegeneracy_check(&state, coeffs, src).ok();
    let (m, big_m) = bounds_m_upper(coeffs, &src.h1, &src.h2);
    state.report.uniqueness = Some(uniqueness_check(coeffs, &src.f, &src.g, m, big_m));
    Ok(state)
}

/// Max-norm residuals of the discrete equations at the stored state, with
/// `sigma` as the exchange weight.
pub fn equation_residuals<T: Real>(
    state: &EllipticState<T>,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
) -> Result<EquationResiduals> {
    let grid = state.grid();
    let s = &state.sigma;
    let (t1, t2) = (&state.theta1, &state.theta2);
    let op1 = assemble_neumann_helmholtz(grid, coeffs.kappa1, &s.map(|v| coeffs.c1 + coeffs.b1 * v))?;
    let op2 = assemble_neumann_helmholtz(grid, coeffs.kappa2, &s.map(|v| coeffs.c2 + coeffs.b2 * v))?;
    let l1 = op1.apply(t1);
    let l2 = op2.apply(t2);
    let mut r1 = T::zero();
    let mut r2 = T::zero();
    for p in 0..grid.node_count() {
        let sv = s.values()[p];
        r1 = r1.max((l1.values()[p] - src.h1.values()[p] - coeffs.b1 * sv * t2.values()[p]).abs());
        r2 = r2.max((l2.values()[p] - src.h2.values()[p] - coeffs.b2 * sv * t1.values()[p]).abs());
    }
    let lap = assemble_dirichlet_laplacian(grid, |_, _| T::one())?;
    let lphi = lap.apply(&state.phi);
    let atheta = assemble_atheta(grid, &coeffs.a, t1)?;
    let au = atheta.apply(&state.u);
    let mut rm = T::zero();
    let mut ru = T::zero();
    for &p in lap.interior() {
        let src_p = coeffs.alpha * (t1.values()[p] - t2.values()[p]) * s.values()[p] + src.g.values()[p];
        rm = rm.max((lphi.values()[p] - src_p).abs());
        let nat = (state.phi.values()[p] - state.u.values()[p]).min(src.f.values()[p] - au.values()[p]);
        ru = ru.max(nat.abs());
    }
    Ok(EquationResiduals {
        theta1: r1.to_f64_lossy(),
        theta2: r2.to_f64_lossy(),
        mould: rm.to_f64_lossy(),
        membrane: ru.to_f64_lossy(),
    })
}

/// Non-degeneracy of the force balance: the discrete pointwise quantity
/// `f - A_θΦ` on the state, and the sufficient condition
/// `f - λ₂g⁺ + λ₁g⁻ > αλ₂(M - m) + ‖a'‖∞ K`, where `K` is 0 for constant
/// `a` and otherwise the largest nodal `|∇θ₁·∇Φ|` of the state.
pub fn nondegeneracy_check<T: Real>(
    state: &EllipticState<T>,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
) -> Result<NondegeneracyReport> {
    let grid = state.grid();
    let atheta = assemble_atheta(grid, &coeffs.a, &state.theta1)?;
    let aphi = atheta.apply(&state.phi);
    let pointwise_min = atheta
        .interior()
        .iter()
        .map(|&p| src.f.values()[p] - aphi.values()[p])
        .fold(T::infinity(), T::min);
    let pointwise = if atheta.interior().is_empty() {
        ConditionReport::not_applicable("no interior nodes")
    } else {
        ConditionReport::new(pointwise_min.to_f64_lossy(), 0.0, 0.0)
    };

    let sufficient = if comparison_applicable(coeffs, &src.h1, &src.h2) {
        let k_grad = if coeffs.a.is_constant() {
            T::zero()
        } else {
            let g1 = nodal_gradient(&state.theta1);
            let g2 = nodal_gradient(&state.phi);
            atheta
                .interior()
                .iter()
                .map(|&p| (g1[p][0] * g2[p][0] + g1[p][1] * g2[p][1]).abs())
                .fold(T::zero(), T::max)
        };
        let (l1, l2) = (coeffs.a.lower(), coeffs.a.upper());
        let lhs = (0..grid.node_count())
            .map(|p| {
                let g = src.g.values()[p];
                src.f.values()[p] - l2 * g.pos() + l1 * g.neg_part()
            })
            .fold(T::infinity(), T::min);
        sufficient_report(coeffs, lhs, &src.h1, &src.h2, k_grad)
    } else {
        ConditionReport::not_applicable("requires c2/kappa2 >= c1/kappa1 and h1/kappa1 >= h2/kappa2 >= 0")
    };
    Ok(NondegeneracyReport { pointwise, sufficient })
}

fn sufficient_report<T: Real>(
    coeffs: &Coefficients<T>,
    lhs: T,
    h1: &ScalarField<T>,
    h2: &ScalarField<T>,
    k_grad: T,
) -> ConditionReport {
    let (m, big_m) = bounds_m_upper(coeffs, h1, h2);
    let rhs = coeffs.alpha * coeffs.a.upper() * (big_m - m) + coeffs.a.lip() * k_grad;
    ConditionReport::new(lhs.to_f64_lossy(), rhs.to_f64_lossy(), k_grad.to_f64_lossy())
}

/// Uniqueness condition for constant `a`:
/// `f > a g + a α (M - m)(2 + (b₁ + b₂)/γ₀)` at every node, with `γ₀ > 0`.
/// Reported with `lhs = min(f - a g)`.
pub fn uniqueness_check<T: Real>(
    coeffs: &Coefficients<T>,
    f: &ScalarField<T>,
    g: &ScalarField<T>,
    m: T,
    big_m: T,
) -> ConditionReport {
    let (a, rhs) = match uniqueness_threshold(coeffs, big_m - m) {
        Ok(v) => v,
        Err(reason) => return ConditionReport::not_applicable(reason),
    };
    let lhs = f
        .values()
        .iter()
        .zip(g.values())
        .map(|(&fv, &gv)| fv - a * gv)
        .fold(T::infinity(), T::min);
    ConditionReport::new(lhs.to_f64_lossy(), rhs.to_f64_lossy(), 0.0)
}

/// `(a, a α s (2 + (b₁ + b₂)/γ₀))` for a spread `s` of the temperature
/// bounds, or the reason the uniqueness condition does not apply.
pub(crate) fn uniqueness_threshold<T: Real>(
    coeffs: &Coefficients<T>,
    spread: T,
) -> std::result::Result<(T, T), &'static str> {
    let a = coeffs.a.constant_value().ok_or("requires a constant coefficient a")?;
    let gamma0 = coeffs.gamma0();
    if !(gamma0 > T::zero()) {
        return Err("requires gamma0 > 0");
    }
    let rhs = a * coeffs.alpha * spread * (T::lit(2.0) + (coeffs.b1 + coeffs.b2) / gamma0);
    Ok((a, rhs))
}

/// Starting state with no contact feedback: temperatures without exchange,
/// mould under `g` alone, membrane unconstrained.
pub fn unconstrained_state<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    params: &SolverParams<T>,
) -> Result<EllipticState<T>> {
    src.check(grid)?;
    let zero = ScalarField::zeros(grid);
    let (theta1, theta2, _) = solve_pair_from(grid, coeffs, &src.h1, &src.h2, &zero, None, &params.thermal)?;
    let phi = solve_mould_from(grid, coeffs.alpha, &theta1, &theta2, &zero, &src.g, None, params.thermal.tol)?;
    let op = assemble_atheta(grid, &coeffs.a, &theta1)?;
    let rhs: Vec<T> = op.interior().iter().map(|&p| src.f.values()[p]).collect();
    let (x, stats) = cg_solve(op.matrix(), &rhs, params.thermal.tol, 20 * rhs.len() + 100);
    stats.require("unconstrained membrane")?;
    let mut state = EllipticState::zeros(grid);
    state.theta1 = theta1;
    state.theta2 = theta2;
    state.phi = phi;
    state.u = ScalarField::from_interior(grid, &x);
    Ok(state)
}

/// Runs the continuation from the zero state and from the unconstrained
/// state and returns the largest field discrepancy between the results.
pub fn cross_solution_agreement<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
) -> Result<T> {
    let a = continuation_solve_from(grid, coeffs, src, schedule, params, None)?;
    let start = unconstrained_state(grid, coeffs, src, params)?;
    let b = continuation_solve_from(grid, coeffs, src, schedule, params, Some(&start))?;
    Ok(a.distance(&b))
}
