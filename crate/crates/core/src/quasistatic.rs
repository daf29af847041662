//! Evolutionary problem: per-interval source averages, implicit-Euler
//! stepping that reuses the stationary solver with shifted reactions,
//! temperature interpolants in time, and the time-dependent bounds and
//! condition evaluators.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::conditions::{ConditionReport, Gated};
use crate::discretization::{assemble_neumann_helmholtz, Grid, ScalarField};
use crate::elliptic::{
    continuation_solve_from, nondegeneracy_check, uniqueness_threshold, EllipticSources, EllipticState, RegSchedule, SolverParams,
};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::thermal::{comparison_applicable, Coefficients};

/// Uniform partition of `[0, T]` into `N` steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    horizon: T,
    steps: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidParameter("number of time steps must be at least 1".into()));
        }
        if !(horizon > T::zero() && horizon.is_finite()) {
            return Err(Error::InvalidParameter(format!("time horizon {horizon} must be positive")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> T {
        self.horizon / T::from_count(self.steps)
    }

    /// `t_k = k τ`; `t_N` is exactly the horizon.
    pub fn time(&self, k: usize) -> T {
        if k == self.steps {
            self.horizon
        } else {
            T::from_count(k) * self.tau()
        }
    }

    /// Step `k ∈ 1..=N` whose interval `[t_{k-1}, t_k)` contains `t`; the
    /// right end point belongs to the last interval.
    pub fn interval_of(&self, t: T) -> usize {
        let k = (t / self.tau()).floor().to_usize().unwrap_or(0) + 1;
        k.clamp(1, self.steps)
    }
}

type SourceFn<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;

/// A space-time source term.
#[derive(Clone)]
pub enum Source<T> {
    Constant(T),
    /// Nodal field held fixed in time.
    Field(ScalarField<T>),
    /// `(x, y, t) ↦ value`; `y` is 0 in one dimension.
    Function(SourceFn<T>),
}

impl<T: fmt::Debug> fmt::Debug for Source<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Source::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Source::Field(v) => f.debug_tuple("Field").field(v).finish(),
            Source::Function(_) => f.write_str("Function(..)"),
        }
    }
}

impl<T: Real> Source<T> {
    pub fn function(f: impl Fn(T, T, T) -> T + Send + Sync + 'static) -> Self {
        Source::Function(Arc::new(f))
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, Source::Function(_))
    }

    pub fn sample(&self, grid: Grid, t: T) -> Result<ScalarField<T>> {
        match self {
            Source::Constant(c) => Ok(ScalarField::constant(grid, *c)),
            Source::Field(v) => {
                if v.grid() != grid {
                    return Err(Error::ShapeMismatch {
                        expected: grid.node_count(),
                        found: v.values().len(),
                    });
                }
                Ok(v.clone())
            }
            Source::Function(f) => {
                let vals: Vec<T> = (0..grid.node_count())
                    .map(|p| {
                        let [x, y] = grid.coords::<T>(p);
                        f(x, y, t)
                    })
                    .collect();
                ScalarField::new(grid, vals, crate::discretization::FieldKind::Free)
            }
        }
    }
}

/// Data of the evolutionary problem.
#[derive(Debug, Clone)]
pub struct TimeSources<T> {
    pub f: Source<T>,
    pub g: Source<T>,
    pub h1: Source<T>,
    pub h2: Source<T>,
    pub theta10: ScalarField<T>,
    pub theta20: ScalarField<T>,
}

impl<T: Real> TimeSources<T> {
    /// Time-independent data built from stationary sources.
    pub fn stationary(src: &EllipticSources<T>, theta10: ScalarField<T>, theta20: ScalarField<T>) -> Self {
        Self {
            f: Source::Field(src.f.clone()),
            g: Source::Field(src.g.clone()),
            h1: Source::Field(src.h1.clone()),
            h2: Source::Field(src.h2.clone()),
            theta10,
            theta20,
        }
    }

    fn sources(&self) -> [&Source<T>; 4] {
        [&self.f, &self.g, &self.h1, &self.h2]
    }

    pub fn is_static(&self) -> bool {
        self.sources().iter().all(|s| s.is_static())
    }

    /// All four sources at time `t`.
    pub fn sample(&self, grid: Grid, t: T) -> Result<EllipticSources<T>> {
        Ok(EllipticSources {
            f: self.f.sample(grid, t)?,
            g: self.g.sample(grid, t)?,
            h1: self.h1.sample(grid, t)?,
            h2: self.h2.sample(grid, t)?,
        })
    }

    fn check_initial(&self, grid: Grid) -> Result<()> {
        for v in [&self.theta10, &self.theta20] {
            if v.grid() != grid {
                return Err(Error::ShapeMismatch {
                    expected: grid.node_count(),
                    found: v.values().len(),
                });
            }
        }
        Ok(())
    }
}

/// Eight-point Gauss–Legendre rule on `[-1, 1]`, positive half.
#[allow(clippy::excessive_precision)]
const GAUSS_NODES: [f64; 4] = [
    0.183_434_642_495_649_78,
    0.525_532_409_916_328_99,
    0.796_666_477_413_626_73,
    0.960_289_856_497_536_18,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_361_77,
    0.313_706_645_877_887_05,
    0.222_381_034_453_374_34,
    0.101_228_536_290_376_69,
];

/// Quadrature nodes and weights on `[0, 1]`; the weights sum to one.
fn unit_rule<T: Real>() -> Vec<(T, T)> {
    let half = T::lit(0.5);
    let mut rule = Vec::with_capacity(8);
    for (&x, &w) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS).rev() {
        rule.push((half - half * T::lit(x), half * T::lit(w)));
    }
    for (&x, &w) in GAUSS_NODES.iter().zip(&GAUSS_WEIGHTS) {
        rule.push((half + half * T::lit(x), half * T::lit(w)));
    }
    rule
}

/// Quadrature points of interval `k` as `(t, weight)` with weights summing
/// to one.
fn interval_rule<T: Real>(tg: &TimeGrid<T>, k: usize) -> Vec<(T, T)> {
    let t0 = tg.time(k - 1);
    let tau = tg.time(k) - t0;
    unit_rule::<T>().into_iter().map(|(s, w)| (t0 + tau * s, w)).collect()
}

/// Mean of `src` over interval `k`. The result is exact for polynomials in
/// time of degree at most 15, and bitwise exact for constants.
fn interval_mean<T: Real>(src: &Source<T>, grid: Grid, tg: &TimeGrid<T>, k: usize) -> Result<ScalarField<T>> {
    if src.is_static() {
        return src.sample(grid, T::zero());
    }
    let rule = interval_rule(tg, k);
    let base = src.sample(grid, rule[0].0)?;
    let mut acc = vec![T::zero(); grid.node_count()];
    for &(t, w) in &rule[1..] {
        let v = src.sample(grid, t)?;
        for (a, (&x, &b)) in acc.iter_mut().zip(v.values().iter().zip(base.values())) {
            *a = *a + w * (x - b);
        }
    }
    let vals = base.values().iter().zip(&acc).map(|(&b, &a)| b + a).collect();
    ScalarField::new(grid, vals, crate::discretization::FieldKind::Free)
}

/// Per-step interval averages `fᵏ = τ⁻¹ ∫_{I_k} f` of all four sources.
pub fn interval_averaged_sources<T: Real>(grid: Grid, src: &TimeSources<T>, tg: &TimeGrid<T>) -> Result<Vec<EllipticSources<T>>> {
    (1..=tg.steps())
        .map(|k| {
            Ok(EllipticSources {
                f: interval_mean(&src.f, grid, tg, k)?,
                g: interval_mean(&src.g, grid, tg, k)?,
                h1: interval_mean(&src.h1, grid, tg, k)?,
                h2: interval_mean(&src.h2, grid, tg, k)?,
            })
        })
        .collect()
}

/// Times at which space-time extrema of the data are sampled: the step
/// times and every quadrature point.
pub fn sample_times<T: Real>(src: &TimeSources<T>, tg: &TimeGrid<T>) -> Vec<T> {
    if src.is_static() {
        return vec![T::zero()];
    }
    let mut out = vec![T::zero()];
    for k in 1..=tg.steps() {
        out.extend(interval_rule(tg, k).into_iter().map(|(t, _)| t));
        out.push(tg.time(k));
    }
    out
}

/// Stationary data of one implicit-Euler step: reactions `cᵢ + 1/τ` and
/// heat sources `hᵢᵏ + θᵢᵏ⁻¹/τ`.
pub fn step_problem<T: Real>(
    coeffs: &Coefficients<T>,
    step: &EllipticSources<T>,
    prev: (&ScalarField<T>, &ScalarField<T>),
    tau: T,
) -> (Coefficients<T>, EllipticSources<T>) {
    let inv = T::one() / tau;
    let src = EllipticSources {
        f: step.f.clone(),
        g: step.g.clone(),
        h1: step.h1.zip_map(prev.0, |h, t| h + inv * t),
        h2: step.h2.zip_map(prev.1, |h, t| h + inv * t),
    };
    (coeffs.augmented(tau), src)
}

/// One implicit-Euler step, warm-started from `warm` when given.
#[allow(clippy::too_many_arguments)]
pub fn quasistatic_step<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    prev: (&ScalarField<T>, &ScalarField<T>),
    step: &EllipticSources<T>,
    tau: T,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
    warm: Option<&EllipticState<T>>,
) -> Result<EllipticState<T>> {
    if !(tau > T::zero()) {
        return Err(Error::InvalidParameter("time step must be positive".into()));
    }
    let (aug, src) = step_problem(coeffs, step, prev, tau);
    if !(aug.c0() > T::zero()) {
        return Err(Error::Coercivity {
            margin: aug.c0().to_f64_lossy(),
        });
    }
    continuation_solve_from(grid, &aug, &src, schedule, params, warm)
}

/// Solved evolution: initial temperatures, per-step source averages and
/// per-step states (`states[k - 1]` is step `k`).
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub time: TimeGrid<T>,
    pub theta10: ScalarField<T>,
    pub theta20: ScalarField<T>,
    pub sources: Vec<EllipticSources<T>>,
    pub states: Vec<EllipticState<T>>,
}

impl<T: Real> Trajectory<T> {
    pub fn grid(&self) -> Grid {
        self.theta10.grid()
    }

    /// Temperatures after step `k`; `k = 0` gives the initial data.
    pub fn temperatures(&self, k: usize) -> (&ScalarField<T>, &ScalarField<T>) {
        if k == 0 {
            (&self.theta10, &self.theta20)
        } else {
            let s = &self.states[k - 1];
            (&s.theta1, &s.theta2)
        }
    }
}

pub fn run_quasistatic<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
) -> Result<Trajectory<T>> {
    run_quasistatic_with(grid, coeffs, src, tg, schedule, params, |_, _| Ok(()))
}

/// As [`run_quasistatic`], calling `on_step(k, state)` after each step.
pub fn run_quasistatic_with<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
    schedule: &RegSchedule<T>,
    params: &SolverParams<T>,
    mut on_step: impl FnMut(usize, &EllipticState<T>) -> Result<()>,
) -> Result<Trajectory<T>> {
    coeffs.validate()?;
    src.check_initial(grid)?;
    let sources = interval_averaged_sources(grid, src, tg)?;
    let tau = tg.tau();
    let mut states: Vec<EllipticState<T>> = Vec::with_capacity(tg.steps());
    for (k, step) in sources.iter().enumerate() {
        let prev = match states.last() {
            Some(s) => (&s.theta1, &s.theta2),
            None => (&src.theta10, &src.theta20),
        };
        let state = quasistatic_step(grid, coeffs, prev, step, tau, schedule, params, states.last())?;
        on_step(k + 1, &state)?;
        states.push(state);
    }
    Ok(Trajectory {
        time: *tg,
        theta10: src.theta10.clone(),
        theta20: src.theta20.clone(),
        sources,
        states,
    })
}

/// Piecewise-constant and piecewise-affine temperature interpolants.
#[derive(Debug, Clone, Copy)]
pub struct Interpolants<'a, T> {
    traj: &'a Trajectory<T>,
}

pub fn interpolants<T: Real>(traj: &Trajectory<T>) -> Interpolants<'_, T> {
    Interpolants { traj }
}

impl<T: Real> Interpolants<'_, T> {
    /// `θᵏ` for `t ∈ [t_{k-1}, t_k)`.
    pub fn constant(&self, t: T) -> (ScalarField<T>, ScalarField<T>) {
        let k = self.traj.time.interval_of(t);
        let (a, b) = self.traj.temperatures(k);
        (a.clone(), b.clone())
    }

    /// Linear interpolation between `θᵏ⁻¹` at `t_{k-1}` and `θᵏ` at `t_k`.
    pub fn affine(&self, t: T) -> (ScalarField<T>, ScalarField<T>) {
        let tg = &self.traj.time;
        let k = tg.interval_of(t);
        let s = ((t - tg.time(k - 1)) / tg.tau()).max(T::zero()).min(T::one());
        let (a0, b0) = self.traj.temperatures(k - 1);
        let (a1, b1) = self.traj.temperatures(k);
        let lerp = |x: T, y: T| x + s * (y - x);
        (a0.zip_map(a1, lerp), b0.zip_map(b1, lerp))
    }
}

/// `L²(0, T; L²)` distance between the two interpolants, both temperatures
/// combined. On each interval the difference is `(1 - s)(θᵏ - θᵏ⁻¹)`, so the
/// time integral is exact: `Σ_k τ/3 (‖Δθ₁ᵏ‖² + ‖Δθ₂ᵏ‖²)`.
pub fn interpolant_gap<T: Real>(traj: &Trajectory<T>) -> T {
    let third = traj.time.tau() / T::lit(3.0);
    let mut sum = T::zero();
    for k in 1..=traj.time.steps() {
        let (a0, b0) = traj.temperatures(k - 1);
        let (a1, b1) = traj.temperatures(k);
        let d1 = a1.sub(a0).l2_norm();
        let d2 = b1.sub(b0).l2_norm();
        sum = sum + third * (d1 * d1 + d2 * d2);
    }
    sum.sqrt()
}

/// Least-squares slope of `log value` against `log step`.
pub fn decay_exponent<T: Real>(steps: &[T], values: &[T]) -> T {
    assert_eq!(steps.len(), values.len());
    let n = T::from_count(steps.len());
    let xs: Vec<T> = steps.iter().map(|s| s.ln()).collect();
    let ys: Vec<T> = values.iter().map(|v| v.ln()).collect();
    let mx = xs.iter().copied().sum::<T>() / n;
    let my = ys.iter().copied().sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (&x, &y) in xs.iter().zip(&ys) {
        num = num + (x - mx) * (y - my);
        den = den + (x - mx) * (x - mx);
    }
    num / den
}

/// `(l, L)`: extremes of `h₁/c₁`, `h₂/c₂` over the sampled space-time
/// cylinder and of both initial temperatures.
pub fn bounds_l_upper<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
) -> Result<(T, T)> {
    let mut lo = src.theta10.min().min(src.theta20.min());
    let mut hi = src.theta10.max().max(src.theta20.max());
    for t in sample_times(src, tg) {
        let h1 = src.h1.sample(grid, t)?;
        let h2 = src.h2.sample(grid, t)?;
        lo = lo.min(h1.min() / coeffs.c1).min(h2.min() / coeffs.c2);
        hi = hi.max(h1.max() / coeffs.c1).max(h2.max() / coeffs.c2);
    }
    Ok((lo, hi))
}

/// `∫₀ᵀ ‖h₁(t)‖∞ dt` by the interval quadrature.
pub fn h1_l1_linfty<T: Real>(grid: Grid, src: &TimeSources<T>, tg: &TimeGrid<T>) -> Result<T> {
    if src.h1.is_static() {
        return Ok(tg.horizon() * src.h1.sample(grid, T::zero())?.max_abs());
    }
    let tau = tg.tau();
    let mut total = T::zero();
    for k in 1..=tg.steps() {
        for (t, w) in interval_rule(tg, k) {
            total = total + tau * w * src.h1.sample(grid, t)?.max_abs();
        }
    }
    Ok(total)
}

/// `L̂ = ∫₀ᵀ ‖h₁‖∞ + ‖θ₁₀‖∞`, the bound on every `‖θ₁ᵏ‖∞`.
pub fn theta1_bound<T: Real>(grid: Grid, src: &TimeSources<T>, tg: &TimeGrid<T>) -> Result<T> {
    Ok(h1_l1_linfty(grid, src, tg)? + src.theta10.max_abs())
}

/// Structural sign conditions of the evolutionary analysis:
/// `κ₁ = κ₂`, `c₂ ≥ c₁`, `h₁ ≥ h₂ ≥ 0` and `θ₁₀ ≥ θ₂₀ ≥ 0`.
pub fn sign_conditions_hold<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
) -> Result<bool> {
    if coeffs.kappa1 != coeffs.kappa2 || coeffs.c2 < coeffs.c1 {
        return Ok(false);
    }
    let ordered = |a: &ScalarField<T>, b: &ScalarField<T>| {
        a.values().iter().zip(b.values()).all(|(&x, &y)| x >= y && y >= T::zero())
    };
    if !ordered(&src.theta10, &src.theta20) {
        return Ok(false);
    }
    for t in sample_times(src, tg) {
        if !ordered(&src.h1.sample(grid, t)?, &src.h2.sample(grid, t)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `min (f - a g)` over the sampled cylinder; requires constant `a`.
fn force_margin<T: Real>(grid: Grid, a: T, src: &TimeSources<T>, tg: &TimeGrid<T>) -> Result<T> {
    let mut lhs = T::infinity();
    for t in sample_times(src, tg) {
        let f = src.f.sample(grid, t)?;
        let g = src.g.sample(grid, t)?;
        for (&fv, &gv) in f.values().iter().zip(g.values()) {
            lhs = lhs.min(fv - a * gv);
        }
    }
    Ok(lhs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolicNondegeneracy {
    /// `f - a g > α a L̂`.
    pub weak: ConditionReport,
    /// `f - a g > 2 α a L̂`.
    pub strong: ConditionReport,
}

/// Data conditions under which every step has a non-degenerate contact
/// set (weak) and under which the time-continuous contact indicator is
/// identified (strong). Constant `a` and the sign conditions are required.
pub fn parabolic_nondegeneracy<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
) -> Result<ParabolicNondegeneracy> {
    let na = |r: &str| ParabolicNondegeneracy {
        weak: ConditionReport::not_applicable(r),
        strong: ConditionReport::not_applicable(r),
    };
    let Some(a) = coeffs.a.constant_value() else {
        return Ok(na("requires a constant coefficient a"));
    };
    if !sign_conditions_hold(grid, coeffs, src, tg)? {
        return Ok(na("requires kappa1 = kappa2, c2 >= c1, h1 >= h2 >= 0, theta10 >= theta20 >= 0"));
    }
    let lhs = force_margin(grid, a, src, tg)?.to_f64_lossy();
    let rhs = (coeffs.alpha * a * theta1_bound(grid, src, tg)?).to_f64_lossy();
    Ok(ParabolicNondegeneracy {
        weak: ConditionReport::new(lhs, rhs, 0.0),
        strong: ConditionReport::new(lhs, 2.0 * rhs, 0.0),
    })
}

/// Uniqueness condition `f > a g + a α (L - l)(2 + (b₁ + b₂)/γ₀)` on the
/// sampled cylinder.
pub fn parabolic_uniqueness_check<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    tg: &TimeGrid<T>,
) -> Result<ConditionReport> {
    let (l, big_l) = bounds_l_upper(grid, coeffs, src, tg)?;
    let (a, rhs) = match uniqueness_threshold(coeffs, big_l - l) {
        Ok(v) => v,
        Err(reason) => return Ok(ConditionReport::not_applicable(reason)),
    };
    let lhs = force_margin(grid, a, src, tg)?;
    Ok(ConditionReport::new(lhs.to_f64_lossy(), rhs.to_f64_lossy(), 0.0))
}

/// Smallest pointwise non-degeneracy margin `min (f - A_θΦ)` over all
/// steps, used as the estimate of the constant `μ`.
pub fn pointwise_margin_estimate<T: Real>(traj: &Trajectory<T>, coeffs: &Coefficients<T>) -> Result<Option<T>> {
    let mut mu = T::infinity();
    for (st, src) in traj.states.iter().zip(&traj.sources) {
        let nd = nondegeneracy_check(st, coeffs, src)?;
        if !nd.pointwise.applicable {
            return Ok(None);
        }
        mu = mu.min(T::lit(nd.pointwise.lhs));
    }
    Ok(Some(mu))
}

/// Slack `RHS - LHS` of the contact-set continuity estimate between steps
/// `s` and `t` (both in `1..=N`):
///
/// ```text
/// ‖χᵗ - χˢ‖₁ ≤ C (‖fᵗ - fˢ‖₁ + a‖gᵗ - gˢ‖₁ + aα‖(θ₁-θ₂)ᵗ - (θ₁-θ₂)ˢ‖₁),
/// C = 1/(μ - aαL̂).
/// ```
pub fn chi_time_modulus<T: Real>(
    traj: &Trajectory<T>,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    s: usize,
    t: usize,
    mu: T,
) -> Result<Gated<T>> {
    let n = traj.time.steps();
    if s == 0 || t == 0 || s > n || t > n {
        return Err(Error::InvalidParameter(format!("step indices must lie in 1..={n}")));
    }
    let Some(a) = coeffs.a.constant_value() else {
        return Ok(Gated::NotApplicable("requires a constant coefficient a"));
    };
    let l_hat = theta1_bound(traj.grid(), src, &traj.time)?;
    let denom = mu - a * coeffs.alpha * l_hat;
    if !(denom > T::zero()) {
        return Ok(Gated::NotApplicable("requires mu > a alpha L-hat"));
    }
    let (ss, st) = (&traj.states[s - 1], &traj.states[t - 1]);
    let (ds, dt) = (&traj.sources[s - 1], &traj.sources[t - 1]);
    let lhs = st.chi.sub(&ss.chi).l1_norm();
    let gap_s = ss.theta1.sub(&ss.theta2);
    let gap_t = st.theta1.sub(&st.theta2);
    let rhs = (dt.f.sub(&ds.f).l1_norm()
        + a * dt.g.sub(&ds.g).l1_norm()
        + a * coeffs.alpha * gap_t.sub(&gap_s).l1_norm())
        / denom;
    Ok(Gated::Value(rhs - lhs))
}

/// Slack of `‖θ₁ - θ₂‖∞ ≤ T‖h₁ - h₂‖∞ + ‖θ₁₀ - θ₂₀‖∞` over all steps.
/// Requires `κ₁ = κ₂`, `c₁ = c₂` and `h₁/κ₁ ≥ h₂/κ₂ ≥ 0`.
pub fn temp_diff_linfty_check<T: Real>(
    traj: &Trajectory<T>,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
) -> Result<Gated<T>> {
    if coeffs.kappa1 != coeffs.kappa2 || coeffs.c1 != coeffs.c2 {
        return Ok(Gated::NotApplicable("requires kappa1 = kappa2 and c1 = c2"));
    }
    let grid = traj.grid();
    let mut k1 = T::zero();
    for t in sample_times(src, &traj.time) {
        let h1 = src.h1.sample(grid, t)?;
        let h2 = src.h2.sample(grid, t)?;
        if !comparison_applicable(coeffs, &h1, &h2) {
            return Ok(Gated::NotApplicable("requires h1/kappa1 >= h2/kappa2 >= 0"));
        }
        k1 = k1.max(h1.dist_inf(&h2));
    }
    let rhs = traj.time.horizon() * k1 + traj.theta10.dist_inf(&traj.theta20);
    let lhs = (0..=traj.time.steps())
        .map(|k| {
            let (a, b) = traj.temperatures(k);
            a.dist_inf(b)
        })
        .fold(T::zero(), T::max);
    Ok(Gated::Value(rhs - lhs))
}

/// Residuals of the two relations between backward time differences `Dᵢ`
/// and the reconstructed rates `ηᵢ = hᵢ + (-1)ⁱbᵢ(θ₁ - θ₂)χ - (-κᵢΔ + cᵢ)θᵢ`
/// with the binary contact indicator `χ`:
/// `b₂D₁ + b₁D₂ = b₂η₁ + b₁η₂` (`r_sum`, an identity of the scheme) and
/// `b₂D₁ - b₁D₂ = b₂η₁ - b₁η₂` (`r_diff`, which holds only where the
/// exchange weight used in the step agrees with `χ`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VeryWeakResidual {
    pub r_sum: f64,
    pub r_diff: f64,
}

pub fn very_weak_residual<T: Real>(traj: &Trajectory<T>, coeffs: &Coefficients<T>) -> Result<VeryWeakResidual> {
    let grid = traj.grid();
    let tau = traj.time.tau();
    let c1 = ScalarField::constant(grid, coeffs.c1);
    let c2 = ScalarField::constant(grid, coeffs.c2);
    let op1 = assemble_neumann_helmholtz(grid, coeffs.kappa1, &c1)?;
    let op2 = assemble_neumann_helmholtz(grid, coeffs.kappa2, &c2)?;
    let (b1, b2) = (coeffs.b1, coeffs.b2);
    let mut r_sum = T::zero();
    let mut r_diff = T::zero();
    for k in 1..=traj.time.steps() {
        let (p1, p2) = traj.temperatures(k - 1);
        let st = &traj.states[k - 1];
        let step = &traj.sources[k - 1];
        let l1 = op1.apply(&st.theta1);
        let l2 = op2.apply(&st.theta2);
        for p in 0..grid.node_count() {
            let (t1, t2) = (st.theta1.values()[p], st.theta2.values()[p]);
            let x = (t1 - t2) * st.chi.values()[p];
            let eta1 = step.h1.values()[p] - b1 * x - l1.values()[p];
            let eta2 = step.h2.values()[p] + b2 * x - l2.values()[p];
            let d1 = (t1 - p1.values()[p]) / tau;
            let d2 = (t2 - p2.values()[p]) / tau;
            r_sum = r_sum.max((b2 * (d1 - eta1) + b1 * (d2 - eta2)).abs());
            r_diff = r_diff.max((b2 * (d1 - eta1) - b1 * (d2 - eta2)).abs());
        }
    }
    Ok(VeryWeakResidual {
        r_sum: r_sum.to_f64_lossy(),
        r_diff: r_diff.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::continuation_solve;

    fn unit_grid(n: usize) -> Grid {
        Grid::new(1, n).unwrap()
    }

    fn benchmark_sources(g: Grid) -> EllipticSources<f64> {
        EllipticSources {
            f: ScalarField::constant(g, 32.0),
            g: ScalarField::constant(g, 1.0),
            h1: ScalarField::constant(g, 3.0),
            h2: ScalarField::zeros(g),
        }
    }

    fn decoupled() -> Coefficients<f64> {
        Coefficients {
            b1: 0.0,
            b2: 0.0,
            alpha: 0.0,
            ..Coefficients::unit()
        }
    }

    fn at(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Source<f64> {
        Source::function(move |_, _, t| f(t))
    }

    #[test]
    fn time_grid_basics() {
        let tg = TimeGrid::new(1.0, 4).unwrap();
        assert_eq!(tg.tau(), 0.25);
        assert_eq!(tg.time(4), 1.0);
        assert_eq!(tg.interval_of(0.0), 1);
        assert_eq!(tg.interval_of(0.25), 2);
        assert_eq!(tg.interval_of(1.0), 4);
        assert!(TimeGrid::new(1.0, 0).is_err());
        assert!(TimeGrid::<f64>::new(0.0, 3).is_err());
    }

    #[test]
    fn interval_averages() {
        let g = unit_grid(2);
        let z = ScalarField::zeros(g);
        let mk = |f: Source<f64>| TimeSources {
            f,
            g: Source::Constant(0.0),
            h1: Source::Constant(0.0),
            h2: Source::Constant(0.0),
            theta10: z.clone(),
            theta20: z.clone(),
        };
        let c = interval_averaged_sources(g, &mk(at(|_| 1.7)), &TimeGrid::new(1.0, 3).unwrap()).unwrap();
        assert!(c.iter().all(|s| s.f.values().iter().all(|&v| v == 1.7)));

        let lin = interval_averaged_sources(g, &mk(at(|t| t)), &TimeGrid::new(1.0, 2).unwrap()).unwrap();
        assert!((lin[0].f.values()[0] - 0.25).abs() < 1e-15);
        assert!((lin[1].f.values()[0] - 0.75).abs() < 1e-15);

        let sq = interval_averaged_sources(g, &mk(at(|t| t * t)), &TimeGrid::new(1.0, 4).unwrap()).unwrap();
        // mean over [0, 1/4] is 1/48; the interval integral τ f¹ is 1/192
        let mean = sq[0].f.values()[0];
        assert!((mean - 1.0 / 48.0).abs() < 1e-15);
        assert!((0.25 * mean - 1.0 / 192.0).abs() < 1e-16);
    }

    #[test]
    fn interval_average_minimises_interval_misfit() {
        // the mean is the L² projection onto constants
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let tg = TimeGrid::new(2.0, 5).unwrap();
        let g = unit_grid(2);
        let z = ScalarField::zeros(g);
        let src = TimeSources {
            f: at(f),
            g: Source::Constant(0.0),
            h1: Source::Constant(0.0),
            h2: Source::Constant(0.0),
            theta10: z.clone(),
            theta20: z,
        };
        let c = interval_averaged_sources(g, &src, &tg).unwrap();
        for k in [1, 3, 5] {
            let mean = c[k - 1].f.values()[0];
            let misfit = |v: f64| {
                interval_rule(&tg, k).iter().map(|&(t, w)| w * (f(t) - v).powi(2)).sum::<f64>()
            };
            for d in [-1e-2, 1e-3, 0.1] {
                assert!(misfit(mean + d) > misfit(mean));
            }
        }
    }

    #[test]
    fn scalar_decay_step() {
        let g = unit_grid(8);
        let theta = ScalarField::constant(g, 2.0);
        let step = EllipticSources::zeros(g);
        let coeffs = Coefficients { c1: 3.0, ..decoupled() };
        let tau = 0.1;
        let s = quasistatic_step(
            g,
            &coeffs,
            (&theta, &theta),
            &step,
            tau,
            &RegSchedule::default(),
            &SolverParams::default(),
            None,
        )
        .unwrap();
        let want = 2.0 / (1.0 + tau * 3.0);
        assert!(s.theta1.values().iter().all(|v| (v - want).abs() < 1e-9));
    }

    #[test]
    fn zero_data_gives_zero_trajectory() {
        let g = unit_grid(8);
        let z = ScalarField::zeros(g);
        let src = TimeSources::stationary(&EllipticSources::zeros(g), z.clone(), z);
        let tg = TimeGrid::new(1.0, 3).unwrap();
        let traj =
            run_quasistatic(g, &Coefficients::unit(), &src, &tg, &RegSchedule::default(), &SolverParams::default())
                .unwrap();
        assert_eq!(traj.states.len(), 3);
        for s in &traj.states {
            for f in [&s.theta1, &s.theta2, &s.phi, &s.u] {
                assert_eq!(f.max_abs(), 0.0);
            }
        }
        assert_eq!(interpolant_gap(&traj), 0.0);
    }

    #[test]
    fn steady_state_is_preserved() {
        let g = unit_grid(32);
        let coeffs = Coefficients::unit();
        let src = benchmark_sources(g);
        let (sched, params) = (RegSchedule::default(), SolverParams::default());
        let ell = continuation_solve(g, &coeffs, &src, &sched, &params).unwrap();
        let ts = TimeSources::stationary(&src, ell.theta1.clone(), ell.theta2.clone());
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let traj = run_quasistatic(g, &coeffs, &ts, &tg, &sched, &params).unwrap();
        for s in &traj.states {
            assert!(s.distance(&ell) < 1e-6, "{}", s.distance(&ell));
        }
        let vw = very_weak_residual(&traj, &coeffs).unwrap();
        assert!(vw.r_sum < 1e-6);
    }

    #[test]
    fn interpolant_definitions() {
        let g = unit_grid(4);
        let coeffs = Coefficients { c1: 2.0, c2: 2.0, ..decoupled() };
        let src = TimeSources::stationary(
            &EllipticSources::zeros(g),
            ScalarField::constant(g, 1.0),
            ScalarField::constant(g, 0.5),
        );
        let tg = TimeGrid::new(1.0, 4).unwrap();
        let traj = run_quasistatic(g, &coeffs, &src, &tg, &RegSchedule::default(), &SolverParams::default()).unwrap();
        let ip = interpolants(&traj);
        let (pa0, _) = ip.affine(0.0);
        assert_eq!(pa0, traj.theta10);
        let t = tg.time(2) - tg.tau() / 2.0;
        let (pc, _) = ip.constant(t);
        assert_eq!(&pc, traj.temperatures(2).0);
        let (pa, _) = ip.affine(t);
        let mid = traj.temperatures(1).0.zip_map(traj.temperatures(2).0, |a, b| 0.5 * (a + b));
        assert!(pa.dist_inf(&mid) < 1e-15);
        let (pa_k, _) = ip.affine(tg.time(3));
        assert_eq!(&pa_k, traj.temperatures(3).0);
    }

    #[test]
    fn single_step_gap_closed_form() {
        let g = unit_grid(4);
        let src = TimeSources::stationary(
            &EllipticSources::zeros(g),
            ScalarField::constant(g, 1.0),
            ScalarField::constant(g, 0.0),
        );
        let tg = TimeGrid::new(1.0, 1).unwrap();
        let traj = run_quasistatic(g, &decoupled(), &src, &tg, &RegSchedule::default(), &SolverParams::default())
            .unwrap();
        let d = 1.0 - 1.0 / 2.0; // θ¹ = θ⁰/(1 + τc)
        let want = d / 3f64.sqrt();
        assert!((interpolant_gap(&traj) - want).abs() < 1e-9);
    }

    #[test]
    fn bounds_and_condition_formulas() {
        let g = unit_grid(4);
        let one = ScalarField::constant(g, 1.0);
        let coeffs = Coefficients { c1: 4.0, ..Coefficients::unit() };
        let src = TimeSources {
            f: Source::Constant(2.5),
            g: Source::Constant(0.0),
            h1: Source::Constant(2.0),
            h2: Source::Constant(3.0),
            theta10: one.clone(),
            theta20: one.clone(),
        };
        let tg = TimeGrid::new(1.0, 2).unwrap();
        assert_eq!(bounds_l_upper(g, &coeffs, &src, &tg).unwrap(), (0.5, 3.0));

        let src = TimeSources {
            h1: Source::Constant(1.0),
            h2: Source::Constant(0.0),
            theta20: ScalarField::zeros(g),
            ..src
        };
        let c = Coefficients::unit();
        let r = parabolic_nondegeneracy(g, &c, &src, &tg).unwrap();
        assert!((r.weak.margin - 0.5).abs() < 1e-14);
        assert!((r.strong.margin + 1.5).abs() < 1e-14);
        let r5 = parabolic_nondegeneracy(g, &c, &TimeSources { f: Source::Constant(5.0), ..src.clone() }, &tg).unwrap();
        assert!(r5.weak.holds() && r5.strong.holds());

        let varying = Coefficients {
            a: crate::thermal::CoefficientFunction::table(vec![(0.0, 1.0), (1.0, 2.0)]).unwrap(),
            ..Coefficients::unit()
        };
        assert!(!parabolic_nondegeneracy(g, &varying, &src, &tg).unwrap().weak.applicable);
        assert!(!parabolic_uniqueness_check(g, &varying, &src, &tg).unwrap().applicable);
    }

    #[test]
    fn pulse_raises_upper_bound() {
        let g = unit_grid(4);
        let z = ScalarField::zeros(g);
        let src = TimeSources {
            f: Source::Constant(0.0),
            g: Source::Constant(0.0),
            h1: at(|t| 8.0 * (1.0 - 4.0 * (t - 0.5).abs()).max(0.0)),
            h2: Source::Constant(0.0),
            theta10: z.clone(),
            theta20: z,
        };
        let coeffs = Coefficients { c1: 2.0, ..Coefficients::unit() };
        let (_, big_l) = bounds_l_upper(g, &coeffs, &src, &TimeGrid::new(1.0, 4).unwrap()).unwrap();
        assert_eq!(big_l, 4.0);
    }

    #[test]
    fn temporal_self_convergence_is_first_order() {
        let g = unit_grid(8);
        let coeffs = Coefficients { c1: 1.0, c2: 2.0, ..decoupled() };
        let src = TimeSources {
            f: Source::Constant(0.0),
            g: Source::Constant(0.0),
            h1: Source::function(|x, _, t| 1.0 + t * (1.0 + x)),
            h2: Source::Constant(0.5),
            theta10: ScalarField::constant(g, 1.0),
            theta20: ScalarField::zeros(g),
        };
        let run = |n: usize| {
            let tg = TimeGrid::new(1.0, n).unwrap();
            let tr = run_quasistatic(g, &coeffs, &src, &tg, &RegSchedule::default(), &SolverParams::default())
                .unwrap();
            tr.states.last().unwrap().theta1.clone()
        };
        let (a, b, c) = (run(8), run(16), run(32));
        let e1 = a.dist_inf(&b);
        let e2 = b.dist_inf(&c);
        let ratio = e1 / e2;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn decay_exponent_recovers_power_law() {
        let steps = [0.5, 0.25, 0.125];
        let vals: Vec<f64> = steps.iter().map(|s: &f64| 3.0 * s.powf(0.7)).collect();
        assert!((decay_exponent(&steps, &vals) - 0.7).abs() < 1e-12);
    }
}
