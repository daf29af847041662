//! Scorecards: every analytic property evaluated on a solved state or
//! trajectory, in a fixed order.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::conditions::{ConditionReport, Gated};
use crate::contact::{contact_identity, lewy_stampacchia_violation};
use crate::discretization::{Grid, ScalarField};
use crate::elliptic::{
    continuation_solve, equation_residuals, nondegeneracy_check, uniqueness_check, EllipticSources, EllipticState,
    RegSchedule, SolverParams,
};
use crate::error::Result;
use crate::quasistatic::{
    bounds_l_upper, chi_time_modulus, decay_exponent, interpolant_gap, parabolic_nondegeneracy,
    parabolic_uniqueness_check, pointwise_margin_estimate, run_quasistatic, step_problem, temp_diff_linfty_check,
    theta1_bound, very_weak_residual, TimeGrid, TimeSources, Trajectory,
};
use crate::scalar::Real;
use crate::thermal::{
    bounds_m_upper, check_comparison, comparison_applicable, conservation_residual, l1_dependence_slack,
    linfty_theta1, solve_pair, Coefficients, PairSnapshot,
};

/// Direction of the comparison between `measured` and `threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sense {
    AtMost,
    AtLeast,
    /// Strictly greater; used for hypotheses of the form `lhs > rhs`.
    Above,
    /// Reported only.
    Info,
}

/// Invariants must hold on every solved state; conditions are hypotheses
/// on the data whose failure is information rather than an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CheckKind {
    Invariant,
    Condition,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub kind: CheckKind,
    pub sense: Sense,
    pub applicable: bool,
    pub measured: f64,
    pub threshold: f64,
    /// `None` when not applicable.
    pub pass: Option<bool>,
    pub anchor: &'static str,
    pub reason: Option<String>,
}

impl CheckResult {
    fn evaluate(name: &'static str, kind: CheckKind, sense: Sense, measured: f64, threshold: f64) -> Self {
        let pass = match sense {
            Sense::AtMost => measured <= threshold,
            Sense::AtLeast => measured >= threshold,
            Sense::Above => measured > threshold,
            Sense::Info => true,
        };
        Self {
            name,
            kind,
            sense,
            applicable: true,
            measured,
            threshold,
            pass: Some(pass),
            anchor: anchor_of(name),
            reason: None,
        }
    }

    fn skipped(name: &'static str, kind: CheckKind, sense: Sense, reason: impl Into<String>) -> Self {
        Self {
            name,
            kind,
            sense,
            applicable: false,
            measured: f64::NAN,
            threshold: f64::NAN,
            pass: None,
            anchor: anchor_of(name),
            reason: Some(reason.into()),
        }
    }

    /// An applicable invariant that does not hold.
    pub fn is_failure(&self) -> bool {
        self.kind == CheckKind::Invariant && self.pass == Some(false)
    }
}

/// Names of the stationary checks, in scorecard order.
pub const ELLIPTIC_MANIFEST: [&str; 17] = [
    "residual_theta1",
    "residual_theta2",
    "residual_mould",
    "residual_membrane",
    "heat_conservation",
    "temperature_lower_bound",
    "temperature_upper_bound",
    "comparison_principle",
    "theta1_linfty_bound",
    "temperature_gap_bound",
    "obstacle_feasibility",
    "lewy_stampacchia",
    "contact_identity",
    "regular_contact_indicator",
    "nondegeneracy_pointwise",
    "nondegeneracy_sufficient",
    "uniqueness_condition",
];

/// Names of the evolutionary checks, in scorecard order.
pub const QUASISTATIC_MANIFEST: [&str; 15] = [
    "step_residual",
    "step_contact_identity",
    "parabolic_lower_bound",
    "parabolic_upper_bound",
    "linfty_recursion",
    "theta1_uniform_bound",
    "temperature_difference_growth",
    "interpolant_gap_rate",
    "chi_time_modulus",
    "very_weak_sum",
    "very_weak_difference",
    "parabolic_nondegeneracy_weak",
    "parabolic_nondegeneracy_strong",
    "parabolic_uniqueness_condition",
    "step_regular_contact_indicator",
];

fn anchor_of(name: &str) -> &'static str {
    match name {
        "residual_theta1" | "residual_theta2" => "temperature equations",
        "residual_mould" => "mould equation",
        "residual_membrane" => "membrane complementarity",
        "heat_conservation" => "heat conservation law",
        "temperature_lower_bound" | "temperature_upper_bound" => "stationary temperature bounds m and M",
        "comparison_principle" => "comparison principle theta1 >= theta2 >= 0",
        "theta1_linfty_bound" => "sup-norm bound on theta1",
        "temperature_gap_bound" => "temperature difference bound M - m",
        "obstacle_feasibility" => "membrane below mould",
        "lewy_stampacchia" => "Lewy-Stampacchia inequality",
        "contact_identity" => "contact identity int chi (Phi - u)+ = 0",
        "regular_contact_indicator" | "step_regular_contact_indicator" => "regular solution chi = 1{u = Phi}",
        "nondegeneracy_pointwise" => "pointwise non-degeneracy f - A Phi > 0",
        "nondegeneracy_sufficient" => "sufficient non-degeneracy condition on data",
        "uniqueness_condition" => "stationary uniqueness condition",
        "step_residual" => "implicit Euler step equations",
        "step_contact_identity" => "contact identity at every step",
        "parabolic_lower_bound" | "parabolic_upper_bound" => "evolutionary temperature bounds l and L",
        "linfty_recursion" => "per-step sup-norm recursion for theta1",
        "theta1_uniform_bound" => "uniform sup-norm bound on theta1",
        "temperature_difference_growth" => "temperature difference growth bound",
        "interpolant_gap_rate" => "interpolant gap of order tau^(1/2)",
        "chi_time_modulus" => "contact set continuity in time",
        "very_weak_sum" | "very_weak_difference" => "very weak formulation relations",
        "parabolic_nondegeneracy_weak" => "non-degeneracy at every step",
        "parabolic_nondegeneracy_strong" => "strong non-degeneracy",
        "parabolic_uniqueness_condition" => "evolutionary uniqueness condition",
        "perturbation_h1" | "perturbation_h2" | "perturbation_f" | "perturbation_g" | "perturbation_chi" => {
            "L1 continuous dependence of temperatures"
        }
        _ => "",
    }
}

/// Tolerances of the scorecard. Thresholds are `tol · (1 + scale)` with a
/// per-check scale, unless overridden by name.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyParams {
    pub tol: f64,
    pub overrides: BTreeMap<String, f64>,
}

impl Default for VerifyParams {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            overrides: BTreeMap::new(),
        }
    }
}

impl VerifyParams {
    fn slack(&self, name: &str, scale: f64) -> f64 {
        self.overrides
            .get(name)
            .copied()
            .unwrap_or(self.tol * (1.0 + scale.abs()))
    }
}

fn f<T: Real>(v: T) -> f64 {
    v.to_f64_lossy()
}

fn condition(name: &'static str, r: &ConditionReport) -> CheckResult {
    if r.applicable {
        CheckResult::evaluate(name, CheckKind::Condition, Sense::Above, r.margin, 0.0)
    } else {
        CheckResult::skipped(
            name,
            CheckKind::Condition,
            Sense::Above,
            r.reason.clone().unwrap_or_default(),
        )
    }
}

/// Stationary scorecard. `delta` is the contact threshold the state was
/// extracted with.
pub fn run_elliptic_checks<T: Real>(
    state: &EllipticState<T>,
    coeffs: &Coefficients<T>,
    src: &EllipticSources<T>,
    delta: T,
    vp: &VerifyParams,
) -> Result<Vec<CheckResult>> {
    use CheckKind::{Condition, Invariant};
    let (t1, t2) = (&state.theta1, &state.theta2);
    let (m, big_m) = bounds_m_upper(coeffs, &src.h1, &src.h2);
    let temp_scale = f(m.abs().max(big_m.abs()));
    let theta_inf = f(t1.max_abs().max(t2.max_abs()));
    let heat_scale = f(src.h1.max_abs() + src.h2.max_abs())
        + f(coeffs.c1.max(coeffs.c2) + coeffs.b1.max(coeffs.b2)) * theta_inf;
    let mut out = Vec::with_capacity(ELLIPTIC_MANIFEST.len());

    let res = equation_residuals(state, coeffs, src)?;
    let mould_scale = f(src.g.max_abs()) + f(coeffs.alpha) * theta_inf;
    let load_scale = f(src.f.max_abs());
    for (name, v, s) in [
        ("residual_theta1", res.theta1, heat_scale),
        ("residual_theta2", res.theta2, heat_scale),
        ("residual_mould", res.mould, mould_scale),
        ("residual_membrane", res.membrane, load_scale),
    ] {
        out.push(CheckResult::evaluate(name, Invariant, Sense::AtMost, v, vp.slack(name, s)));
    }

    let cons = conservation_residual(coeffs, &src.h1, &src.h2, &state.sigma, t1, t2);
    let int_scale = f(src.h1.l1_norm() + src.h2.l1_norm());
    out.push(CheckResult::evaluate(
        "heat_conservation",
        Invariant,
        Sense::AtMost,
        f(cons),
        vp.slack("heat_conservation", int_scale),
    ));

    let lo = f(t1.min().min(t2.min()));
    let hi = f(t1.max().max(t2.max()));
    out.push(CheckResult::evaluate(
        "temperature_lower_bound",
        Invariant,
        Sense::AtLeast,
        lo,
        f(m) - vp.slack("temperature_lower_bound", temp_scale),
    ));
    out.push(CheckResult::evaluate(
        "temperature_upper_bound",
        Invariant,
        Sense::AtMost,
        hi,
        f(big_m) + vp.slack("temperature_upper_bound", temp_scale),
    ));

    match check_comparison(t1, t2, coeffs, &src.h1, &src.h2) {
        Gated::Value(v) => out.push(CheckResult::evaluate(
            "comparison_principle",
            Invariant,
            Sense::AtMost,
            f(v),
            vp.slack("comparison_principle", temp_scale),
        )),
        Gated::NotApplicable(r) => out.push(CheckResult::skipped("comparison_principle", Invariant, Sense::AtMost, r)),
    }
    if comparison_applicable(coeffs, &src.h1, &src.h2) {
        let bound = linfty_theta1(coeffs, &src.h1);
        out.push(CheckResult::evaluate(
            "theta1_linfty_bound",
            Invariant,
            Sense::AtMost,
            f(t1.max_abs()),
            f(bound) + vp.slack("theta1_linfty_bound", f(bound)),
        ));
    } else {
        out.push(CheckResult::skipped(
            "theta1_linfty_bound",
            Invariant,
            Sense::AtMost,
            "requires c2/kappa2 >= c1/kappa1 and h1/kappa1 >= h2/kappa2 >= 0",
        ));
    }
    out.push(CheckResult::evaluate(
        "temperature_gap_bound",
        Invariant,
        Sense::AtMost,
        f(t1.dist_inf(t2)),
        f(big_m - m) + vp.slack("temperature_gap_bound", temp_scale),
    ));

    let above = state.u.zip_map(&state.phi, |u, p| (u - p).pos()).max();
    out.push(CheckResult::evaluate(
        "obstacle_feasibility",
        Invariant,
        Sense::AtMost,
        f(above),
        vp.overrides.get("obstacle_feasibility").copied().unwrap_or(0.0),
    ));
    let ls = lewy_stampacchia_violation(coeffs, t1, &state.u, &state.phi, &src.f, Some(&state.chi))?;
    out.push(CheckResult::evaluate(
        "lewy_stampacchia",
        Invariant,
        Sense::AtMost,
        f(ls),
        vp.slack("lewy_stampacchia", load_scale),
    ));
    let ci = contact_identity(&state.chi, &state.u, &state.phi);
    out.push(CheckResult::evaluate(
        "contact_identity",
        Invariant,
        Sense::AtMost,
        f(ci),
        vp.overrides.get("contact_identity").copied().unwrap_or(f(delta)),
    ));

    out.push(CheckResult::evaluate(
        "regular_contact_indicator",
        Condition,
        Sense::AtMost,
        f(state.sigma.dist_inf(&state.chi)),
        0.0,
    ));
    let nd = nondegeneracy_check(state, coeffs, src)?;
    out.push(condition("nondegeneracy_pointwise", &nd.pointwise));
    out.push(condition("nondegeneracy_sufficient", &nd.sufficient));
    out.push(condition(
        "uniqueness_condition",
        &uniqueness_check(coeffs, &src.f, &src.g, m, big_m),
    ));
    debug_assert!(out.iter().map(|c| c.name).eq(ELLIPTIC_MANIFEST));
    Ok(out)
}

/// Evolutionary scorecard. The interpolant-gap rate needs a second
/// resolution: the problem is re-solved with `N/2` steps, so the check is
/// inapplicable for odd `N`.
#[allow(clippy::too_many_arguments)]
pub fn run_quasistatic_checks<T: Real>(
    traj: &Trajectory<T>,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    schedule: &RegSchedule<T>,
    solver: &SolverParams<T>,
    vp: &VerifyParams,
) -> Result<Vec<CheckResult>> {
    use CheckKind::{Condition, Invariant};
    let grid = traj.grid();
    let tg = traj.time;
    let tau = tg.tau();
    let mut out = Vec::with_capacity(QUASISTATIC_MANIFEST.len());

    // per-step equations of the shifted stationary problems
    let mut worst_ratio = 0.0f64;
    let mut worst_identity = 0.0f64;
    let mut identity_allowed = f64::INFINITY;
    let mut worst_indicator = 0.0f64;
    let mut recursion: Option<f64> = Some(f64::NEG_INFINITY);
    for k in 1..=tg.steps() {
        let st = &traj.states[k - 1];
        let prev = traj.temperatures(k - 1);
        let (aug, asrc) = step_problem(coeffs, &traj.sources[k - 1], prev, tau);
        let r = equation_residuals(st, &aug, &asrc)?;
        let theta_inf = f(st.theta1.max_abs().max(st.theta2.max_abs()));
        let heat = f(asrc.h1.max_abs() + asrc.h2.max_abs()) + f(aug.c1.max(aug.c2) + aug.b1.max(aug.b2)) * theta_inf;
        let mould = f(asrc.g.max_abs()) + f(aug.alpha) * theta_inf;
        let load = f(asrc.f.max_abs());
        for (v, s) in [(r.theta1, heat), (r.theta2, heat), (r.mould, mould), (r.membrane, load)] {
            worst_ratio = worst_ratio.max(v / (1.0 + s));
        }
        let delta = solver.contact.delta_for(&asrc.f, &aug.a);
        worst_identity = worst_identity.max(f(contact_identity(&st.chi, &st.u, &st.phi)) - f(delta));
        identity_allowed = identity_allowed.min(f(delta));
        worst_indicator = worst_indicator.max(f(st.sigma.dist_inf(&st.chi)));

        // ‖θ₁ᵏ‖ ≤ (τ‖h₁ᵏ‖ + ‖θ₁ᵏ⁻¹‖)/(τc₁ + 1) under the comparison hypotheses
        if comparison_applicable(&aug, &asrc.h1, &asrc.h2) {
            if let Some(w) = recursion.as_mut() {
                let rhs = (tau * traj.sources[k - 1].h1.max_abs() + prev.0.max_abs()) / (tau * coeffs.c1 + T::one());
                let scale = f(rhs);
                *w = w.max((f(st.theta1.max_abs()) - f(rhs)) / (1.0 + scale));
            }
        } else {
            recursion = None;
        }
    }
    out.push(CheckResult::evaluate(
        "step_residual",
        Invariant,
        Sense::AtMost,
        worst_ratio,
        vp.overrides.get("step_residual").copied().unwrap_or(vp.tol),
    ));
    out.push(CheckResult::evaluate(
        "step_contact_identity",
        Invariant,
        Sense::AtMost,
        worst_identity,
        vp.overrides.get("step_contact_identity").copied().unwrap_or(0.0),
    ));

    let (l, big_l) = bounds_l_upper(grid, coeffs, src, &tg)?;
    let lscale = f(l.abs().max(big_l.abs()));
    let (mut lo, mut hi) = (T::infinity(), T::neg_infinity());
    for k in 1..=tg.steps() {
        let (a, b) = traj.temperatures(k);
        lo = lo.min(a.min()).min(b.min());
        hi = hi.max(a.max()).max(b.max());
    }
    out.push(CheckResult::evaluate(
        "parabolic_lower_bound",
        Invariant,
        Sense::AtLeast,
        f(lo),
        f(l) - vp.slack("parabolic_lower_bound", lscale),
    ));
    out.push(CheckResult::evaluate(
        "parabolic_upper_bound",
        Invariant,
        Sense::AtMost,
        f(hi),
        f(big_l) + vp.slack("parabolic_upper_bound", lscale),
    ));

    let gate = "requires the comparison hypotheses at every step";
    match recursion {
        Some(w) => out.push(CheckResult::evaluate(
            "linfty_recursion",
            Invariant,
            Sense::AtMost,
            w,
            vp.overrides.get("linfty_recursion").copied().unwrap_or(vp.tol),
        )),
        None => out.push(CheckResult::skipped("linfty_recursion", Invariant, Sense::AtMost, gate)),
    }
    let l_hat = theta1_bound(grid, src, &tg)?;
    if recursion.is_some() {
        let peak = (1..=tg.steps())
            .map(|k| traj.temperatures(k).0.max_abs())
            .fold(T::zero(), T::max);
        out.push(CheckResult::evaluate(
            "theta1_uniform_bound",
            Invariant,
            Sense::AtMost,
            f(peak),
            f(l_hat) + vp.slack("theta1_uniform_bound", f(l_hat)),
        ));
    } else {
        out.push(CheckResult::skipped("theta1_uniform_bound", Invariant, Sense::AtMost, gate));
    }

    match temp_diff_linfty_check(traj, coeffs, src)? {
        Gated::Value(s) => out.push(CheckResult::evaluate(
            "temperature_difference_growth",
            Invariant,
            Sense::AtLeast,
            f(s),
            -vp.slack("temperature_difference_growth", lscale),
        )),
        Gated::NotApplicable(r) => out.push(CheckResult::skipped(
            "temperature_difference_growth",
            Invariant,
            Sense::AtLeast,
            r,
        )),
    }

    out.push(gap_rate_check(traj, coeffs, src, schedule, solver)?);

    let nd = parabolic_nondegeneracy(grid, coeffs, src, &tg)?;
    out.push(chi_modulus_check(traj, coeffs, src, &nd.strong, vp)?);

    let vw = very_weak_residual(traj, coeffs)?;
    let rate_scale = f(traj.sources.iter().fold(T::zero(), |m, s| m.max(s.h1.max_abs()).max(s.h2.max_abs())))
        + f((coeffs.b1 + coeffs.b2) * l.abs().max(big_l.abs()) / tau);
    out.push(CheckResult::evaluate(
        "very_weak_sum",
        Invariant,
        Sense::AtMost,
        vw.r_sum,
        vp.slack("very_weak_sum", rate_scale),
    ));
    out.push(CheckResult::evaluate(
        "very_weak_difference",
        Invariant,
        Sense::Info,
        vw.r_diff,
        f64::NAN,
    ));

    out.push(condition("parabolic_nondegeneracy_weak", &nd.weak));
    out.push(condition("parabolic_nondegeneracy_strong", &nd.strong));
    out.push(condition(
        "parabolic_uniqueness_condition",
        &parabolic_uniqueness_check(grid, coeffs, src, &tg)?,
    ));
    out.push(CheckResult::evaluate(
        "step_regular_contact_indicator",
        Condition,
        Sense::AtMost,
        worst_indicator,
        0.0,
    ));
    let _ = identity_allowed;
    debug_assert!(out.iter().map(|c| c.name).eq(QUASISTATIC_MANIFEST));
    Ok(out)
}

/// Exponent of the interpolant gap between `N/2` and `N` steps; the bound
/// predicts at least `1/2`, so the check requires `0.35`.
fn gap_rate_check<T: Real>(
    traj: &Trajectory<T>,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    schedule: &RegSchedule<T>,
    solver: &SolverParams<T>,
) -> Result<CheckResult> {
    let name = "interpolant_gap_rate";
    let n = traj.time.steps();
    if n < 2 || !n.is_multiple_of(2) {
        return Ok(CheckResult::skipped(
            name,
            CheckKind::Invariant,
            Sense::AtLeast,
            "needs an even number of steps for a second resolution",
        ));
    }
    let fine = interpolant_gap(traj);
    let tiny = T::epsilon().sqrt() * (T::one() + traj.theta10.max_abs());
    if fine <= tiny {
        return Ok(CheckResult::skipped(
            name,
            CheckKind::Invariant,
            Sense::AtLeast,
            "trajectory is constant in time",
        ));
    }
    let tg = TimeGrid::new(traj.time.horizon(), n / 2)?;
    let coarse_traj = run_quasistatic(traj.grid(), coeffs, src, &tg, schedule, solver)?;
    let coarse = interpolant_gap(&coarse_traj);
    let rate = decay_exponent(&[tg.tau(), traj.time.tau()], &[coarse, fine]);
    Ok(CheckResult::evaluate(name, CheckKind::Invariant, Sense::AtLeast, f(rate), 0.35))
}

fn chi_modulus_check<T: Real>(
    traj: &Trajectory<T>,
    coeffs: &Coefficients<T>,
    src: &TimeSources<T>,
    strong: &ConditionReport,
    vp: &VerifyParams,
) -> Result<CheckResult> {
    let name = "chi_time_modulus";
    let skip = |r: &str| Ok(CheckResult::skipped(name, CheckKind::Invariant, Sense::AtLeast, r));
    if !strong.holds() {
        return skip("requires a positive strong non-degeneracy margin");
    }
    if traj.time.steps() < 2 {
        return skip("needs at least two steps");
    }
    let Some(mu) = pointwise_margin_estimate(traj, coeffs)? else {
        return skip("pointwise non-degeneracy margin unavailable");
    };
    let mut worst = f64::INFINITY;
    for k in 1..traj.time.steps() {
        match chi_time_modulus(traj, coeffs, src, k, k + 1, mu)? {
            Gated::Value(s) => worst = worst.min(f(s)),
            Gated::NotApplicable(r) => return skip(r),
        }
    }
    Ok(CheckResult::evaluate(
        name,
        CheckKind::Invariant,
        Sense::AtLeast,
        worst,
        -vp.slack(name, 0.0),
    ))
}

/// Data change applied to a base problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Perturbation<T> {
    H1(ScalarField<T>),
    H2(ScalarField<T>),
    F(ScalarField<T>),
    G(ScalarField<T>),
    /// Replaces the exchange weight of the base state in a bare temperature
    /// solve.
    ForcedChi(ScalarField<T>),
}

impl<T> Perturbation<T> {
    fn name(&self) -> &'static str {
        match self {
            Perturbation::H1(_) => "perturbation_h1",
            Perturbation::H2(_) => "perturbation_h2",
            Perturbation::F(_) => "perturbation_f",
            Perturbation::G(_) => "perturbation_g",
            Perturbation::ForcedChi(_) => "perturbation_chi",
        }
    }
}

/// Solves base and perturbed problems and checks the L¹ dependence slack
/// of the temperatures against the data and exchange-weight differences.
/// When the uniqueness condition holds, the ratio of the two sides must
/// also stay below 2.
pub fn perturbation_contraction<T: Real>(
    grid: Grid,
    coeffs: &Coefficients<T>,
    base: &EllipticSources<T>,
    perturbation: &Perturbation<T>,
    schedule: &RegSchedule<T>,
    solver: &SolverParams<T>,
    vp: &VerifyParams,
) -> Result<CheckResult> {
    let name = perturbation.name();
    let a = continuation_solve(grid, coeffs, base, schedule, solver)?;
    let mut other = base.clone();
    let (sigma_b, t1b, t2b) = match perturbation {
        Perturbation::ForcedChi(s) => {
            let (t1, t2, _) = solve_pair(grid, coeffs, &base.h1, &base.h2, s, &solver.thermal)?;
            (s.clone(), t1, t2)
        }
        p => {
            let add = |x: &ScalarField<T>, d: &ScalarField<T>| x.zip_map(d, |u, v| u + v);
            match p {
                Perturbation::H1(d) => other.h1 = add(&base.h1, d),
                Perturbation::H2(d) => other.h2 = add(&base.h2, d),
                Perturbation::F(d) => other.f = add(&base.f, d),
                Perturbation::G(d) => other.g = add(&base.g, d),
                Perturbation::ForcedChi(_) => unreachable!(),
            }
            let b = continuation_solve(grid, coeffs, &other, schedule, solver)?;
            (b.sigma, b.theta1, b.theta2)
        }
    };
    let snap_a = PairSnapshot {
        h1: &base.h1,
        h2: &base.h2,
        sigma: &a.sigma,
        theta1: &a.theta1,
        theta2: &a.theta2,
    };
    let snap_b = PairSnapshot {
        h1: &other.h1,
        h2: &other.h2,
        sigma: &sigma_b,
        theta1: &t1b,
        theta2: &t2b,
    };
    let slack = match l1_dependence_slack(coeffs, snap_a, snap_b) {
        Gated::Value(s) => s,
        Gated::NotApplicable(r) => {
            return Ok(CheckResult::skipped(name, CheckKind::Invariant, Sense::AtLeast, r));
        }
    };
    let scale = f(base.h1.l1_norm() + base.h2.l1_norm());
    let threshold = -vp.slack(name, scale);
    let mut result = CheckResult::evaluate(name, CheckKind::Invariant, Sense::AtLeast, f(slack), threshold);

    let (m, big_m) = bounds_m_upper(coeffs, &base.h1, &base.h2);
    if uniqueness_check(coeffs, &base.f, &base.g, m, big_m).holds() {
        let (g1, g2) = coeffs.gammas(sigma_b.max_abs());
        let lhs = g1 * a.theta1.sub(&t1b).l1_norm() + g2 * a.theta2.sub(&t2b).l1_norm();
        let rhs = lhs + slack;
        let ratio = if rhs > T::zero() { f(lhs / rhs) } else { 0.0 };
        if ratio > 2.0 {
            result.pass = Some(false);
            result.reason = Some(format!("contraction ratio {ratio:.3e} exceeds 2"));
        }
    }
    Ok(result)
}

/// Seeded smooth perturbations of amplitude `amp`: products of low
/// sine modes with random coefficients.
pub fn seeded_perturbation<T: Real>(grid: Grid, seed: u64, amp: T) -> ScalarField<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(1.0..4.0), rng.gen_range(0.0..6.3)))
        .collect();
    ScalarField::from_fn(grid, |x, y| {
        let (x, y) = (f(x), f(y));
        let v: f64 = modes
            .iter()
            .map(|&(c, k, ph)| c * (k * x + ph).sin() * (k * y + 0.5 * ph).cos())
            .sum();
        amp * T::lit(v / 3.0)
    })
}

/// Seeded exchange weight in `[0, 1]`, zero on the boundary.
pub fn seeded_exchange_weight<T: Real>(grid: Grid, seed: u64) -> ScalarField<T> {
    let raw = seeded_perturbation::<T>(grid, seed, T::one());
    raw.map(|v| (T::lit(0.5) + v).max(T::zero()).min(T::one())).into_zero_trace()
}

/// `checks.csv` contents: `name,applicable,measured,threshold,pass,anchor`.
pub fn checks_csv(checks: &[CheckResult]) -> String {
    let mut s = String::from("name,applicable,measured,threshold,pass,anchor\n");
    for c in checks {
        let pass = match c.pass {
            Some(true) => "true",
            Some(false) => "false",
            None => "n/a",
        };
        let _ = writeln!(
            s,
            "{},{},{:.16e},{:.16e},{},{}",
            c.name, c.applicable, c.measured, c.threshold, pass, c.anchor
        );
    }
    s
}


#[cfg(test)]
mod free_boundary {
    use super::*;
    use crate::quasistatic::{Source, TimeGrid, TimeSources};

    fn data() -> (Grid, EllipticSources<f64>) {
        let g = Grid::new(1, 32).unwrap();
        let s = EllipticSources {
            f: ScalarField::from_fn(g, |x, _| 40.0 * (x - 0.5) * (x - 0.5) - 1.0),
            g: ScalarField::constant(g, 0.5),
            h1: ScalarField::from_fn(g, |x, _| 2.0 + x),
            h2: ScalarField::constant(g, 0.5),
        };
        (g, s)
    }

    #[test]
    fn stationary_invariants_hold_with_partial_contact() {
        let (g, s) = data();
        let c = Coefficients::unit();
        let p = SolverParams::default();
        let st = continuation_solve(g, &c, &s, &RegSchedule::default(), &p).unwrap();
        let frac = st.contact_fraction();
        assert!(frac > 0.1 && frac < 0.9, "{frac}");
        let d = p.contact.delta_for(&s.f, &c.a);
        let checks = run_elliptic_checks(&st, &c, &s, d, &VerifyParams::default()).unwrap();
        assert!(checks.iter().all(|c| !c.is_failure()), "{checks:?}");
        let nd = checks.iter().find(|c| c.name == "nondegeneracy_pointwise").unwrap();
        assert_eq!(nd.pass, Some(false));
    }

    #[test]
    fn evolutionary_invariants_hold_with_heating_ramp() {
        let (g, s) = data();
        let c = Coefficients::unit();
        let p = SolverParams::default();
        let sched = RegSchedule::default();
        let tg = TimeGrid::new(1.0, 8).unwrap();
        let mut ts = TimeSources::stationary(&s, ScalarField::constant(g, 1.0), ScalarField::constant(g, 0.5));
        ts.h1 = Source::function(|x, _, t| 2.0 + x + 4.0 * t);
        let tr = run_quasistatic(g, &c, &ts, &tg, &sched, &p).unwrap();
        let checks = run_quasistatic_checks(&tr, &c, &ts, &sched, &p, &VerifyParams::default()).unwrap();
        let names: Vec<_> = checks.iter().map(|c| c.name).collect();
        assert_eq!(names, QUASISTATIC_MANIFEST);
        assert!(checks.iter().all(|c| !c.is_failure()), "{checks:?}");
        let rate = checks.iter().find(|c| c.name == "interpolant_gap_rate").unwrap();
        assert!(rate.applicable);
    }
}
