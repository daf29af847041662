//! Acceptance criteria, one PASS/FAIL line each. Criterion 10 reruns the
//! others and compares their CSV outputs byte for byte.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use thermoqvi::contact::{contact_set, solve_membrane, ContactParams};
use thermoqvi::discretization::{assemble_atheta, assemble_dirichlet_laplacian, assemble_neumann_helmholtz};
use thermoqvi::elliptic::cross_solution_agreement;
use thermoqvi::io::field_to_csv;
use thermoqvi::prelude::*;
use thermoqvi::quasistatic::{decay_exponent, interpolant_gap};
use thermoqvi::thermal::{solve_pair, CoefficientFunction, ThermalParams};
use thermoqvi::verify::{checks_csv, perturbation_contraction, seeded_exchange_weight, seeded_perturbation, Perturbation};

struct Outcome {
    pass: bool,
    detail: String,
    csv: String,
}

type Criterion = fn() -> Outcome;

fn benchmark(n: usize) -> (Grid, Coefficients<f64>, EllipticSources<f64>) {
    let g = Grid::new(1, n).unwrap();
    let src = EllipticSources {
        f: ScalarField::constant(g, 32.0),
        g: ScalarField::constant(g, 1.0),
        h1: ScalarField::constant(g, 3.0),
        h2: ScalarField::zeros(g),
    };
    (g, Coefficients::unit(), src)
}

fn state_csv(st: &EllipticState<f64>) -> String {
    [&st.theta1, &st.theta2, &st.phi, &st.u, &st.chi]
        .iter()
        .map(|f| field_to_csv(f))
        .collect()
}

fn obstacle_oracle() -> Outcome {
    let g = Grid::new(1, 128).unwrap();
    let c = Coefficients::unit();
    let f = ScalarField::constant(g, 32.0);
    let phi = ScalarField::zero_trace_from_fn(g, |_, _| 1.0);
    let params = ContactParams::default();
    let (u, stats) = solve_membrane(g, &c, &ScalarField::zeros(g), &f, &phi, &params).unwrap();
    let chi = contact_set(&u, &phi, params.delta_for(&f, &c.a));
    let xs: Vec<f64> = (0..g.node_count())
        .filter(|&p| chi.values()[p] > 0.5)
        .map(|p| g.coords::<f64>(p)[0])
        .collect();
    let h = g.spacing::<f64>();
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    let exact = |x: f64| {
        let s = x.min(1.0 - x);
        if s < 0.25 {
            -16.0 * s * s + 8.0 * s
        } else {
            1.0
        }
    };
    let err = (0..g.node_count())
        .map(|p| (u.values()[p] - exact(g.coords::<f64>(p)[0])).abs())
        .fold(0.0, f64::max);
    let pass = stats.converged && (lo - 0.25).abs() <= h && (hi - 0.75).abs() <= h && err < 2e-3;
    Outcome {
        pass,
        detail: format!("contact [{lo:.5}, {hi:.5}], max error {err:.2e}"),
        csv: field_to_csv(&u) + &field_to_csv(&chi),
    }
}

fn constant_field_oracle() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut csv = String::new();
    for (dim, n) in [(1, 2), (1, 17), (1, 128), (2, 3), (2, 16)] {
        let g = Grid::new(dim, n).unwrap();
        let c = Coefficients::unit();
        let p = ThermalParams {
            tol: 1e-12,
            ..ThermalParams::default()
        };
        let one = ScalarField::constant(g, 1.0);
        let (t1, t2, _) = solve_pair(g, &c, &ScalarField::constant(g, 3.0), &ScalarField::zeros(g), &one, &p).unwrap();
        worst = worst
            .max(t1.dist_inf(&ScalarField::constant(g, 2.0)))
            .max(t2.dist_inf(&one));
        csv += &field_to_csv(&t1);
        csv += &field_to_csv(&t2);
    }
    Outcome {
        pass: worst <= 1e-8,
        detail: format!("max deviation {worst:.2e}"),
        csv,
    }
}

fn benchmark_invariants() -> Outcome {
    let (g, c, s) = benchmark(64);
    let p = SolverParams::default();
    let st = continuation_solve(g, &c, &s, &RegSchedule::default(), &p).unwrap();
    let delta = p.contact.delta_for(&s.f, &c.a);
    let mut vp = VerifyParams::default();
    vp.overrides.insert("lewy_stampacchia".into(), 1e-3);
    let checks = run_elliptic_checks(&st, &c, &s, delta, &vp).unwrap();
    let wanted = [
        "temperature_lower_bound",
        "temperature_upper_bound",
        "comparison_principle",
        "temperature_gap_bound",
        "heat_conservation",
        "lewy_stampacchia",
        "contact_identity",
    ];
    let failed: Vec<&str> = wanted
        .iter()
        .copied()
        .filter(|w| checks.iter().find(|c| c.name == *w).map(|c| c.pass) != Some(Some(true)))
        .collect();
    Outcome {
        pass: failed.is_empty(),
        detail: if failed.is_empty() {
            format!("{} checks hold", wanted.len())
        } else {
            format!("failed: {}", failed.join(", "))
        },
        csv: state_csv(&st) + &checks_csv(&checks),
    }
}

fn uniqueness_contraction() -> Outcome {
    let (g, c, mut s) = benchmark(64);
    s.f = ScalarField::constant(g, 48.0);
    let p = SolverParams::default();
    let sched = RegSchedule::default();
    let (m, big_m) = thermoqvi::thermal::bounds_m_upper(&c, &s.h1, &s.h2);
    let cond = thermoqvi::elliptic::uniqueness_check(&c, &s.f, &s.g, m, big_m);
    let d = cross_solution_agreement(g, &c, &s, &sched, &p).unwrap();
    Outcome {
        pass: cond.holds() && d <= 1e-5,
        detail: format!("margin {:.3}, two-start distance {d:.2e}", cond.margin),
        csv: format!("{d:.16e}\n"),
    }
}

fn continuous_dependence() -> Outcome {
    let (g, c, s) = benchmark(64);
    let p = SolverParams::default();
    let sched = RegSchedule::default();
    let vp = VerifyParams::default();
    let mut checks = Vec::new();
    for seed in 0..5u64 {
        let perts = [
            Perturbation::H1(seeded_perturbation(g, seed, 0.5)),
            Perturbation::H2(seeded_perturbation(g, 100 + seed, 0.5)),
            Perturbation::ForcedChi(seeded_exchange_weight(g, 200 + seed)),
        ];
        for pert in &perts {
            checks.push(perturbation_contraction(g, &c, &s, pert, &sched, &p, &vp).unwrap());
        }
    }
    let worst = checks.iter().map(|c| c.measured).fold(f64::INFINITY, f64::min);
    Outcome {
        pass: checks.iter().all(|c| c.pass == Some(true)),
        detail: format!("{} perturbations, least slack {worst:.3e}", checks.len()),
        csv: checks_csv(&checks),
    }
}

fn steady_state() -> Outcome {
    let (g, c, s) = benchmark(64);
    let p = SolverParams::default();
    let sched = RegSchedule::default();
    let st = continuation_solve(g, &c, &s, &sched, &p).unwrap();
    let ts = TimeSources::stationary(&s, st.theta1.clone(), st.theta2.clone());
    let tg = TimeGrid::new(1.0, 16).unwrap();
    let tr = run_quasistatic(g, &c, &ts, &tg, &sched, &p).unwrap();
    let worst = tr.states.iter().map(|x| x.distance(&st)).fold(0.0, f64::max);
    Outcome {
        pass: worst <= 1e-5,
        detail: format!("max distance to stationary state {worst:.2e}"),
        csv: tr.states.iter().map(state_csv).collect(),
    }
}

fn gap_rate() -> Outcome {
    let g = Grid::new(1, 8).unwrap();
    let c = Coefficients {
        c1: 1000.0,
        c2: 1000.0,
        b1: 0.0,
        b2: 0.0,
        alpha: 0.0,
        ..Coefficients::unit()
    };
    let one = ScalarField::constant(g, 1.0);
    let ts = TimeSources::stationary(&EllipticSources::zeros(g), one.clone(), one);
    let p = SolverParams::default();
    let sched = RegSchedule::default();
    let mut taus = Vec::new();
    let mut gaps = Vec::new();
    for n in [8, 16, 32] {
        let tg = TimeGrid::new(1.0, n).unwrap();
        let tr = run_quasistatic(g, &c, &ts, &tg, &sched, &p).unwrap();
        taus.push(tg.tau());
        gaps.push(interpolant_gap(&tr));
    }
    let rate = decay_exponent(&taus, &gaps);
    Outcome {
        pass: (0.35..=0.65).contains(&rate),
        detail: format!("gaps {:.3e} {:.3e} {:.3e}, exponent {rate:.3}", gaps[0], gaps[1], gaps[2]),
        csv: gaps.iter().map(|v| format!("{v:.16e}\n")).collect(),
    }
}

fn pulsed_heating() -> Outcome {
    let g = Grid::new(1, 32).unwrap();
    let c = Coefficients::unit();
    let base = EllipticSources {
        f: ScalarField::constant(g, 32.0),
        g: ScalarField::constant(g, 1.0),
        h1: ScalarField::constant(g, 2.0),
        h2: ScalarField::zeros(g),
    };
    let mut ts = TimeSources::stationary(&base, ScalarField::constant(g, 2.0), ScalarField::constant(g, 1.0));
    ts.h1 = Source::function(|_, _, t: f64| 2.0 + 6.0 * (-((t - 0.5) / 0.1).powi(2)).exp());
    let tg = TimeGrid::new(1.0, 32).unwrap();
    let p = SolverParams::default();
    let sched = RegSchedule::default();
    let tr = run_quasistatic(g, &c, &ts, &tg, &sched, &p).unwrap();
    let checks = run_quasistatic_checks(&tr, &c, &ts, &sched, &p, &VerifyParams::default()).unwrap();
    let get = |n: &str| checks.iter().find(|c| c.name == n).unwrap();
    let strong = get("parabolic_nondegeneracy_strong");
    let modulus = get("chi_time_modulus");
    let mut pass = ["linfty_recursion", "parabolic_lower_bound", "parabolic_upper_bound"]
        .iter()
        .all(|n| get(n).pass == Some(true));
    if strong.pass == Some(true) {
        pass &= modulus.pass == Some(true);
    }
    Outcome {
        pass,
        detail: format!(
            "recursion {:.2e}, bounds [{:.3}, {:.3}], strong margin {:.3}, modulus slack {:.2e}",
            get("linfty_recursion").measured,
            get("parabolic_lower_bound").measured,
            get("parabolic_upper_bound").measured,
            strong.measured,
            modulus.measured
        ),
        csv: checks_csv(&checks) + &state_csv(tr.states.last().unwrap()),
    }
}

fn operator_consistency() -> Outcome {
    use std::f64::consts::PI;
    let ns = [8usize, 16, 32];
    let mut errs = [[0.0f64; 3]; 3];
    for (k, &n) in ns.iter().enumerate() {
        let g = Grid::new(2, n).unwrap();
        let interior = g.interior_nodes();
        let max_over = |got: &ScalarField<f64>, want: &dyn Fn(f64, f64) -> f64, nodes: &[usize]| {
            nodes
                .iter()
                .map(|&p| {
                    let [x, y] = g.coords::<f64>(p);
                    (got.values()[p] - want(x, y)).abs()
                })
                .fold(0.0, f64::max)
        };
        // -Δ cos(πx)cos(πy) + 1·v
        let v = ScalarField::from_fn(g, |x: f64, y: f64| (PI * x).cos() * (PI * y).cos());
        let op = assemble_neumann_helmholtz(g, 1.0, &ScalarField::constant(g, 1.0)).unwrap();
        let all: Vec<usize> = (0..g.node_count()).collect();
        errs[0][k] = max_over(
            &op.apply(&v),
            &|x, y| (2.0 * PI * PI + 1.0) * (PI * x).cos() * (PI * y).cos(),
            &all,
        );
        // -Δ sin(πx)sin(πy)
        let w = ScalarField::zero_trace_from_fn(g, |x: f64, y: f64| (PI * x).sin() * (PI * y).sin());
        let lap = assemble_dirichlet_laplacian(g, |_, _| 1.0).unwrap();
        errs[1][k] = max_over(&lap.apply(&w), &|x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin(), &interior);
        // -∇·(a(θ)∇w) with a(s) = 1 + s and θ = x
        let a = CoefficientFunction::table(vec![(-1.0, 0.0001), (0.0, 1.0), (2.0, 3.0)]).unwrap();
        let theta = ScalarField::from_fn(g, |x: f64, _| x);
        let at = assemble_atheta(g, &a, &theta).unwrap();
        let exact = |x: f64, y: f64| {
            let (sx, cx, sy) = ((PI * x).sin(), (PI * x).cos(), (PI * y).sin());
            -(PI * cx * sy) + (1.0 + x) * 2.0 * PI * PI * sx * sy
        };
        errs[2][k] = max_over(&at.apply(&w), &exact, &interior);
    }
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let rates: Vec<f64> = errs.iter().map(|e| decay_exponent(&hs, e)).collect();
    Outcome {
        pass: rates.iter().all(|r| (1.7..=2.3).contains(r)),
        detail: format!("exponents neumann {:.3}, dirichlet {:.3}, variable {:.3}", rates[0], rates[1], rates[2]),
        csv: String::new(),
    }
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, Duration); 9] = [
        ("1 obstacle oracle", obstacle_oracle, Duration::from_secs(1)),
        ("2 constant-field oracle", constant_field_oracle, Duration::from_millis(100)),
        ("3 benchmark invariants", benchmark_invariants, Duration::from_secs(10)),
        ("4 uniqueness contraction", uniqueness_contraction, Duration::from_secs(30)),
        ("5 continuous dependence", continuous_dependence, Duration::from_secs(30)),
        ("6 quasistatic steady state", steady_state, Duration::from_secs(60)),
        ("7 interpolant gap rate", gap_rate, Duration::from_secs(10)),
        ("8 pulsed heating bounds", pulsed_heating, Duration::from_secs(60)),
        ("9 operator consistency", operator_consistency, Duration::from_secs(5)),
    ];
    let mut all_pass = true;
    let mut outputs = Vec::new();
    for (name, run, limit) in criteria.iter() {
        let start = Instant::now();
        let out = run();
        let took = start.elapsed();
        let pass = out.pass && took <= *limit;
        all_pass &= pass;
        println!(
            "{} criterion {name}: {} ({:.3} s, limit {} s)",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            limit.as_secs_f64()
        );
        outputs.push(out.csv);
    }
    let mismatched: Vec<&str> = criteria[..8]
        .iter()
        .zip(&outputs)
        .filter(|((_, run, _), first)| run().csv != **first)
        .map(|((name, _, _), _)| *name)
        .collect();
    let pass = mismatched.is_empty();
    all_pass &= pass;
    println!(
        "{} criterion 10 determinism: {}",
        if pass { "PASS" } else { "FAIL" },
        if pass {
            "criteria 1-8 reproduce byte-identical CSV output".to_string()
        } else {
            format!("differs: {}", mismatched.join(", "))
        }
    );
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
