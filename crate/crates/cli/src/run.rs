//! The three commands and the on-disk layout they share.
//!
//! Stationary output: `config.txt`, `report.json`, `checks.csv` and one
//! CSV per field (`theta1 theta2 phi u chi sigma f g h1 h2`). Evolutionary
//! output: `step_0/` with the initial temperatures, `step_<k>/` with the
//! same per-field CSVs for every step, and `trajectory.csv`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use thermoqvi::discretization::{FieldKind, ScalarField};
use thermoqvi::elliptic::{continuation_solve, EllipticSources, EllipticState, SolveReport};
use thermoqvi::io::{field_from_csv, field_to_csv, vtk_string};
use thermoqvi::quasistatic::{run_quasistatic_with, TimeGrid, TimeSources, Trajectory};
use thermoqvi::verify::{
    checks_csv, perturbation_contraction, run_elliptic_checks, run_quasistatic_checks, seeded_exchange_weight,
    seeded_perturbation, CheckResult, Perturbation,
};

use crate::config::{ConfigError, ScenarioConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Solver(#[from] thermoqvi::Error),
    #[error("{0} invariant check(s) failed")]
    ChecksFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ChecksFailed(_) => 1,
            CliError::Solver(thermoqvi::Error::NonConvergence { .. }) => 3,
            _ => 2,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

const CONFIG_COPY: &str = "config.txt";
const STATE_FIELDS: [&str; 6] = ["theta1", "theta2", "phi", "u", "chi", "sigma"];
const SOURCE_FIELDS: [&str; 4] = ["f", "g", "h1", "h2"];

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn write(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| io_err(&path, e))
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn threads() -> CliResult<usize> {
    match std::env::var("THERMOQVI_THREADS") {
        Err(_) => Ok(1),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("THERMOQVI_THREADS must be a positive integer, got `{v}`"))),
        },
    }
}

struct Scenario {
    config: ScenarioConfig,
    text: String,
    hash: String,
    dir: PathBuf,
}

fn load_scenario(path: &Path) -> CliResult<Scenario> {
    let text = read(path).map_err(|e| CliError::Usage(e.to_string()))?;
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let dir = dir.canonicalize().map_err(|e| io_err(dir, e))?;
    let config = ScenarioConfig::parse(&text, &dir)?;
    let hash = hex::encode(Sha256::digest(text.as_bytes()));
    Ok(Scenario {
        config,
        text,
        hash,
        dir,
    })
}

fn output_dir(out: Option<&Path>, sc: &Scenario) -> CliResult<PathBuf> {
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| sc.config.output.clone())
        .ok_or_else(|| CliError::Usage("no output directory: pass --out or set output.dir".into()))?;
    fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
    Ok(dir)
}

fn stationary_sources(c: &ScenarioConfig) -> CliResult<EllipticSources<f64>> {
    Ok(EllipticSources {
        f: c.f.field(c.grid, "sources.f")?,
        g: c.g.field(c.grid, "sources.g")?,
        h1: c.h1.field(c.grid, "sources.h1")?,
        h2: c.h2.field(c.grid, "sources.h2")?,
    })
}

fn time_sources(c: &ScenarioConfig) -> CliResult<TimeSources<f64>> {
    let missing = |k: &str| ConfigError::general(format!("missing required key `{k}` for a time-dependent run"));
    let theta10 = c.theta10.as_ref().ok_or_else(|| missing("initial.theta1"))?;
    let theta20 = c.theta20.as_ref().ok_or_else(|| missing("initial.theta2"))?;
    Ok(TimeSources {
        f: c.f.resolve(c.grid, "sources.f")?,
        g: c.g.resolve(c.grid, "sources.g")?,
        h1: c.h1.resolve(c.grid, "sources.h1")?,
        h2: c.h2.resolve(c.grid, "sources.h2")?,
        theta10: theta10.field(c.grid, "initial.theta1")?,
        theta20: theta20.field(c.grid, "initial.theta2")?,
    })
}

fn time_grid(c: &ScenarioConfig) -> CliResult<TimeGrid<f64>> {
    let (h, n) = c
        .time
        .ok_or_else(|| ConfigError::general("missing `time.steps` for a time-dependent run"))?;
    Ok(TimeGrid::new(h, n)?)
}

fn state_fields(st: &EllipticState<f64>) -> [&ScalarField<f64>; 6] {
    [&st.theta1, &st.theta2, &st.phi, &st.u, &st.chi, &st.sigma]
}

fn source_fields(s: &EllipticSources<f64>) -> [&ScalarField<f64>; 4] {
    [&s.f, &s.g, &s.h1, &s.h2]
}

fn write_state(dir: &Path, st: &EllipticState<f64>, src: &EllipticSources<f64>, vtk: bool) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    for (name, field) in STATE_FIELDS.iter().zip(state_fields(st)) {
        write(dir, &format!("{name}.csv"), &field_to_csv(field))?;
    }
    for (name, field) in SOURCE_FIELDS.iter().zip(source_fields(src)) {
        write(dir, &format!("{name}.csv"), &field_to_csv(field))?;
    }
    if vtk {
        let named: Vec<(&str, &ScalarField<f64>)> = STATE_FIELDS
            .iter()
            .copied()
            .zip(state_fields(st))
            .chain(SOURCE_FIELDS.iter().copied().zip(source_fields(src)))
            .collect();
        write(dir, "fields.vtk", &vtk_string("thermoqvi state", &named)?)?;
    }
    Ok(())
}

fn load_field(dir: &Path, name: &str, kind: FieldKind) -> CliResult<ScalarField<f64>> {
    let path = dir.join(format!("{name}.csv"));
    let text = read(&path)?;
    field_from_csv(&text, kind).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn load_state(dir: &Path) -> CliResult<(EllipticState<f64>, EllipticSources<f64>)> {
    let mut fields = Vec::new();
    for name in STATE_FIELDS {
        let kind = if matches!(name, "phi" | "u") {
            FieldKind::ZeroTrace
        } else {
            FieldKind::Free
        };
        fields.push(load_field(dir, name, kind)?);
    }
    let mut it = fields.into_iter();
    let mut next = || it.next().expect("six fields");
    let state = EllipticState {
        theta1: next(),
        theta2: next(),
        phi: next(),
        u: next(),
        chi: next(),
        sigma: next(),
        report: SolveReport::empty(),
    };
    let src = EllipticSources {
        f: load_field(dir, "f", FieldKind::Free)?,
        g: load_field(dir, "g", FieldKind::Free)?,
        h1: load_field(dir, "h1", FieldKind::Free)?,
        h2: load_field(dir, "h2", FieldKind::Free)?,
    };
    let grid = state.theta1.grid();
    if state_fields(&state).iter().chain(source_fields(&src).iter()).any(|f| f.grid() != grid) {
        return Err(CliError::Io(format!("{}: fields are on different grids", dir.display())));
    }
    Ok((state, src))
}

fn summary(checks: &[CheckResult]) -> (usize, usize, usize) {
    let failed = checks.iter().filter(|c| c.is_failure()).count();
    let skipped = checks.iter().filter(|c| !c.applicable).count();
    (checks.len(), failed, skipped)
}

fn elliptic_scorecard(
    c: &ScenarioConfig,
    st: &EllipticState<f64>,
    src: &EllipticSources<f64>,
    delta: f64,
) -> CliResult<Vec<CheckResult>> {
    let mut checks = run_elliptic_checks(st, &c.coeffs, src, delta, &c.verify)?;
    for k in 0..c.perturbations {
        let seed = c.seed.wrapping_add(k as u64);
        let pert = match k % 3 {
            0 => Perturbation::H1(seeded_perturbation(c.grid, seed, 0.1 * (1.0 + src.h1.max_abs()))),
            1 => Perturbation::H2(seeded_perturbation(c.grid, seed, 0.1 * (1.0 + src.h2.max_abs()))),
            _ => Perturbation::ForcedChi(seeded_exchange_weight(c.grid, seed)),
        };
        checks.push(perturbation_contraction(
            c.grid, &c.coeffs, src, &pert, &c.schedule, &c.solver, &c.verify,
        )?);
    }
    Ok(checks)
}

#[derive(Serialize)]
struct GridInfo {
    dim: usize,
    n: usize,
}

fn base_report(kind: &str, sc: &Scenario, checks: &[CheckResult]) -> CliResult<serde_json::Value> {
    let (total, failed, skipped) = summary(checks);
    Ok(json!({
        "kind": kind,
        "config_hash": sc.hash,
        "config_dir": sc.dir,
        "threads": threads()?,
        "grid": GridInfo { dim: sc.config.grid.dim(), n: sc.config.grid.cells() },
        "checks": { "total": total, "failed": failed, "not_applicable": skipped },
    }))
}

fn write_json(dir: &Path, value: &serde_json::Value) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    write(dir, "report.json", &(text + "\n"))
}

pub fn cmd_solve_elliptic(config: &Path, out: Option<&Path>, vtk: bool) -> CliResult<String> {
    let sc = load_scenario(config)?;
    threads()?;
    let c = &sc.config;
    let src = stationary_sources(c)?;
    let st = continuation_solve(c.grid, &c.coeffs, &src, &c.schedule, &c.solver)?;
    let delta = c.solver.contact.delta_for(&src.f, &c.coeffs.a);
    let checks = elliptic_scorecard(c, &st, &src, delta)?;

    let dir = output_dir(out, &sc)?;
    write(&dir, CONFIG_COPY, &sc.text)?;
    write_state(&dir, &st, &src, vtk)?;
    write(&dir, "checks.csv", &checks_csv(&checks))?;
    let mut report = base_report("elliptic", &sc, &checks)?;
    report["delta_contact"] = json!(delta);
    report["contact_fraction"] = json!(st.contact_fraction());
    report["solve"] = serde_json::to_value(&st.report).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(&dir, &report)?;

    let (total, failed, _) = summary(&checks);
    Ok(format!(
        "converged: contact fraction {:.4}, residual {:.3e}; {total} checks, {failed} invariant failures; wrote {}",
        st.contact_fraction(),
        st.report.final_residual,
        dir.display()
    ))
}

fn trajectory_csv(traj: &Trajectory<f64>) -> String {
    let mut s = String::from("k,t,||theta1||_inf,||theta1-theta2||_inf,contact_fraction,residual\n");
    let (t1, t2) = (&traj.theta10, &traj.theta20);
    let _ = writeln!(
        s,
        "0,{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
        0.0,
        t1.max_abs(),
        t1.dist_inf(t2),
        f64::NAN,
        f64::NAN
    );
    for (i, st) in traj.states.iter().enumerate() {
        let k = i + 1;
        let _ = writeln!(
            s,
            "{k},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            traj.time.time(k),
            st.theta1.max_abs(),
            st.theta1.dist_inf(&st.theta2),
            st.contact_fraction(),
            st.report.final_residual
        );
    }
    s
}

pub fn cmd_solve_quasistatic(config: &Path, out: Option<&Path>, vtk: bool) -> CliResult<String> {
    let sc = load_scenario(config)?;
    threads()?;
    let c = &sc.config;
    let ts = time_sources(c)?;
    let tg = time_grid(c)?;
    let dir = output_dir(out, &sc)?;
    write(&dir, CONFIG_COPY, &sc.text)?;
    let step0 = dir.join("step_0");
    fs::create_dir_all(&step0).map_err(|e| io_err(&step0, e))?;
    write(&step0, "theta1.csv", &field_to_csv(&ts.theta10))?;
    write(&step0, "theta2.csv", &field_to_csv(&ts.theta20))?;

    let traj = run_quasistatic_with(c.grid, &c.coeffs, &ts, &tg, &c.schedule, &c.solver, |_, _| Ok(()))?;
    for (i, (st, src)) in traj.states.iter().zip(&traj.sources).enumerate() {
        write_state(&dir.join(format!("step_{}", i + 1)), st, src, vtk)?;
    }
    write(&dir, "trajectory.csv", &trajectory_csv(&traj))?;
    let checks = run_quasistatic_checks(&traj, &c.coeffs, &ts, &c.schedule, &c.solver, &c.verify)?;
    write(&dir, "checks.csv", &checks_csv(&checks))?;

    let mut report = base_report("quasistatic", &sc, &checks)?;
    report["time"] = json!({ "horizon": tg.horizon(), "steps": tg.steps() });
    let steps: Vec<&SolveReport> = traj.states.iter().map(|s| &s.report).collect();
    report["steps"] = serde_json::to_value(steps).map_err(|e| CliError::Io(e.to_string()))?;
    write_json(&dir, &report)?;

    let (total, failed, _) = summary(&checks);
    Ok(format!(
        "converged: {} steps; {total} checks, {failed} invariant failures; wrote {}",
        tg.steps(),
        dir.display()
    ))
}

/// Recomputes the scorecard of a saved run. Returns the scorecard CSV.
pub fn cmd_verify(dir: &Path) -> CliResult<String> {
    let report_path = dir.join("report.json");
    if !report_path.is_file() {
        return Err(CliError::Usage(format!("{} is not a solver output directory", dir.display())));
    }
    let report: serde_json::Value =
        serde_json::from_str(&read(&report_path)?).map_err(|e| CliError::Io(format!("report.json: {e}")))?;
    let base = report["config_dir"]
        .as_str()
        .map(PathBuf::from)
        .unwrap_or_else(|| dir.to_path_buf());
    let text = read(&dir.join(CONFIG_COPY))?;
    let c = ScenarioConfig::parse(&text, &base)?;

    let checks = match report["kind"].as_str() {
        Some("elliptic") => {
            let (st, src) = load_state(dir)?;
            if st.theta1.grid() != c.grid {
                return Err(CliError::Io("saved fields do not match the configured grid".into()));
            }
            let delta = report["delta_contact"]
                .as_f64()
                .ok_or_else(|| CliError::Io("report.json lacks delta_contact".into()))?;
            elliptic_scorecard(&c, &st, &src, delta)?
        }
        Some("quasistatic") => {
            let ts = time_sources(&c)?;
            let tg = time_grid(&c)?;
            let step0 = dir.join("step_0");
            let theta10 = load_field(&step0, "theta1", FieldKind::Free)?;
            let theta20 = load_field(&step0, "theta2", FieldKind::Free)?;
            let mut states = Vec::new();
            let mut sources = Vec::new();
            for k in 1..=tg.steps() {
                let (st, src) = load_state(&dir.join(format!("step_{k}")))?;
                if st.theta1.grid() != c.grid {
                    return Err(CliError::Io(format!("step {k} does not match the configured grid")));
                }
                states.push(st);
                sources.push(src);
            }
            let traj = Trajectory {
                time: tg,
                theta10,
                theta20,
                sources,
                states,
            };
            run_quasistatic_checks(&traj, &c.coeffs, &ts, &c.schedule, &c.solver, &c.verify)?
        }
        other => return Err(CliError::Io(format!("report.json has unknown kind {other:?}"))),
    };
    let csv = checks_csv(&checks);
    let (_, failed, _) = summary(&checks);
    if failed > 0 {
        for ch in checks.iter().filter(|c| c.is_failure()) {
            eprintln!(
                "FAIL {}: measured {:e}, threshold {:e}{}",
                ch.name,
                ch.measured,
                ch.threshold,
                ch.reason.as_deref().map(|r| format!(" ({r})")).unwrap_or_default()
            );
        }
        print!("{csv}");
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(csv)
}
