//! Scenario files: flat `section.key = value` lines, `#` comments.
//!
//! Source values are a number, an expression over `x y t`, or
//! `file:<path>` naming a field CSV relative to the config file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use thermoqvi::discretization::{FieldKind, Grid, ScalarField};
use thermoqvi::elliptic::{RegSchedule, SolverParams};
use thermoqvi::io::field_from_csv;
use thermoqvi::quasistatic::{Source, TimeGrid};
use thermoqvi::thermal::{CoefficientFunction, Coefficients};
use thermoqvi::verify::VerifyParams;

use crate::expr::Expr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    fn at(line: usize, msg: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn general(msg: impl Into<String>) -> Self {
        Self {
            line: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self { line: Some(l), msg } => write!(f, "config line {l}: {msg}"),
            Self { line: None, msg } => write!(f, "config: {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

type CResult<T> = Result<T, ConfigError>;

#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Expr(Expr),
    File(PathBuf),
}

impl SourceSpec {
    fn parse(value: &str, line: usize, base: &Path) -> CResult<Self> {
        if let Some(path) = value.strip_prefix("file:") {
            let path = path.trim();
            if path.is_empty() {
                return Err(ConfigError::at(line, "empty file path"));
            }
            return Ok(SourceSpec::File(base.join(path)));
        }
        Expr::parse(value)
            .map(SourceSpec::Expr)
            .map_err(|e| ConfigError::at(line, format!("bad expression `{value}`: {e}")))
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self, SourceSpec::Expr(e) if e.uses_time())
    }

    pub fn resolve(&self, grid: Grid, what: &str) -> CResult<Source<f64>> {
        match self {
            SourceSpec::Expr(e) => {
                if let Some(c) = e.constant() {
                    Ok(Source::Constant(c))
                } else if e.uses_time() {
                    let e = e.clone();
                    Ok(Source::function(move |x, y, t| e.eval(x, y, t)))
                } else {
                    Ok(Source::Field(ScalarField::from_fn(grid, |x, y| e.eval(x, y, 0.0))))
                }
            }
            SourceSpec::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| ConfigError::general(format!("{what}: cannot read {}: {e}", path.display())))?;
                let field = field_from_csv(&text, FieldKind::Free)
                    .map_err(|e| ConfigError::general(format!("{what}: {}: {e}", path.display())))?;
                if field.grid() != grid {
                    return Err(ConfigError::general(format!(
                        "{what}: {} is on a {}D grid with n = {}, expected {}D with n = {}",
                        path.display(),
                        field.grid().dim(),
                        field.grid().cells(),
                        grid.dim(),
                        grid.cells()
                    )));
                }
                Ok(Source::Field(field))
            }
        }
    }

    /// Static field on `grid`; time-dependent specs are rejected.
    pub fn field(&self, grid: Grid, what: &str) -> CResult<ScalarField<f64>> {
        if self.is_time_dependent() {
            return Err(ConfigError::general(format!("{what} must not depend on t")));
        }
        self.resolve(grid, what)?
            .sample(grid, 0.0)
            .map_err(|e| ConfigError::general(format!("{what}: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub grid: Grid,
    pub coeffs: Coefficients<f64>,
    pub f: SourceSpec,
    pub g: SourceSpec,
    pub h1: SourceSpec,
    pub h2: SourceSpec,
    pub theta10: Option<SourceSpec>,
    pub theta20: Option<SourceSpec>,
    pub schedule: RegSchedule<f64>,
    pub solver: SolverParams<f64>,
    pub time: Option<(f64, usize)>,
    pub verify: VerifyParams,
    /// Seeded perturbation checks appended to the stationary scorecard.
    pub perturbations: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn num<T: std::str::FromStr>(&mut self, key: &str) -> CResult<Option<T>> {
        match self.take(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::at(line, format!("`{key}` expects a number, got `{v}`"))),
        }
    }

    fn real(&mut self, key: &str, default: f64) -> CResult<f64> {
        Ok(self.num(key)?.unwrap_or(default))
    }
}

fn parse_table(value: &str, line: usize) -> CResult<CoefficientFunction<f64>> {
    if let Ok(v) = value.parse::<f64>() {
        return CoefficientFunction::constant(v).map_err(|e| ConfigError::at(line, e.to_string()));
    }
    let mut points = Vec::new();
    for pair in value.split(',') {
        let (s, v) = pair
            .split_once(':')
            .ok_or_else(|| ConfigError::at(line, format!("table entry `{}` is not `s:value`", pair.trim())))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| ConfigError::at(line, format!("bad number `{}` in table", t.trim())))
        };
        points.push((parse(s)?, parse(v)?));
    }
    CoefficientFunction::table(points).map_err(|e| ConfigError::at(line, e.to_string()))
}

impl ScenarioConfig {
    pub fn parse(text: &str, base: &Path) -> CResult<Self> {
        let mut map = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| ConfigError::at(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let valid_key = key.split('.').count() >= 2
                && key
                    .split('.')
                    .all(|p| !p.is_empty() && p.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'));
            if !valid_key {
                return Err(ConfigError::at(line, format!("malformed key `{key}`")));
            }
            if value.is_empty() {
                return Err(ConfigError::at(line, format!("`{key}` has no value")));
            }
            if map.insert(key.to_string(), (line, value.to_string())).is_some() {
                return Err(ConfigError::at(line, format!("duplicate key `{key}`")));
            }
        }
        let mut e = Entries { map };

        let dim = e.num("grid.dim")?.unwrap_or(1usize);
        let n: usize = e
            .num("grid.n")?
            .ok_or_else(|| ConfigError::general("missing required key `grid.n`"))?;
        let grid = Grid::new(dim, n).map_err(|err| ConfigError::general(format!("grid: {err}")))?;

        let unit = Coefficients::<f64>::unit();
        let a = match e.take("coeffs.a") {
            Some((line, v)) => parse_table(&v, line)?,
            None => unit.a.clone(),
        };
        let coeffs = Coefficients {
            kappa1: e.real("coeffs.kappa1", unit.kappa1)?,
            kappa2: e.real("coeffs.kappa2", unit.kappa2)?,
            c1: e.real("coeffs.c1", unit.c1)?,
            c2: e.real("coeffs.c2", unit.c2)?,
            b1: e.real("coeffs.b1", unit.b1)?,
            b2: e.real("coeffs.b2", unit.b2)?,
            alpha: e.real("coeffs.alpha", unit.alpha)?,
            a,
        };
        coeffs
            .validate()
            .map_err(|err| ConfigError::general(format!("coefficients: {err}")))?;

        let mut source = |key: &str, required: bool| -> CResult<Option<SourceSpec>> {
            match e.take(key) {
                Some((line, v)) => SourceSpec::parse(&v, line, base).map(Some),
                None if required => Err(ConfigError::general(format!("missing required key `{key}`"))),
                None => Ok(Some(SourceSpec::Expr(Expr::Lit(0.0)))),
            }
        };
        let f = source("sources.f", false)?.expect("defaulted");
        let g = source("sources.g", false)?.expect("defaulted");
        let h1 = source("sources.h1", false)?.expect("defaulted");
        let h2 = source("sources.h2", false)?.expect("defaulted");
        let theta10 = e
            .take("initial.theta1")
            .map(|(l, v)| SourceSpec::parse(&v, l, base))
            .transpose()?;
        let theta20 = e
            .take("initial.theta2")
            .map(|(l, v)| SourceSpec::parse(&v, l, base))
            .transpose()?;

        let ds = RegSchedule::<f64>::default();
        let schedule = RegSchedule {
            eps0: e.real("schedule.eps0", ds.eps0)?,
            factor: e.real("schedule.factor", ds.factor)?,
            eps_min: e.num("schedule.eps_min")?,
        };
        schedule
            .widths(grid)
            .map_err(|err| ConfigError::general(format!("schedule: {err}")))?;

        let mut solver = SolverParams::<f64>::default();
        solver.damping = e.real("solver.damping", solver.damping)?;
        solver.min_damping = e.real("solver.min_damping", solver.min_damping.min(solver.damping))?;
        solver.tol = e.real("solver.tol", solver.tol)?;
        solver.max_outer = e.num("solver.max_outer")?.unwrap_or(solver.max_outer);
        solver.polish_rounds = e.num("solver.polish_rounds")?.unwrap_or(solver.polish_rounds);
        solver.thermal.tol = e.real("solver.thermal_tol", solver.thermal.tol)?;
        solver.thermal.max_outer = e.num("solver.thermal_max_outer")?.unwrap_or(solver.thermal.max_outer);
        solver.thermal.cg_max_iter = e.num("solver.cg_max_iter")?.unwrap_or(solver.thermal.cg_max_iter);
        solver.contact.omega = e.real("solver.omega", solver.contact.omega)?;
        solver.contact.tol = e.real("solver.psor_tol", solver.contact.tol)?;
        solver.contact.max_iter = e.num("solver.psor_max_iter")?.unwrap_or(solver.contact.max_iter);
        solver.contact.delta_contact = e.num("solver.delta_contact")?;
        solver
            .validate()
            .map_err(|err| ConfigError::general(format!("solver: {err}")))?;
        if solver.thermal.tol.is_nan() || solver.thermal.tol <= 0.0 {
            return Err(ConfigError::general("solver: thermal tolerance must be positive"));
        }

        let horizon: Option<f64> = e.num("time.horizon")?;
        let steps: Option<usize> = e.num("time.steps")?;
        let time = match (horizon, steps) {
            (None, None) => None,
            (h, s) => {
                let (h, s) = (h.unwrap_or(1.0), s.unwrap_or(1));
                TimeGrid::new(h, s).map_err(|err| ConfigError::general(format!("time grid: {err}")))?;
                Some((h, s))
            }
        };

        let mut verify = VerifyParams {
            tol: e.real("verify.tol", VerifyParams::default().tol)?,
            ..VerifyParams::default()
        };
        if verify.tol.is_nan() || verify.tol <= 0.0 {
            return Err(ConfigError::general("verify.tol must be positive"));
        }
        let overrides: Vec<String> = e
            .map
            .keys()
            .filter(|k| k.starts_with("verify.override."))
            .cloned()
            .collect();
        for key in overrides {
            let name = key["verify.override.".len()..].to_string();
            let v: f64 = e.num(&key)?.expect("present");
            verify.overrides.insert(name, v);
        }
        let perturbations = e.num("verify.perturbations")?.unwrap_or(0);
        let seed = e.num("run.seed")?.unwrap_or(0);
        let output = e.take("output.dir").map(|(_, v)| base.join(v));

        if let Some((key, (line, _))) = e.map.iter().next() {
            return Err(ConfigError::at(*line, format!("unknown key `{key}`")));
        }
        Ok(Self {
            grid,
            coeffs,
            f,
            g,
            h1,
            h2,
            theta10,
            theta20,
            schedule,
            solver,
            time,
            verify,
            perturbations,
            seed,
            output,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> CResult<ScenarioConfig> {
        ScenarioConfig::parse(s, Path::new("."))
    }

    #[test]
    fn benchmark_config() {
        let c = parse(
            "# benchmark\ngrid.n = 64\nsources.f = 32 # load\nsources.g = 1\nsources.h1 = 3\n\
             coeffs.a = 0:1, 2:3\nsolver.omega = 1.7\nverify.override.lewy_stampacchia = 1e-3\n",
        )
        .unwrap();
        assert_eq!(c.grid, Grid::new(1, 64).unwrap());
        assert_eq!(c.solver.contact.omega, 1.7);
        assert_eq!(c.verify.overrides["lewy_stampacchia"], 1e-3);
        assert!(!c.coeffs.a.is_constant());
        assert!(c.time.is_none());
        let f = c.f.field(c.grid, "f").unwrap();
        assert_eq!(f.max(), 32.0);
    }

    #[test]
    fn rejections() {
        let cases = [
            ("grid.n = 1\n", "grid"),
            ("sources.f = 1\n", "grid.n"),
            ("grid.n = 8\ngrid.bogus = 1\n", "unknown key"),
            ("grid.n = 8\nnot a pair\n", "line 2"),
            ("grid.n = 8\ngrid.n = 9\n", "duplicate"),
            ("grid.n = 8\nsources.f = sin(x)\n", "bad expression"),
            ("grid.n = 8\ncoeffs.c1 = -1\n", "c1"),
            ("grid.n = 8\ntime.steps = 0\n", "time grid"),
            ("grid.n = eight\n", "number"),
            ("grid.n = 8\nsolver.omega = 2.5\n", "solver"),
            ("grid.n = 8\nnokey = 3\n", "malformed key"),
        ];
        for (text, needle) in cases {
            let err = parse(text).unwrap_err().to_string();
            assert!(err.contains(needle), "{text:?} -> {err}");
        }
    }

    #[test]
    fn time_dependent_sources() {
        let c = parse("grid.n = 4\ntime.steps = 2\nsources.h1 = 2 + 6 * t\ninitial.theta1 = 1\n").unwrap();
        assert!(c.h1.is_time_dependent());
        assert_eq!(c.time, Some((1.0, 2)));
        assert!(c.h1.field(c.grid, "h1").is_err());
        let s = c.h1.resolve(c.grid, "h1").unwrap();
        assert_eq!(s.sample(c.grid, 0.5).unwrap().max(), 5.0);
    }
}
