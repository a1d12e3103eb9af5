//! Scenario configuration: TOML files, `key=value` overrides and validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crossdiff::benchmarks::{pd_benchmark, segregated_benchmark};
use crossdiff::energies::CouplingMatrix;
use crossdiff::fdref::Barenblatt;
use crossdiff::hyperbolic::HyperbolicOptions;
use crossdiff::jko::{JkoOptions, JkoSchedule, Solver};
use crossdiff::measures::{Density, DensityVector, Grid1D};
use crossdiff::skt::{DecoupledVariant, SktConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioId {
    ParabolicJko,
    HyperbolicSplit,
    HyperbolicTransport,
    FourthOrder,
    SktJoint,
    SktDecoupled,
    BenchmarkClosure,
}

impl ScenarioId {
    pub const ALL: [ScenarioId; 7] = [
        ScenarioId::ParabolicJko,
        ScenarioId::HyperbolicSplit,
        ScenarioId::HyperbolicTransport,
        ScenarioId::FourthOrder,
        ScenarioId::SktJoint,
        ScenarioId::SktDecoupled,
        ScenarioId::BenchmarkClosure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioId::ParabolicJko => "parabolic_jko",
            ScenarioId::HyperbolicSplit => "hyperbolic_split",
            ScenarioId::HyperbolicTransport => "hyperbolic_transport",
            ScenarioId::FourthOrder => "fourth_order",
            ScenarioId::SktJoint => "skt_joint",
            ScenarioId::SktDecoupled => "skt_decoupled",
            ScenarioId::BenchmarkClosure => "benchmark_closure",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ScenarioId::ParabolicJko => {
                "minimizing-movement run of du_i/dt = d/dx(u_i d/dx p_i), p = A u, with the a-priori estimate checks"
            }
            ScenarioId::HyperbolicSplit => {
                "rank-one coupling a_ij = 1/N via pressure/fraction splitting; TV and [0,1] checks on the fractions"
            }
            ScenarioId::HyperbolicTransport => {
                "rank-one coupling with species pushed along the pressure's optimal maps; metric-speed bound"
            }
            ScenarioId::FourthOrder => {
                "explicit finite volumes for the system with an added Dirichlet energy; mass and energy checks"
            }
            ScenarioId::SktJoint => {
                "2D joint density of the correlated SKT-type model; marginals and relative entropy series"
            }
            ScenarioId::SktDecoupled => "joint model against the nonlocally coupled marginal system; L1 gap series",
            ScenarioId::BenchmarkClosure => {
                "minimizing movement against the finite-difference reference and, for N = 1, the Barenblatt profile"
            }
        }
    }
}

impl fmt::Display for ScenarioId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n: usize,
    pub x_min: f64,
    pub x_max: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    pub tau: Option<f64>,
    pub steps: Option<usize>,
    /// Explicit step sizes; overrides `tau` and `steps`.
    pub taus: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    /// Barenblatt profile at the time its peak equals `peak`.
    Barenblatt {
        #[serde(default = "one")]
        peak: f64,
        #[serde(default)]
        center: f64,
    },
    /// One species per entry: normalized `exp(−(x − c)²/2v)`.
    Gaussian {
        center: Vec<f64>,
        variance: Vec<f64>,
    },
    /// Two smooth positive bumps (the positive-definite benchmark data).
    DoubleBump,
    /// Two disjoint compactly supported profiles.
    Segregated,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default = "lagrangian")]
    pub kind: String,
    pub epsilon: Option<f64>,
    pub levels: Option<usize>,
    pub tol_obj: Option<f64>,
    pub max_iter: Option<usize>,
}

fn lagrangian() -> String {
    "lagrangian".into()
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            kind: lagrangian(),
            epsilon: None,
            levels: None,
            tol_obj: None,
            max_iter: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioId,
    pub grid: Option<GridSpec>,
    pub schedule: Option<ScheduleSpec>,
    /// Rows of `A`.
    pub coupling: Option<Vec<Vec<f64>>>,
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub hyperbolic: Option<HyperbolicOptions>,
    pub skt: Option<SktConfig>,
    pub variant: Option<DecoupledVariant>,
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub snapshot_times: Vec<f64>,
}

/// A configuration problem, tagged with the key it concerns.
#[derive(Debug)]
pub struct ConfigInvalid {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigInvalid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "invalid configuration at `{}`: {}",
            self.key, self.message
        )
    }
}

impl std::error::Error for ConfigInvalid {}

fn invalid(key: &str, message: impl Into<String>) -> ConfigInvalid {
    ConfigInvalid {
        key: key.to_string(),
        message: message.into(),
    }
}

fn err(key: &'static str) -> impl Fn(crossdiff::Error) -> ConfigInvalid {
    move |e| invalid(key, e.to_string())
}

/// Parses `key.path=value`; the value is read as a TOML literal, or as a
/// bare string if that fails.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigInvalid> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| invalid(spec, "override must have the form key=value"))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(invalid(key, "empty key segment"));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| invalid(key, format!("`{p}` is not a table")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ScenarioConfig, ConfigInvalid> {
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| invalid(&error_key(&e.to_string()), e.to_string()))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let text = toml::to_string(&table).map_err(|e| invalid("<root>", e.to_string()))?;
    let config: ScenarioConfig = toml::from_str(&text)
        .map_err(|e| invalid(&error_key(&e.to_string()), e.message().to_string()))?;
    config.validate()?;
    Ok(config)
}

/// Best-effort key name from a deserializer message.
fn error_key(message: &str) -> String {
    for (open, close) in [("`", "`"), ("'", "'")] {
        if let Some(start) = message.find(open) {
            if let Some(len) = message[start + 1..].find(close) {
                return message[start + 1..start + 1 + len].to_string();
            }
        }
    }
    "<root>".into()
}

pub fn load_config(path: &Path, overrides: &[String]) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        anyhow::Error::new(invalid(
            "<file>",
            format!("cannot read {}: {e}", path.display()),
        ))
    })?;
    Ok(parse_config(&text, overrides)?)
}

/// Species data and coupling of the 1D scenarios.
pub struct Problem1d {
    pub u0: DensityVector,
    pub a: CouplingMatrix,
    /// The Barenblatt oracle and its onset time, for that preset.
    pub oracle: Option<(Barenblatt, f64)>,
}

impl ScenarioConfig {
    fn is_1d(&self) -> bool {
        !matches!(
            self.scenario,
            ScenarioId::SktJoint | ScenarioId::SktDecoupled
        )
    }

    fn is_hyperbolic(&self) -> bool {
        matches!(
            self.scenario,
            ScenarioId::HyperbolicSplit | ScenarioId::HyperbolicTransport
        )
    }

    pub fn validate(&self) -> Result<(), ConfigInvalid> {
        if let Some(g) = &self.grid {
            if g.n < 2 || !(g.x_max > g.x_min) {
                return Err(invalid("grid", "needs n >= 2 and x_max > x_min"));
            }
        }
        if let Some(s) = &self.schedule {
            if s.tau.is_some_and(|t| !(t > 0.0)) {
                return Err(invalid("schedule", "tau must be positive"));
            }
            if let Some(taus) = &s.taus {
                if taus.is_empty() || taus.iter().any(|t| !(*t > 0.0)) {
                    return Err(invalid(
                        "schedule",
                        "taus must be a nonempty list of positive steps",
                    ));
                }
            }
        }
        if let Some(a) = &self.coupling {
            let n = a.len();
            if n == 0 || a.iter().any(|r| r.len() != n) {
                return Err(invalid("coupling", "must be a square matrix"));
            }
            for i in 0..n {
                for j in 0..i {
                    if (a[i][j] - a[j][i]).abs() > 1e-12 * (1.0 + a[i][j].abs()) {
                        return Err(invalid("coupling", "must be symmetric"));
                    }
                }
            }
        }
        if self.is_hyperbolic() && self.coupling.is_some() {
            return Err(invalid(
                "coupling",
                "the hyperbolic scenarios fix a_ij = 1/N",
            ));
        }
        match self.solver.kind.as_str() {
            "lagrangian" => {}
            "entropic" => {
                if !self.solver.epsilon.is_some_and(|e| e > 0.0) {
                    return Err(invalid(
                        "solver.epsilon",
                        "the entropic solver needs a positive epsilon",
                    ));
                }
            }
            other => return Err(invalid("solver.kind", format!("unknown solver `{other}`"))),
        }
        if self.snapshot_times.iter().any(|t| !(*t >= 0.0)) {
            return Err(invalid("snapshot_times", "times must be nonnegative"));
        }
        if let Some(InitialSpec::Gaussian { center, variance }) = &self.initial {
            if center.is_empty()
                || center.len() != variance.len()
                || variance.iter().any(|v| !(*v > 0.0))
            {
                return Err(invalid(
                    "initial",
                    "gaussian needs matching center/variance lists with positive variances",
                ));
            }
        }
        if let Some(InitialSpec::Barenblatt { peak, .. }) = &self.initial {
            if !(*peak > 0.0) {
                return Err(invalid("initial.peak", "must be positive"));
            }
        }
        if !self.is_1d() && (self.grid.is_some() || self.initial.is_some()) {
            return Err(invalid(
                "grid",
                "the 2D scenarios take their grid and data from the `skt` table",
            ));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D, ConfigInvalid> {
        let default = match self.scenario {
            ScenarioId::FourthOrder => GridSpec {
                n: 64,
                x_min: 0.0,
                x_max: 1.0,
            },
            _ if matches!(self.initial, Some(InitialSpec::DoubleBump)) => GridSpec {
                n: 128,
                x_min: 0.0,
                x_max: 1.0,
            },
            _ => GridSpec {
                n: 256,
                x_min: -2.0,
                x_max: 2.0,
            },
        };
        let g = self.grid.clone().unwrap_or(default);
        Grid1D::new(g.n, g.x_min, g.x_max).map_err(|e| invalid("grid", e.to_string()))
    }

    pub fn initial(&self) -> InitialSpec {
        self.initial.clone().unwrap_or(match self.scenario {
            ScenarioId::HyperbolicSplit | ScenarioId::HyperbolicTransport => {
                InitialSpec::Segregated
            }
            ScenarioId::FourthOrder => InitialSpec::DoubleBump,
            _ => InitialSpec::Barenblatt {
                peak: 1.0,
                center: 0.0,
            },
        })
    }

    pub fn problem_1d(&self) -> Result<Problem1d, ConfigInvalid> {
        let grid = self.grid()?;
        let n = grid.n_cells();
        let on_grid = |u: DensityVector| -> Result<DensityVector, ConfigInvalid> {
            // Presets are defined on their own grids; resample onto ours.
            if *u.grid() == grid {
                return Ok(u);
            }
            let species = u
                .iter()
                .map(|d| {
                    let src = *d.grid();
                    let vals = d.values().to_vec();
                    Density::from_fn(grid, move |x| {
                        if src.contains(x) {
                            vals[src.locate(x)]
                        } else {
                            0.0
                        }
                    })
                })
                .collect::<crossdiff::Result<Vec<_>>>()
                .map_err(|e| invalid("initial", e.to_string()))?;
            DensityVector::new(species).map_err(|e| invalid("initial", e.to_string()))
        };
        let (u0, oracle) = match self.initial() {
            InitialSpec::Barenblatt { peak, center } => {
                let b = Barenblatt::new(1.0).centered_at(center);
                let t0 = b.time_for_peak(peak);
                let u = Density::new(grid, b.cell_averages(t0, &grid).map_err(err("initial"))?)
                    .and_then(Density::renormalized)
                    .map_err(err("initial"))?;
                let species = self.coupling.as_ref().map_or(1, |a| a.len());
                (
                    DensityVector::new(vec![u; species]).map_err(err("initial"))?,
                    Some((b, t0)),
                )
            }
            InitialSpec::Gaussian { center, variance } => {
                let species = center
                    .iter()
                    .zip(&variance)
                    .map(|(&c, &v)| {
                        Density::from_fn(grid, move |x| (-(x - c).powi(2) / (2.0 * v)).exp())
                    })
                    .collect::<crossdiff::Result<Vec<_>>>()
                    .map_err(err("initial"))?;
                (DensityVector::new(species).map_err(err("initial"))?, None)
            }
            InitialSpec::DoubleBump => (on_grid(pd_benchmark(n).map_err(err("initial"))?.0)?, None),
            InitialSpec::Segregated => (
                on_grid(segregated_benchmark(n).map_err(err("initial"))?)?,
                None,
            ),
        };
        let n_species = u0.n_species();
        let a = match (&self.coupling, self.scenario) {
            (_, ScenarioId::HyperbolicSplit | ScenarioId::HyperbolicTransport) => {
                CouplingMatrix::mean_field(n_species)
            }
            (Some(rows), _) => CouplingMatrix::new(rows.clone()).map_err(err("coupling"))?,
            (None, _) if n_species == 2 => pd_benchmark(8).map_err(err("coupling"))?.1,
            (None, _) => CouplingMatrix::identity(n_species),
        };
        if a.n() != n_species {
            return Err(invalid(
                "coupling",
                format!(
                    "has {} rows but the initial data has {n_species} species",
                    a.n()
                ),
            ));
        }
        // The Barenblatt oracle describes a single species with A = (1).
        let oracle = oracle.filter(|_| n_species == 1 && a.get(0, 0) == 1.0);
        Ok(Problem1d { u0, a, oracle })
    }

    pub fn schedule(&self) -> Result<JkoSchedule, ConfigInvalid> {
        let s = self.schedule.clone().unwrap_or_default();
        let result = match s.taus {
            Some(taus) => JkoSchedule::new(taus),
            None => JkoSchedule::uniform(
                s.tau.unwrap_or(1e-3),
                s.steps.unwrap_or(match self.scenario {
                    ScenarioId::FourthOrder => 100,
                    _ => 250,
                }),
            ),
        };
        result.map_err(|e| invalid("schedule", e.to_string()))
    }

    pub fn solver(&self) -> Solver {
        match self.solver.kind.as_str() {
            "entropic" => Solver::Entropic {
                epsilon: self.solver.epsilon.unwrap_or(1e-3),
            },
            _ => Solver::Lagrangian,
        }
    }

    pub fn jko_options(&self) -> JkoOptions {
        let d = JkoOptions::default();
        JkoOptions {
            levels: self.solver.levels,
            tol_obj: self.solver.tol_obj.unwrap_or(d.tol_obj),
            max_iter: self.solver.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }

    pub fn hyperbolic_options(&self) -> HyperbolicOptions {
        self.hyperbolic.clone().unwrap_or_default()
    }

    pub fn skt_config(&self) -> SktConfig {
        let mut c = self.skt.clone().unwrap_or_default();
        c.snapshot_times.extend(self.snapshot_times.iter().copied());
        c
    }

    pub fn output_dir(&self, cli_out: Option<&Path>) -> PathBuf {
        cli_out
            .map(Path::to_path_buf)
            .or_else(|| self.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("out").join(self.scenario.name()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_create_nested_keys() {
        let c = parse_config(
            "scenario = \"parabolic_jko\"",
            &["schedule.tau=2e-3".into(), "schedule.steps=4".into()],
        )
        .unwrap();
        let s = c.schedule().unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.taus()[0], 2e-3);
    }

    #[test]
    fn negative_tau_names_schedule() {
        let e = parse_config(
            "scenario = \"parabolic_jko\"\n[schedule]\ntau = -1.0\n",
            &[],
        )
        .unwrap_err();
        assert_eq!(e.key, "schedule");
    }

    #[test]
    fn unknown_key_is_named() {
        let e = parse_config(
            "scenario = \"parabolic_jko\"\n[grid]\nn = 8\nx_min = 0.0\nx_max = 1.0\nwidth = 2\n",
            &[],
        )
        .unwrap_err();
        assert!(e.to_string().contains("width"), "{e}");
    }

    #[test]
    fn asymmetric_coupling_is_rejected() {
        let e = parse_config(
            "scenario = \"parabolic_jko\"\ncoupling = [[1.0, 2.0], [0.0, 1.0]]\n",
            &[],
        )
        .unwrap_err();
        assert_eq!(e.key, "coupling");
    }

    #[test]
    fn presets_build() {
        for (scenario, species) in [
            ("parabolic_jko", 1),
            ("hyperbolic_split", 2),
            ("fourth_order", 2),
        ] {
            let c = parse_config(&format!("scenario = \"{scenario}\""), &[]).unwrap();
            assert_eq!(c.problem_1d().unwrap().u0.n_species(), species);
        }
    }
}
