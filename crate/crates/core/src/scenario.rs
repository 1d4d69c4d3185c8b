//! Scenario configs and the batch runner behind the CLI.
//!
//! Configs are JSON: a list of named scenarios, each with a manifold spec,
//! charge lists for `sigma` and `lambda`, a task tag with its parameters,
//! and optional solver / check / output settings. Summaries are JSON and
//! per-node dumps are CSV with floats printed to 17 significant digits, so
//! identical config and version produce byte-identical outputs.

use std::fs;
use std::io::Write as IoWrite;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::balayage::{
    bal, check_bounds, check_structure, existence_diagnostic, BalayageOptions, BalayageResult,
    DiagnosticInstance, ExistenceClass,
};
use crate::charge::{atom, from_density, ChargeDistribution};
use crate::error::{Error, Result};
use crate::grid::{
    build_circle, build_flat_ball, build_s3_polar, build_sphere_latlong, build_sphere_polar,
    DiscreteManifold, Point, ProfileBoundary,
};
use crate::obstacle::LcpParams;
use crate::radial::{excess_bound_check, excess_limit, radial_solve, RadialBc, RadialScenario};
use crate::{apps, VERSION};

/// Log levels selected by the `BALAYAGE_LOG` environment variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum LogLevel {
    Error = 0,
    Info = 1,
    Debug = 2,
}

pub fn log_level() -> LogLevel {
    match std::env::var("BALAYAGE_LOG").as_deref() {
        Ok("debug") => LogLevel::Debug,
        Ok("error") => LogLevel::Error,
        _ => LogLevel::Info,
    }
}

macro_rules! log_info {
    ($($arg:tt)*) => {
        if crate::scenario::log_level() >= crate::scenario::LogLevel::Info {
            eprintln!($($arg)*);
        }
    };
}
#[allow(unused_imports)]
pub(crate) use log_info;

/// Top-level config file.
#[derive(Debug, Deserialize)]
pub struct Config {
    /// Seed for any randomized check (default 42).
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioSpec>,
}

#[derive(Debug, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    #[serde(default)]
    pub manifold: Option<ManifoldSpec>,
    #[serde(default)]
    pub sigma: Vec<ChargeTermSpec>,
    #[serde(default)]
    pub lambda: Vec<ChargeTermSpec>,
    #[serde(flatten)]
    pub task: TaskSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub checks: CheckSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ManifoldSpec {
    Circle { n_nodes: usize },
    SphereLatlong { n_theta: usize, n_phi: usize },
    SpherePolar { n_cells: usize },
    S3Polar { n_cells: usize },
    Ball { dim: usize, radius: f64, n_cells: usize, bc: BcSpec },
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum BcSpec {
    Dirichlet,
    Neumann,
}

impl ManifoldSpec {
    pub fn build(&self) -> Result<DiscreteManifold> {
        match self {
            ManifoldSpec::Circle { n_nodes } => build_circle(*n_nodes),
            ManifoldSpec::SphereLatlong { n_theta, n_phi } => {
                build_sphere_latlong(*n_theta, *n_phi)
            }
            ManifoldSpec::SpherePolar { n_cells } => build_sphere_polar(*n_cells),
            ManifoldSpec::S3Polar { n_cells } => build_s3_polar(*n_cells),
            ManifoldSpec::Ball { dim, radius, n_cells, bc } => {
                let boundary = match bc {
                    BcSpec::Dirichlet => ProfileBoundary::Dirichlet,
                    BcSpec::Neumann => ProfileBoundary::Neumann,
                };
                build_flat_ball(*dim, *radius, *n_cells, boundary)
            }
        }
    }

    /// Same family at a different resolution (refinement studies).
    pub fn with_resolution(&self, level: usize) -> ManifoldSpec {
        match self {
            ManifoldSpec::Circle { .. } => ManifoldSpec::Circle { n_nodes: level },
            ManifoldSpec::SphereLatlong { .. } => {
                ManifoldSpec::SphereLatlong { n_theta: level, n_phi: level }
            }
            ManifoldSpec::SpherePolar { .. } => ManifoldSpec::SpherePolar { n_cells: level },
            ManifoldSpec::S3Polar { .. } => ManifoldSpec::S3Polar { n_cells: level },
            ManifoldSpec::Ball { dim, radius, bc, .. } => {
                ManifoldSpec::Ball { dim: *dim, radius: *radius, n_cells: level, bc: *bc }
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            ManifoldSpec::Circle { n_nodes } => format!("circle[{n_nodes}]"),
            ManifoldSpec::SphereLatlong { n_theta, n_phi } => {
                format!("sphere_latlong[{n_theta}x{n_phi}]")
            }
            ManifoldSpec::SpherePolar { n_cells } => format!("sphere_polar[{n_cells}]"),
            ManifoldSpec::S3Polar { n_cells } => format!("s3_polar[{n_cells}]"),
            ManifoldSpec::Ball { dim, radius, n_cells, .. } => {
                format!("ball{dim}d[R={radius},{n_cells}]")
            }
        }
    }
}

/// A point in a scenario file: a scalar chart coordinate, or a
/// `[theta, phi]` pair on the sphere.
#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Scalar(f64),
    Pair([f64; 2]),
}

impl PointSpec {
    pub fn to_point(self, m: &DiscreteManifold) -> Result<Point> {
        use crate::grid::ManifoldKind::*;
        match (m.kind(), self) {
            (Circle { .. }, PointSpec::Scalar(x)) => Ok(Point::Circle(x)),
            (SymmetricProfile { .. }, PointSpec::Scalar(r)) => Ok(Point::Radial(r)),
            (SphereLatLong { .. }, PointSpec::Pair([theta, phi])) => {
                Ok(Point::Sphere { theta, phi })
            }
            (SphereLatLong { .. }, PointSpec::Scalar(theta)) => {
                Ok(Point::Sphere { theta, phi: 0.0 })
            }
            _ => Err(Error::Config(
                "point spec does not match the manifold's coordinate chart".into(),
            )),
        }
    }
}

/// One term of a charge list.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ChargeTermSpec {
    /// Point mass at a chart location.
    Atom { location: PointSpec, weight: f64 },
    /// Constant density (mass `value * W_i` per node).
    Density { value: f64 },
}

pub fn build_charge(
    m: &DiscreteManifold,
    terms: &[ChargeTermSpec],
) -> Result<ChargeDistribution> {
    let mut total = ChargeDistribution::zero(m);
    for term in terms {
        let part = match term {
            ChargeTermSpec::Atom { location, weight } => {
                atom(m, &location.to_point(m)?, *weight)?
            }
            ChargeTermSpec::Density { value } => {
                let v = *value;
                from_density(m, move |_| v)
            }
        };
        total = total.add(&part)?;
    }
    Ok(total)
}

/// Initial region for growth tasks.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RegionSpec {
    #[default]
    Empty,
    /// Nodes within a geodesic distance of a centre point.
    Cap {
        center: PointSpec,
        radius: f64,
    },
}

impl RegionSpec {
    pub fn to_mask(&self, m: &DiscreteManifold) -> Result<Vec<bool>> {
        match self {
            RegionSpec::Empty => Ok(vec![false; m.node_count()]),
            RegionSpec::Cap { center, radius } => {
                let c = center.to_point(m)?;
                let mut mask = vec![false; m.node_count()];
                for (i, slot) in mask.iter_mut().enumerate() {
                    *slot = m.distance(i, &c)? < *radius;
                }
                Ok(mask)
            }
        }
    }
}

/// External field for equilibrium tasks.
#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    /// Q = 0.
    Zero,
    /// Superposition of discrete Green potentials of point charges.
    PointCharges { charges: Vec<(PointSpec, f64)> },
}

impl FieldSpec {
    pub fn build(&self, m: &DiscreteManifold) -> Result<crate::greens::Potential> {
        match self {
            FieldSpec::Zero => Ok(crate::greens::Potential::zero(m)),
            FieldSpec::PointCharges { charges } => {
                let mut values = vec![0.0; m.node_count()];
                for (loc, weight) in charges {
                    let g = crate::greens::green_potential(
                        m,
                        &atom(m, &loc.to_point(m)?, *weight)?,
                    )?;
                    for (v, gi) in values.iter_mut().zip(g.values()) {
                        *v += gi;
                    }
                }
                crate::greens::Potential::from_values(m, values)
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "task", rename_all = "kebab-case")]
pub enum TaskSpec {
    /// Plain partial balayage of `sigma` towards `lambda`.
    Bal,
    HarmonicBall {
        center: PointSpec,
        t: f64,
    },
    GeodesicBall {
        center: PointSpec,
        radius: f64,
    },
    Growth {
        center: PointSpec,
        t_schedule: Vec<f64>,
        #[serde(default)]
        d0: RegionSpec,
    },
    Equilibrium {
        field: FieldSpec,
        t: f64,
    },
    /// Builds the harmonic ball of mass `t` and verifies the quadrature
    /// inequality against the listed probes.
    Quadrature {
        center: PointSpec,
        t: f64,
        probes: Vec<PointSpec>,
    },
    Radial {
        n: usize,
        rho: f64,
        t: f64,
        r: f64,
        bc: BcSpec,
        n_cells: usize,
        /// Optional sweep of outer radii for the excess-mass study.
        #[serde(default)]
        r_sweep: Vec<f64>,
    },
    /// Mesh-refinement existence diagnostic for the scenario's sigma.
    Diagnose {
        levels: Vec<usize>,
    },
}

#[derive(Debug, Clone, Copy, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub relaxation: Option<f64>,
    pub tolerance: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub polish: Option<bool>,
}

impl SolverSpec {
    pub fn to_options(self) -> BalayageOptions {
        let mut opts = BalayageOptions::default();
        let defaults = opts.lcp;
        opts.lcp = LcpParams {
            relaxation: self.relaxation.unwrap_or(defaults.relaxation),
            tolerance: self.tolerance.unwrap_or(defaults.tolerance),
            max_sweeps: self.max_sweeps.or(defaults.max_sweeps),
            polish: self.polish.unwrap_or(defaults.polish),
        };
        opts
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub bounds: bool,
    pub structure: bool,
    pub eps_struct: f64,
}

impl Default for CheckSpec {
    fn default() -> Self {
        CheckSpec {
            bounds: true,
            structure: false,
            eps_struct: crate::balayage::DEFAULT_EPS_STRUCT,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub csv: bool,
    pub summary: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { csv: false, summary: true }
    }
}

/// Parses a config file, turning serde errors into line/field diagnostics.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("{}:{}:{}: {e}", path.display(), e.line(), e.column()))
    })
}

/// Outcome of one scenario.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub name: String,
    pub converged: bool,
    pub checks_passed: bool,
    pub error: Option<String>,
}

/// Outcome of a whole config run.
#[derive(Debug)]
pub struct RunOutcome {
    pub scenarios: Vec<ScenarioOutcome>,
}

impl RunOutcome {
    /// 0 = converged and all checks passed, 1 = config/solver error,
    /// 2 = a check failed.
    pub fn exit_code(&self) -> i32 {
        if self.scenarios.iter().any(|s| s.error.is_some() || !s.converged) {
            return 1;
        }
        if self.scenarios.iter().any(|s| !s.checks_passed) {
            return 2;
        }
        0
    }
}

/// Executes every scenario of a config, with up to `threads` scenarios in
/// flight. Output files are scenario-scoped, so parallel runs never
/// contend.
pub fn run_config(config: &Config, out_dir: &Path, threads: usize) -> Result<RunOutcome> {
    fs::create_dir_all(out_dir)?;
    let n = config.scenarios.len();
    let outcomes: Mutex<Vec<Option<ScenarioOutcome>>> =
        Mutex::new((0..n).map(|_| None).collect());
    let next: Mutex<usize> = Mutex::new(0);
    let workers = threads.clamp(1, n.max(1));

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let index = {
                    let mut guard = next.lock().unwrap();
                    if *guard >= n {
                        return;
                    }
                    let i = *guard;
                    *guard += 1;
                    i
                };
                let spec = &config.scenarios[index];
                let outcome = match run_scenario(spec, out_dir) {
                    Ok(outcome) => outcome,
                    Err(e) => ScenarioOutcome {
                        name: spec.name.clone(),
                        converged: false,
                        checks_passed: false,
                        error: Some(e.to_string()),
                    },
                };
                outcomes.lock().unwrap()[index] = Some(outcome);
            });
        }
    });

    let scenarios = outcomes
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|o| o.expect("scenario executed"))
        .collect();
    Ok(RunOutcome { scenarios })
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn require_manifold(spec: &ScenarioSpec) -> Result<DiscreteManifold> {
    spec.manifold
        .as_ref()
        .ok_or_else(|| Error::Config(format!("scenario '{}' needs a manifold", spec.name)))?
        .build()
}

// ------------------------- summary records -------------------------

#[derive(Serialize)]
struct BalSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    nodes: usize,
    total_volume: f64,
    t: f64,
    sigma_total: f64,
    nu_total: f64,
    omega_volume: f64,
    omega_mask_volume: f64,
    residual_feasibility: f64,
    residual_complementarity: f64,
    sweeps: usize,
    converged: bool,
    bounds_pass: Option<bool>,
    structure_pass: Option<bool>,
    structure_collar_residual: Option<f64>,
}

#[derive(Serialize)]
struct BallSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    input: f64,
    measured_volume: f64,
    mask_volume: f64,
    measured_geodesic_radius: f64,
}

#[derive(Serialize)]
struct GrowthSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    initial_volume: f64,
    steps: Vec<GrowthStepSummary>,
}

#[derive(Serialize)]
struct GrowthStepSummary {
    t: f64,
    volume: f64,
    volume_error: f64,
}

#[derive(Serialize)]
struct EquilibriumSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    t: f64,
    mu_total: f64,
    robin_constant: f64,
    min_slack: f64,
    support_deviation: f64,
    support_nodes: usize,
    support_components: usize,
    complement_components: usize,
}

#[derive(Serialize)]
struct QuadratureSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    t: f64,
    probes: Vec<QuadratureProbeSummary>,
    constant_gap: f64,
    constant_tolerance: f64,
    pass: bool,
}

#[derive(Serialize)]
struct QuadratureProbeSummary {
    lhs: f64,
    rhs: f64,
    slack: f64,
    ok: bool,
}

#[derive(Serialize)]
struct RadialRowSummary {
    n: usize,
    rho: f64,
    t: f64,
    r: f64,
    bc: BcSpec,
    n_cells: usize,
    s_numeric: f64,
    s_closed: f64,
    q_r: f64,
    fraction_lost: f64,
    bound: f64,
    bound_ok: bool,
}

#[derive(Serialize)]
struct RadialSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    rows: Vec<RadialRowSummary>,
    extrapolated_fraction: Option<f64>,
    expected_fraction: Option<f64>,
}

#[derive(Serialize)]
struct DiagnoseSummary {
    version: &'static str,
    name: String,
    task: &'static str,
    manifold: String,
    classification: String,
    slope: f64,
    r_squared: f64,
    rate: String,
    levels: Vec<DiagnoseLevelSummary>,
}

#[derive(Serialize)]
struct DiagnoseLevelSummary {
    resolution: usize,
    h: f64,
    sup_u: f64,
    sink_deviation: f64,
}

fn write_summary<T: Serialize>(
    out_dir: &Path,
    name: &str,
    summary: &T,
    enabled: bool,
) -> Result<Option<PathBuf>> {
    if !enabled {
        return Ok(None);
    }
    let path = out_dir.join(format!("{}_summary.json", sanitize(name)));
    let mut text = serde_json::to_string_pretty(summary)
        .map_err(|e| Error::Config(format!("summary serialization: {e}")))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(Some(path))
}

/// Floats in CSV dumps: 17 significant digits.
fn fmt_f(v: f64) -> String {
    format!("{:.16e}", v)
}

fn write_fields_csv(
    out_dir: &Path,
    name: &str,
    m: &DiscreteManifold,
    result: &BalayageResult,
) -> Result<()> {
    let path = out_dir.join(format!("{}_fields.csv", sanitize(name)));
    let mut f = fs::File::create(path)?;
    writeln!(f, "node,coord1,coord2,w,sigma,nu,u,v,psi,omega,mu")?;
    for i in 0..m.node_count() {
        let (c1, c2) = m.coord_pair(i);
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{}",
            i,
            fmt_f(c1),
            fmt_f(c2),
            fmt_f(m.weight(i)),
            fmt_f(result.sigma.masses()[i]),
            fmt_f(result.nu.masses()[i]),
            fmt_f(result.u.values()[i]),
            fmt_f(result.v.values()[i]),
            fmt_f(result.psi.values()[i]),
            u8::from(result.omega_mask[i]),
            fmt_f(result.mu.masses()[i]),
        )?;
    }
    Ok(())
}

fn write_nodes_csv(out_dir: &Path, name: &str, m: &DiscreteManifold) -> Result<()> {
    let path = out_dir.join(format!("{}_nodes.csv", sanitize(name)));
    let mut f = fs::File::create(path)?;
    writeln!(f, "node,coord1,coord2,w")?;
    for i in 0..m.node_count() {
        let (c1, c2) = m.coord_pair(i);
        writeln!(f, "{},{},{},{}", i, fmt_f(c1), fmt_f(c2), fmt_f(m.weight(i)))?;
    }
    Ok(())
}

fn write_mask_csv(out_dir: &Path, name: &str, m: &DiscreteManifold, mask: &[bool]) -> Result<()> {
    let path = out_dir.join(format!("{}.csv", sanitize(name)));
    let mut f = fs::File::create(path)?;
    writeln!(f, "node,coord1,coord2,w,mask")?;
    for i in 0..m.node_count() {
        let (c1, c2) = m.coord_pair(i);
        writeln!(
            f,
            "{},{},{},{},{}",
            i,
            fmt_f(c1),
            fmt_f(c2),
            fmt_f(m.weight(i)),
            u8::from(mask[i])
        )?;
    }
    Ok(())
}

/// Runs one scenario, writing its outputs into `out_dir`.
pub fn run_scenario(spec: &ScenarioSpec, out_dir: &Path) -> Result<ScenarioOutcome> {
    let opts = spec.solver.to_options();
    log_info!("[scenario {}] starting", spec.name);
    let mut converged = true;
    let mut checks_passed = true;

    match &spec.task {
        TaskSpec::Bal => {
            let m = require_manifold(spec)?;
            let sigma = build_charge(&m, &spec.sigma)?;
            let lambda = build_charge(&m, &spec.lambda)?;
            let result = bal(&m, &sigma, &lambda, &opts)?;
            converged = result.diagnostics.converged;
            let bounds_pass = spec.checks.bounds.then(|| check_bounds(&result).pass);
            let structure = if spec.checks.structure {
                Some(check_structure(&m, &result, spec.checks.eps_struct)?)
            } else {
                None
            };
            if bounds_pass == Some(false) {
                checks_passed = false;
            }
            if let Some(s) = &structure {
                if !s.pass {
                    checks_passed = false;
                }
            }
            let summary = BalSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "bal",
                manifold: spec.manifold.as_ref().unwrap().label(),
                nodes: m.node_count(),
                total_volume: m.total_volume(),
                t: result.t,
                sigma_total: sigma.total(),
                nu_total: result.nu.total(),
                omega_volume: result.saturated_volume(&m),
                omega_mask_volume: result.mask_volume(&m),
                residual_feasibility: result.diagnostics.residual_feasibility,
                residual_complementarity: result.diagnostics.residual_complementarity,
                sweeps: result.diagnostics.sweeps,
                converged,
                bounds_pass,
                structure_pass: structure.as_ref().map(|s| s.pass),
                structure_collar_residual: structure.as_ref().map(|s| s.collar_residual),
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
            if spec.output.csv {
                write_nodes_csv(out_dir, &spec.name, &m)?;
                write_fields_csv(out_dir, &spec.name, &m, &result)?;
            }
        }
        TaskSpec::HarmonicBall { center, t } => {
            let m = require_manifold(spec)?;
            let c = center.to_point(&m)?;
            let report = apps::harmonic_ball(&m, &c, *t, &opts)?;
            let summary = BallSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "harmonic-ball",
                manifold: spec.manifold.as_ref().unwrap().label(),
                input: *t,
                measured_volume: report.measured_volume,
                mask_volume: report.mask_volume,
                measured_geodesic_radius: report.measured_geodesic_radius,
            };
            checks_passed = (report.measured_volume - t).abs() <= 1e-3 * t;
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
            if spec.output.csv {
                write_mask_csv(out_dir, &format!("{}_region", spec.name), &m, &report.region_mask)?;
            }
        }
        TaskSpec::GeodesicBall { center, radius } => {
            let m = require_manifold(spec)?;
            let c = center.to_point(&m)?;
            let report = apps::geodesic_ball(&m, &c, *radius)?;
            let summary = BallSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "geodesic-ball",
                manifold: spec.manifold.as_ref().unwrap().label(),
                input: *radius,
                measured_volume: report.measured_volume,
                mask_volume: report.mask_volume,
                measured_geodesic_radius: report.measured_geodesic_radius,
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
            if spec.output.csv {
                write_mask_csv(out_dir, &format!("{}_region", spec.name), &m, &report.region_mask)?;
            }
        }
        TaskSpec::Growth { center, t_schedule, d0 } => {
            let m = require_manifold(spec)?;
            let c = center.to_point(&m)?;
            let d0_mask = d0.to_mask(&m)?;
            let trace = apps::laplacian_growth(&m, &c, &d0_mask, t_schedule, &opts)?;
            let mut steps = Vec::new();
            for (k, &t) in trace.t_schedule.iter().enumerate() {
                let expect = trace.initial_volume + t;
                let err = (trace.volumes[k] - expect).abs();
                if err > 1e-3 * t {
                    checks_passed = false;
                }
                steps.push(GrowthStepSummary { t, volume: trace.volumes[k], volume_error: err });
                if spec.output.csv {
                    write_mask_csv(
                        out_dir,
                        &format!("{}_step{:02}", spec.name, k),
                        &m,
                        &trace.masks[k],
                    )?;
                }
            }
            let summary = GrowthSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "growth",
                manifold: spec.manifold.as_ref().unwrap().label(),
                initial_volume: trace.initial_volume,
                steps,
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
        }
        TaskSpec::Equilibrium { field, t } => {
            let m = require_manifold(spec)?;
            let q = field.build(&m)?;
            let report = apps::weighted_equilibrium(&m, &q, *t, &opts)?;
            let complement: Vec<bool> = report.support_mask.iter().map(|&b| !b).collect();
            let summary = EquilibriumSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "equilibrium",
                manifold: spec.manifold.as_ref().unwrap().label(),
                t: *t,
                mu_total: report.mu.total(),
                robin_constant: report.robin_constant,
                min_slack: report.min_slack,
                support_deviation: report.support_deviation,
                support_nodes: report.support_mask.iter().filter(|&&b| b).count(),
                support_components: apps::mask_components(&m, &report.support_mask),
                complement_components: apps::mask_components(&m, &complement),
            };
            let scale = q.values().iter().fold(1.0f64, |a, &b| a.max(b.abs()));
            checks_passed = report.min_slack >= -1e-6 * scale
                && (report.mu.total() - t * m.total_volume()).abs()
                    <= 1e-6 * t * m.total_volume();
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
            if spec.output.csv {
                write_mask_csv(
                    out_dir,
                    &format!("{}_support", spec.name),
                    &m,
                    &report.support_mask,
                )?;
            }
        }
        TaskSpec::Quadrature { center, t, probes } => {
            let m = require_manifold(spec)?;
            let c = center.to_point(&m)?;
            let result = apps::harmonic_ball_result(&m, &c, *t, &opts)?;
            let source = atom(&m, &c, *t)?;
            let probe_points: Vec<Point> =
                probes.iter().map(|p| p.to_point(&m)).collect::<Result<_>>()?;
            let report = apps::quadrature_verify(&m, &result.omega_mask, &source, &probe_points)?;
            checks_passed = report.pass;
            let summary = QuadratureSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "quadrature",
                manifold: spec.manifold.as_ref().unwrap().label(),
                t: *t,
                probes: report
                    .probes
                    .iter()
                    .map(|p| QuadratureProbeSummary {
                        lhs: p.lhs,
                        rhs: p.rhs,
                        slack: p.slack,
                        ok: p.ok,
                    })
                    .collect(),
                constant_gap: report.constant_gap,
                constant_tolerance: report.constant_tolerance,
                pass: report.pass,
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
        }
        TaskSpec::Radial { n, rho, t, r, bc, n_cells, r_sweep } => {
            let radial_bc = match bc {
                BcSpec::Dirichlet => RadialBc::Dirichlet,
                BcSpec::Neumann => RadialBc::Neumann,
            };
            let radii: Vec<f64> = if r_sweep.is_empty() { vec![*r] } else { r_sweep.clone() };
            let mut rows = Vec::new();
            let mut csv_rows = Vec::new();
            for &r_outer in &radii {
                let sc = RadialScenario {
                    n: *n,
                    rho: *rho,
                    t: *t,
                    r_outer,
                    bc: radial_bc,
                    n_cells: *n_cells,
                };
                let result = radial_solve(&sc, &opts)?;
                if !result.balayage.diagnostics.converged {
                    converged = false;
                }
                let (bound, bound_ok) = if radial_bc == RadialBc::Dirichlet {
                    let b = excess_bound_check(&sc, &opts)?;
                    if !b.ok {
                        checks_passed = false;
                    }
                    (b.bound, b.ok)
                } else {
                    (f64::NAN, true)
                };
                let h = r_outer / *n_cells as f64;
                if (result.s_numeric - result.s_closed).abs() > 3.0 * h {
                    checks_passed = false;
                }
                rows.push(RadialRowSummary {
                    n: *n,
                    rho: *rho,
                    t: *t,
                    r: r_outer,
                    bc: *bc,
                    n_cells: *n_cells,
                    s_numeric: result.s_numeric,
                    s_closed: result.s_closed,
                    q_r: result.q_r,
                    fraction_lost: result.fraction_lost,
                    bound,
                    bound_ok,
                });
                csv_rows.push(format!(
                    "{},{},{},{},{},{},{},{},{},{},{}",
                    n,
                    fmt_f(*rho),
                    fmt_f(*t),
                    fmt_f(r_outer),
                    match bc {
                        BcSpec::Dirichlet => "dirichlet",
                        BcSpec::Neumann => "neumann",
                    },
                    fmt_f(result.s_numeric),
                    fmt_f(result.s_closed),
                    fmt_f(result.q_r),
                    fmt_f(result.fraction_lost),
                    fmt_f(bound),
                    u8::from(bound_ok),
                ));
            }
            let (extrapolated, expected) = if radii.len() >= 3 && radial_bc == RadialBc::Dirichlet
            {
                let base = RadialScenario {
                    n: *n,
                    rho: *rho,
                    t: *t,
                    r_outer: radii[0],
                    bc: radial_bc,
                    n_cells: *n_cells,
                };
                let rep = excess_limit(&base, &radii, *n_cells, &opts)?;
                (Some(rep.extrapolated), Some(rep.expected))
            } else {
                (None, None)
            };
            let summary = RadialSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "radial",
                rows,
                extrapolated_fraction: extrapolated,
                expected_fraction: expected,
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
            if spec.output.csv {
                let path = out_dir.join(format!("{}_table.csv", sanitize(&spec.name)));
                let mut f = fs::File::create(path)?;
                writeln!(f, "n,rho,t,r,bc,s_numeric,s_closed,q_r,fraction_lost,bound,bound_ok")?;
                for row in csv_rows {
                    writeln!(f, "{row}")?;
                }
            }
        }
        TaskSpec::Diagnose { levels } => {
            let base = spec
                .manifold
                .as_ref()
                .ok_or_else(|| Error::Config("diagnose task needs a manifold".into()))?;
            let sigma_terms = spec.sigma.clone();
            let report = existence_diagnostic(
                |level| {
                    let m = base.with_resolution(level).build()?;
                    let sigma = build_charge(&m, &sigma_terms)?;
                    let mut sources = Vec::new();
                    let mut sinks = Vec::new();
                    for term in &sigma_terms {
                        if let ChargeTermSpec::Atom { location, weight } = term {
                            let p = location.to_point(&m)?;
                            if *weight > 0.0 {
                                sources.push(p);
                            } else if *weight < 0.0 {
                                sinks.push(p);
                            }
                        }
                    }
                    Ok(DiagnosticInstance { manifold: m, sigma, sources, sinks })
                },
                levels,
                &opts,
            )?;
            let summary = DiagnoseSummary {
                version: VERSION,
                name: spec.name.clone(),
                task: "diagnose",
                manifold: base.label(),
                classification: match report.classification {
                    ExistenceClass::Converging => "converging".into(),
                    ExistenceClass::Diverging => "diverging".into(),
                    ExistenceClass::Inconclusive => "inconclusive".into(),
                },
                slope: report.slope,
                r_squared: report.r_squared,
                rate: report.rate,
                levels: report
                    .levels
                    .iter()
                    .map(|l| DiagnoseLevelSummary {
                        resolution: l.resolution,
                        h: l.h,
                        sup_u: l.sup_u,
                        sink_deviation: l.sink_deviation,
                    })
                    .collect(),
            };
            write_summary(out_dir, &spec.name, &summary, spec.output.summary)?;
        }
    }

    log_info!("[scenario {}] done (converged: {converged}, checks: {checks_passed})", spec.name);
    Ok(ScenarioOutcome { name: spec.name.clone(), converged, checks_passed, error: None })
}
