//! Run configuration files.
//!
//! Files are TOML: top-level `benchmark` and `seed`, plus the sections
//! `[mesh]`, `[time]`, `[model]`, `[scheme]`, `[boundary]`, `[flow]`,
//! `[output]` and `[solver]`. Every key is optional except `benchmark`, which
//! may also come from the command line; missing values take the benchmark's
//! defaults. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::BenchmarkId;
use crate::chemistry::ModelParams;
use crate::error::{Error, Result};
use crate::mesh_fe::{build_structured_mesh, Mesh, Rect, SolverConfig, SolverKind};
use crate::nsch::{NschConfig, VelocityMode, VelocityProfile};
use crate::schemes::{PhaseDirichlet, SchemeConfig, SchemeId, TauMode};

/// Environment variable that overrides the output directory.
pub const OUT_DIR_ENV: &str = "PHASEFIELD_OUT";

/// Mesh size of the built-in defaults.
pub const DESK_H: f64 = 0.01;
/// Mesh size of the published figures.
pub const PAPER_H: f64 = 1.0 / 300.0;

/// Boundary condition on the phase fields.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoundaryMode {
    Neumann,
    /// `φ₃` fixed to the given value along the whole boundary.
    DirichletPhi3(f64),
}

/// Velocity coupling of a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FlowMode {
    Off,
    Coupled,
    /// Phases advected by the fixed velocity profile.
    Prescribed,
    /// Phases advected by `u ≡ 0`.
    Zero,
}

/// Fully resolved settings of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub benchmark: BenchmarkId,
    pub domain: Rect,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub t_end: f64,
    pub epsilon: f64,
    pub lambda: f64,
    pub big_lambda: f64,
    pub mobility: Vec<f64>,
    pub sigma: Vec<f64>,
    pub viscosity: Vec<f64>,
    pub scheme: SchemeId,
    pub tau: TauMode,
    /// Truncated double well for NCOMP.
    pub truncated: bool,
    pub seed: u64,
    pub boundary: BoundaryMode,
    pub flow: FlowMode,
    /// Velocity boundary data and initial velocity; `None` is no-slip from rest.
    pub velocity_profile: Option<String>,
    pub out_dir: PathBuf,
    /// Diagnostics row every `stride` steps.
    pub stride: usize,
    /// Field snapshot every `vtk_stride` steps; 0 writes only the first and last.
    pub vtk_stride: usize,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Parameters of the benchmark at desk resolution.
    pub fn defaults(benchmark: BenchmarkId) -> Self {
        let domain = benchmark.domain();
        let (nx, ny) = match benchmark {
            BenchmarkId::ConvergenceIc => (64, 64),
            _ => domain.cells_for_h(DESK_H),
        };
        let n = benchmark.num_phases();
        let (t_end, dt, epsilon, mobility, sigma, scheme) = match benchmark {
            BenchmarkId::Lens => (2.5, 1e-4, 1e-2, 1e-3, vec![1.0; 3], SchemeId::Td1),
            BenchmarkId::TwoBubbles | BenchmarkId::BubblesFlow => (0.5, 1e-4, 1e-2, 1e-3, vec![1.0; 3], SchemeId::Ntd1),
            BenchmarkId::Spinodal2 => (2.5, 1e-4, 1e-2, 1e-3, vec![1.0; 3], SchemeId::Ntd1),
            BenchmarkId::Spinodal4 => (2.5, 1e-4, 1e-2, 1e-3, vec![1.0, 1.0, 1.0, 4.0], SchemeId::Ncomp),
            BenchmarkId::ConvergenceIc => (2e-4, 1e-5, 0.02, 1e-4, vec![0.4, 1.6, 1.2], SchemeId::Ntd1),
        };
        let (flow, velocity_profile) = match benchmark {
            BenchmarkId::BubblesFlow => (FlowMode::Coupled, Some("rotation".to_string())),
            _ => (FlowMode::Off, None),
        };
        RunConfig {
            benchmark,
            domain,
            nx,
            ny,
            dt,
            t_end,
            epsilon,
            lambda: 1e-4,
            big_lambda: 7.0,
            mobility: vec![mobility; n],
            sigma,
            viscosity: vec![1.0; n],
            scheme,
            tau: TauMode::default_for(scheme, false),
            truncated: false,
            seed: 0,
            boundary: BoundaryMode::Neumann,
            flow,
            velocity_profile,
            out_dir: PathBuf::from("out").join(benchmark.name()),
            stride: 10,
            vtk_stride: 0,
            solver: SolverConfig::default(),
        }
    }

    pub fn num_phases(&self) -> usize {
        self.benchmark.num_phases()
    }

    pub fn mesh(&self) -> Result<Mesh> {
        build_structured_mesh(self.domain, self.nx, self.ny)
    }

    pub fn model_params(&self) -> Result<ModelParams> {
        ModelParams::new(
            self.epsilon,
            self.lambda,
            self.big_lambda,
            self.mobility.clone(),
            self.sigma.clone(),
        )?
        .with_viscosity(self.viscosity.clone())
    }

    pub fn scheme_config(&self) -> SchemeConfig {
        let mut c = SchemeConfig::new(self.scheme, self.dt).with_tau(self.tau.clone());
        c.truncated = self.truncated;
        c.solver = self.solver.clone();
        if let BoundaryMode::DirichletPhi3(value) = self.boundary {
            c.dirichlet = Some(PhaseDirichlet { phase: 2, value });
        }
        c
    }

    /// Flow settings, or `None` for a pure phase-field run.
    pub fn nsch_config(&self) -> Option<NschConfig> {
        let profile = self.velocity_profile.as_deref().map(|_| VelocityProfile::rotation());
        let mode = match self.flow {
            FlowMode::Off => return None,
            FlowMode::Coupled => VelocityMode::Coupled,
            FlowMode::Prescribed => VelocityMode::Prescribed(profile.clone().unwrap_or_else(VelocityProfile::rotation)),
            FlowMode::Zero => VelocityMode::Zero,
        };
        Some(NschConfig {
            mode,
            boundary: profile.clone(),
            initial: profile,
        })
    }

    /// Replaces the scheme and resets the scheme-dependent τ default.
    pub fn set_scheme(&mut self, scheme: SchemeId) {
        self.scheme = scheme;
        self.tau = TauMode::default_for(scheme, self.truncated);
    }

    pub fn validate(&self) -> Result<()> {
        self.model_params()?;
        self.scheme_config().validate(self.num_phases())?;
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::Parameter("mesh needs at least one cell per direction".into()));
        }
        if !(self.t_end >= 0.0) {
            return Err(Error::Parameter(format!("t_end must be nonnegative, got {}", self.t_end)));
        }
        if self.flow != FlowMode::Off && self.scheme == SchemeId::Ntc2 {
            return Err(Error::Parameter("flow coupling needs a decoupled scheme".into()));
        }
        if matches!(self.boundary, BoundaryMode::DirichletPhi3(_)) && self.num_phases() < 3 {
            return Err(Error::Parameter("Dirichlet data on phase 3 needs three phases".into()));
        }
        Ok(())
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    benchmark: Option<String>,
    seed: Option<u64>,
    #[serde(default)]
    mesh: RawMesh,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    scheme: RawScheme,
    #[serde(default)]
    boundary: RawBoundary,
    #[serde(default)]
    flow: RawFlow,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    solver: RawSolver,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawMesh {
    domain: Option<[f64; 4]>,
    nx: Option<usize>,
    ny: Option<usize>,
    h: Option<f64>,
    paper_resolution: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<f64>,
}

/// A number, a list of numbers, or a whitespace/comma separated string.
#[derive(Deserialize, Clone)]
#[serde(untagged)]
enum Numbers {
    One(f64),
    Many(Vec<f64>),
    Text(String),
}

impl Numbers {
    fn resolve(&self, n: usize, key: &str) -> std::result::Result<Vec<f64>, String> {
        let v = match self {
            Numbers::One(x) => vec![*x; n],
            Numbers::Many(v) => v.clone(),
            Numbers::Text(s) => s
                .split(|c: char| c.is_whitespace() || c == ',')
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| format!("'{t}' is not a number in {key}")))
                .collect::<std::result::Result<_, _>>()?,
        };
        if v.len() != n {
            return Err(format!("{key} needs {n} values, got {}", v.len()));
        }
        Ok(v)
    }
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawModel {
    epsilon: Option<f64>,
    lambda_penalty: Option<f64>,
    big_lambda: Option<f64>,
    mobility: Option<Numbers>,
    sigma: Option<Numbers>,
    /// Pairwise surface tensions `(σ₁₂, σ₁₃, σ₂₃)`.
    sigma_pairwise: Option<[f64; 3]>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawScheme {
    name: Option<String>,
    tau: Option<Numbers>,
    truncated: Option<bool>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawBoundary {
    phi: Option<String>,
    phi3_value: Option<f64>,
    velocity: Option<String>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawFlow {
    mode: Option<String>,
    viscosity: Option<Numbers>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<PathBuf>,
    stride: Option<usize>,
    vtk_stride: Option<usize>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    kind: Option<String>,
    tol: Option<f64>,
    max_iter: Option<usize>,
}

/// 1-based line of `key` inside `[section]` (top level for `""`), or 0.
fn line_of(text: &str, section: &str, key: &str) -> usize {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((k, _)) = t.split_once('=') {
                if k.trim() == key {
                    return i + 1;
                }
            }
        }
    }
    0
}

/// Reads and resolves a configuration file. `benchmark` overrides the file.
pub fn parse_config(path: &Path, benchmark: Option<BenchmarkId>) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, &path.display().to_string(), benchmark)
}

pub fn parse_config_str(text: &str, origin: &str, benchmark: Option<BenchmarkId>) -> Result<RunConfig> {
    let err = |line: usize, message: String| Error::Config {
        path: origin.to_string(),
        line,
        message,
    };
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start.min(text.len())].matches('\n').count() + 1);
        err(line, e.message().trim().to_string())
    })?;
    let at = |section: &str, key: &str, message: String| err(line_of(text, section, key), message);

    let id = match (benchmark, &raw.benchmark) {
        (Some(id), _) => id,
        (None, Some(name)) => BenchmarkId::parse(name).map_err(|e| at("", "benchmark", e.to_string()))?,
        (None, None) => return Err(err(0, "missing required key 'benchmark'".into())),
    };
    let mut c = RunConfig::defaults(id);
    let n = c.num_phases();
    if let Some(s) = raw.seed {
        c.seed = s;
    }

    let m = &raw.mesh;
    if let Some(d) = m.domain {
        c.domain = Rect::new(d[0], d[1], d[2], d[3]);
    }
    let h = match (m.h, m.paper_resolution) {
        (Some(h), _) if !(h > 0.0) => return Err(at("mesh", "h", format!("h must be positive, got {h}"))),
        (Some(h), _) => Some(h),
        (None, Some(true)) => Some(PAPER_H),
        _ if m.domain.is_some() => Some(DESK_H),
        _ => None,
    };
    if let Some(h) = h {
        (c.nx, c.ny) = c.domain.cells_for_h(h);
    }
    if let Some(v) = m.nx {
        c.nx = v;
    }
    if let Some(v) = m.ny {
        c.ny = v;
    }

    if let Some(v) = raw.time.dt {
        if !(v > 0.0) {
            return Err(at("time", "dt", format!("dt must be positive, got {v}")));
        }
        c.dt = v;
    }
    if let Some(v) = raw.time.t_end {
        c.t_end = v;
    }

    let md = &raw.model;
    if let Some(v) = md.epsilon {
        if !(v > 0.0) {
            return Err(at("model", "epsilon", format!("epsilon must be positive, got {v}")));
        }
        c.epsilon = v;
    }
    if let Some(v) = md.lambda_penalty {
        if !(v > 0.0) {
            return Err(at("model", "lambda_penalty", format!("lambda_penalty must be positive, got {v}")));
        }
        c.lambda = v;
    }
    if let Some(v) = md.big_lambda {
        c.big_lambda = v;
    }
    if let Some(v) = &md.mobility {
        c.mobility = v.resolve(n, "mobility").map_err(|e| at("model", "mobility", e))?;
    }
    if let Some(v) = &md.sigma {
        c.sigma = v.resolve(n, "sigma").map_err(|e| at("model", "sigma", e))?;
    }
    if let Some([s12, s13, s23]) = md.sigma_pairwise {
        if md.sigma.is_some() {
            return Err(at("model", "sigma_pairwise", "give either sigma or sigma_pairwise, not both".into()));
        }
        let s = crate::chemistry::sigma_from_pairwise(s12, s13, s23)
            .map_err(|e| at("model", "sigma_pairwise", e.to_string()))?;
        if n != 3 {
            return Err(at("model", "sigma_pairwise", "pairwise tensions describe three phases".into()));
        }
        c.sigma = s.values().to_vec();
    }

    let sc = &raw.scheme;
    if let Some(v) = sc.truncated {
        c.truncated = v;
    }
    if let Some(name) = &sc.name {
        let id = SchemeId::parse(name).map_err(|e| at("scheme", "name", e.to_string()))?;
        c.set_scheme(id);
    } else {
        c.set_scheme(c.scheme);
    }
    if let Some(t) = &sc.tau {
        c.tau = match t {
            Numbers::Text(s) if s.eq_ignore_ascii_case("auto") => TauMode::Auto,
            Numbers::Text(s) if s.eq_ignore_ascii_case("zero") => TauMode::Zero,
            other => TauMode::Explicit(other.resolve(n, "tau").map_err(|e| at("scheme", "tau", e))?),
        };
    }

    let b = &raw.boundary;
    match b.phi.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None | Some("neumann") => {
            if b.phi3_value.is_some() && b.phi.is_none() {
                c.boundary = BoundaryMode::DirichletPhi3(b.phi3_value.unwrap_or(1.0));
            }
        }
        Some("dirichlet_phi3") => c.boundary = BoundaryMode::DirichletPhi3(b.phi3_value.unwrap_or(1.0)),
        Some(other) => {
            return Err(at(
                "boundary",
                "phi",
                format!("unknown phase boundary '{other}' (expected neumann or dirichlet_phi3)"),
            ))
        }
    }
    match b.velocity.as_deref().map(str::to_ascii_lowercase).as_deref() {
        None => {}
        Some("rotation") => c.velocity_profile = Some("rotation".into()),
        Some("no_slip") => c.velocity_profile = None,
        Some(other) => {
            return Err(at(
                "boundary",
                "velocity",
                format!("unknown velocity profile '{other}' (expected rotation or no_slip)"),
            ))
        }
    }

    if let Some(mode) = &raw.flow.mode {
        c.flow = match mode.to_ascii_lowercase().as_str() {
            "off" => FlowMode::Off,
            "coupled" => FlowMode::Coupled,
            "prescribed" => FlowMode::Prescribed,
            "zero" => FlowMode::Zero,
            other => {
                return Err(at(
                    "flow",
                    "mode",
                    format!("unknown flow mode '{other}' (expected off, coupled, prescribed or zero)"),
                ))
            }
        };
    }
    if let Some(v) = &raw.flow.viscosity {
        c.viscosity = v.resolve(n, "viscosity").map_err(|e| at("flow", "viscosity", e))?;
    }

    let o = &raw.output;
    if let Some(d) = &o.dir {
        c.out_dir = d.clone();
    }
    if let Some(s) = o.stride {
        if s == 0 {
            return Err(at("output", "stride", "stride must be at least 1".into()));
        }
        c.stride = s;
    }
    if let Some(s) = o.vtk_stride {
        c.vtk_stride = s;
    }

    let s = &raw.solver;
    if let Some(k) = &s.kind {
        c.solver.kind = match k.to_ascii_lowercase().as_str() {
            "direct" => SolverKind::Direct,
            "iterative" => SolverKind::Iterative,
            other => return Err(at("solver", "kind", format!("unknown solver '{other}' (expected direct or iterative)"))),
        };
    }
    if let Some(t) = s.tol {
        c.solver.tol = t;
    }
    if let Some(m) = s.max_iter {
        c.solver.max_iter = m;
    }

    c.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config_str(text, "test.toml", None)
    }

    #[test]
    fn lens_defaults() {
        let c = parse("benchmark = \"lens\"\n").unwrap();
        assert_eq!(c.dt, 1e-4);
        assert_eq!(c.epsilon, 1e-2);
        assert_eq!(c.lambda, 1e-4);
        assert_eq!(c.mobility, vec![1e-3; 3]);
        assert_eq!(c.big_lambda, 7.0);
        assert_eq!((c.nx, c.ny), (50, 25));
        assert_eq!(c.domain, Rect::new(-0.25, 0.25, -0.1, 0.15));
    }

    #[test]
    fn empty_file_with_cli_benchmark() {
        let c = parse_config_str("", "x", Some(BenchmarkId::Lens)).unwrap();
        assert_eq!(c.benchmark, BenchmarkId::Lens);
        assert!(matches!(parse(""), Err(Error::Config { .. })));
    }

    #[test]
    fn sigma_string() {
        let c = parse("benchmark = \"lens\"\n[model]\nsigma = \"0.4 1.6 1.2\"\n").unwrap();
        assert_eq!(c.sigma, vec![0.4, 1.6, 1.2]);
        assert_eq!(
            c.model_params().unwrap().sigma.kind(),
            crate::chemistry::SpreadingKind::Partial
        );
    }

    #[test]
    fn zero_penalty_rejected_with_line() {
        match parse("benchmark = \"lens\"\n\n[model]\nlambda_penalty = 0\n") {
            Err(Error::Config { line, message, .. }) => {
                assert_eq!(line, 4);
                assert!(message.contains("lambda_penalty"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_rejected_with_line() {
        match parse("benchmark = \"lens\"\n[time]\ndt = 1e-3\nbogus = 2\n") {
            Err(Error::Config { line, message, .. }) => {
                assert_eq!(line, 4, "{message}");
                assert!(message.contains("bogus"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_scheme_rejected() {
        match parse("benchmark = \"lens\"\n[scheme]\nname = \"RK4\"\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_value_has_line() {
        match parse("benchmark = \"lens\"\n[time]\ndt = fast\n") {
            Err(Error::Config { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn overrides() {
        let c = parse(
            "benchmark = \"spinodal4\"\nseed = 9\n[mesh]\nnx = 8\nny = 6\n[scheme]\ntau = [1, 2, 3, 4]\ntruncated = true\n\
             [output]\nstride = 3\n[solver]\nkind = \"iterative\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 9);
        assert_eq!((c.nx, c.ny), (8, 6));
        assert_eq!(c.scheme, SchemeId::Ncomp);
        assert_eq!(c.tau, TauMode::Explicit(vec![1.0, 2.0, 3.0, 4.0]));
        assert!(c.truncated);
        assert_eq!(c.stride, 3);
        assert_eq!(c.solver.kind, SolverKind::Iterative);
    }

    #[test]
    fn paper_resolution_flag() {
        let c = parse("benchmark = \"lens\"\n[mesh]\npaper_resolution = true\n").unwrap();
        assert_eq!((c.nx, c.ny), (150, 75));
    }

    #[test]
    fn ternary_scheme_on_four_phases_rejected() {
        assert!(parse("benchmark = \"spinodal4\"\n[scheme]\nname = \"TD1\"\n").is_err());
    }
}
