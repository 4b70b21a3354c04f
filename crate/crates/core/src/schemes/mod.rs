//! Linear time-stepping engines.
//!
//! Every step consumes a [`PhaseState`] and returns the next one; only linear
//! systems are solved. TD1, NTD1 and NCOMP share the decoupled engine in
//! [`decoupled`], which sweeps the phases in order and solves one `(φᵢ, μᵢ)`
//! system per phase. NTC2 solves a single coupled system in all phases.

mod decoupled;
mod ntc2;

pub(crate) use decoupled::{decoupled_step, Transport};

use std::sync::Arc;

use crate::chemistry::{
    self, potential, solvability_guard, tau_threshold, ModelParams, ThresholdMode,
};
use crate::error::{Error, Result};
use crate::mesh_fe::{FeSpace, LinearSolver, SolverConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SchemeId {
    Td1,
    Ntd1,
    Ntc2,
    Ncomp,
}

impl SchemeId {
    pub const ALL: [SchemeId; 4] = [SchemeId::Td1, SchemeId::Ntd1, SchemeId::Ntc2, SchemeId::Ncomp];

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::Td1 => "TD1",
            SchemeId::Ntd1 => "NTD1",
            SchemeId::Ntc2 => "NTC2",
            SchemeId::Ncomp => "NCOMP",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "TD1" => Ok(SchemeId::Td1),
            "NTD1" => Ok(SchemeId::Ntd1),
            "NTC2" => Ok(SchemeId::Ntc2),
            "NCOMP" => Ok(SchemeId::Ncomp),
            other => Err(Error::Parameter(format!(
                "unknown scheme '{other}' (expected TD1, NTD1, NTC2 or NCOMP)"
            ))),
        }
    }

    /// True when the double well is replaced by its truncation.
    pub fn default_truncated(self) -> bool {
        matches!(self, SchemeId::Td1)
    }
}

impl std::fmt::Display for SchemeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// How the stabilization coefficients `τᵢ` are chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum TauMode {
    /// Threshold of the scheme: `72MΣ²/ε²` when truncated, otherwise the
    /// state-dependent `72MΣ²‖f′(φⁿ)‖²∞/ε²` recomputed every step.
    Auto,
    Explicit(Vec<f64>),
    Zero,
}

impl TauMode {
    /// Auto for TD1 and NTC2, zero for NTD1; NCOMP follows its truncation flag.
    pub fn default_for(scheme: SchemeId, truncated: bool) -> Self {
        match scheme {
            SchemeId::Td1 | SchemeId::Ntc2 => TauMode::Auto,
            SchemeId::Ntd1 => TauMode::Zero,
            SchemeId::Ncomp if truncated => TauMode::Auto,
            SchemeId::Ncomp => TauMode::Zero,
        }
    }
}

/// Nodal Dirichlet data imposed on one phase along the whole boundary.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseDirichlet {
    pub phase: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeConfig {
    pub scheme: SchemeId,
    pub dt: f64,
    pub tau: TauMode,
    /// Only read by NCOMP; TD1 is always truncated, NTD1 and NTC2 never.
    pub truncated: bool,
    pub solver: SolverConfig,
    pub dirichlet: Option<PhaseDirichlet>,
}

impl SchemeConfig {
    pub fn new(scheme: SchemeId, dt: f64) -> Self {
        let truncated = scheme.default_truncated();
        SchemeConfig {
            scheme,
            dt,
            tau: TauMode::default_for(scheme, truncated),
            truncated,
            solver: SolverConfig::default(),
            dirichlet: None,
        }
    }

    pub fn with_tau(mut self, tau: TauMode) -> Self {
        self.tau = tau;
        self
    }

    /// Whether the truncated double well is used.
    pub fn is_truncated(&self) -> bool {
        match self.scheme {
            SchemeId::Td1 => true,
            SchemeId::Ntd1 | SchemeId::Ntc2 => false,
            SchemeId::Ncomp => self.truncated,
        }
    }

    pub fn validate(&self, num_phases: usize) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Parameter(format!("time step must be positive, got {}", self.dt)));
        }
        if matches!(self.scheme, SchemeId::Td1 | SchemeId::Ntd1) && num_phases != 3 {
            return Err(Error::Parameter(format!(
                "{} is a ternary scheme, got {num_phases} phases (use NCOMP)",
                self.scheme
            )));
        }
        if let TauMode::Explicit(t) = &self.tau {
            if t.len() != num_phases || t.iter().any(|&v| !(v >= 0.0)) {
                return Err(Error::Parameter(format!(
                    "need {num_phases} nonnegative tau values, got {t:?}"
                )));
            }
        }
        if let Some(d) = self.dirichlet {
            if d.phase >= num_phases {
                return Err(Error::Parameter(format!(
                    "Dirichlet phase {} out of range",
                    d.phase + 1
                )));
            }
        }
        Ok(())
    }
}

/// Phase fields and chemical potentials at one time level.
#[derive(Clone, Debug, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub phi: Vec<Vec<f64>>,
    /// Chemical potentials at the same time level as `phi`.
    pub mu: Vec<Vec<f64>>,
    /// Potentials that drove the last step's fluxes: `μⁿ⁺¹` for the decoupled
    /// schemes, `μⁿ⁺½` for NTC2.
    pub flux_mu: Vec<Vec<f64>>,
    /// False until `mu` holds a meaningful value (NTC2 needs `μⁿ`).
    pub mu_initialized: bool,
    /// Stabilization coefficients used to reach this state.
    pub tau: Vec<f64>,
    /// `∫φᵢ` of the initial data.
    pub initial_volumes: Vec<f64>,
}

impl PhaseState {
    pub fn num_phases(&self) -> usize {
        self.phi.len()
    }

    pub fn from_nodal(space: &FeSpace, phi: Vec<Vec<f64>>) -> Result<Self> {
        if phi.is_empty() {
            return Err(Error::Parameter("at least one phase is required".into()));
        }
        for p in &phi {
            space.check_nodal(p, "phase field")?;
        }
        let n = space.num_nodes();
        let k = phi.len();
        let initial_volumes = phi.iter().map(|p| space.integrate(p)).collect();
        Ok(PhaseState {
            t: 0.0,
            phi,
            mu: vec![vec![0.0; n]; k],
            flux_mu: vec![vec![0.0; n]; k],
            mu_initialized: false,
            tau: vec![0.0; k],
            initial_volumes,
        })
    }

    /// FNV-1a hash of the time and all nodal values, for reproducibility checks.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |x: f64| {
            for b in x.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
        };
        feed(self.t);
        for f in self.phi.iter().chain(&self.mu) {
            for &v in f {
                feed(v);
            }
        }
        h
    }
}

/// Initial datum for one phase.
pub enum PhaseIc {
    Analytic(Box<dyn Fn(f64, f64) -> f64 + Send + Sync>),
    Nodal(Vec<f64>),
    /// `1 − Σ` of the other phases, nodewise.
    Remainder,
}

impl PhaseIc {
    pub fn analytic(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        PhaseIc::Analytic(Box::new(f))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    L2,
    Nodal,
}

/// Builds `φ⁰` by L² projection of analytic data; `μ⁰ = 0`.
pub fn init_state(space: &FeSpace, ics: &[PhaseIc]) -> Result<PhaseState> {
    init_state_with(space, ics, Projection::L2)
}

pub fn init_state_with(space: &FeSpace, ics: &[PhaseIc], projection: Projection) -> Result<PhaseState> {
    let n = space.num_nodes();
    if ics.iter().filter(|ic| matches!(ic, PhaseIc::Remainder)).count() > 1 {
        return Err(Error::Parameter("at most one phase may be the remainder".into()));
    }
    let mut phi: Vec<Option<Vec<f64>>> = Vec::with_capacity(ics.len());
    for ic in ics {
        phi.push(match ic {
            PhaseIc::Analytic(f) => Some(match projection {
                Projection::L2 => space.l2_project(f)?,
                Projection::Nodal => space.interpolate(f),
            }),
            PhaseIc::Nodal(v) => {
                space.check_nodal(v, "initial phase")?;
                Some(v.clone())
            }
            PhaseIc::Remainder => None,
        });
    }
    if let Some(r) = phi.iter().position(|p| p.is_none()) {
        let mut rem = vec![1.0; n];
        for p in phi.iter().flatten() {
            for (a, b) in rem.iter_mut().zip(p) {
                *a -= b;
            }
        }
        phi[r] = Some(rem);
    }
    PhaseState::from_nodal(space, phi.into_iter().map(|p| p.unwrap()).collect())
}

/// Mesh, parameters, configuration and solver bundled for stepping.
pub struct SchemeContext {
    pub space: Arc<FeSpace>,
    pub params: ModelParams,
    pub config: SchemeConfig,
    solver: LinearSolver,
}

impl SchemeContext {
    pub fn new(space: Arc<FeSpace>, params: ModelParams, config: SchemeConfig) -> Result<Self> {
        params.validate()?;
        config.validate(params.num_phases())?;
        let solver = LinearSolver::new(config.solver.clone());
        Ok(SchemeContext {
            space,
            params,
            config,
            solver,
        })
    }

    pub fn solver(&self) -> &LinearSolver {
        &self.solver
    }

    pub fn num_phases(&self) -> usize {
        self.params.num_phases()
    }

    /// Advisory messages: solvability conditions and explicit τ below threshold.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = solvability_guard(&self.params, self.space.mesh().h, self.config.dt).warnings();
        if let TauMode::Explicit(t) = &self.config.tau {
            if self.config.is_truncated() {
                for (i, &ti) in t.iter().enumerate() {
                    let need = tau_threshold(
                        self.params.mobility[i],
                        self.params.sigma.values()[i],
                        self.params.epsilon,
                        ThresholdMode::Truncated,
                    );
                    if ti < need {
                        out.push(format!(
                            "phase {}: tau = {ti} is below the stability threshold {need:.4e}",
                            i + 1
                        ));
                    }
                }
            }
        }
        out
    }

    /// Stabilization coefficients for a step leaving `state`.
    pub fn tau_for(&self, state: &PhaseState) -> Vec<f64> {
        let p = &self.params;
        let n = p.num_phases();
        match &self.config.tau {
            TauMode::Zero => vec![0.0; n],
            TauMode::Explicit(t) => t.clone(),
            TauMode::Auto => (0..n)
                .map(|i| {
                    let mode = if self.config.is_truncated() {
                        ThresholdMode::Truncated
                    } else {
                        let bound = state.phi[i]
                            .iter()
                            .map(|&v| chemistry::double_well(v).2.abs())
                            .fold(0.0, f64::max);
                        ThresholdMode::NonTruncated {
                            f_prime_bound: bound,
                        }
                    };
                    tau_threshold(p.mobility[i], p.sigma.values()[i], p.epsilon, mode)
                })
                .collect(),
        }
    }

    fn check_state(&self, state: &PhaseState) -> Result<()> {
        if state.num_phases() != self.num_phases() {
            return Err(Error::Dimension(format!(
                "state has {} phases, parameters describe {}",
                state.num_phases(),
                self.num_phases()
            )));
        }
        for f in state.phi.iter().chain(&state.mu) {
            self.space.check_nodal(f, "state field")?;
        }
        Ok(())
    }

    /// Advances `state` by one step of the configured scheme.
    pub fn step(&self, state: &PhaseState) -> Result<PhaseState> {
        self.check_state(state)?;
        match self.config.scheme {
            SchemeId::Td1 | SchemeId::Ntd1 | SchemeId::Ncomp => {
                decoupled_step(self, state, self.config.dt, Transport::None)
            }
            SchemeId::Ntc2 => ntc2::ntc2_step(self, state, self.config.dt),
        }
    }

    /// Step with an overridden time step (used for the final partial step).
    pub fn step_dt(&self, state: &PhaseState, dt: f64) -> Result<PhaseState> {
        self.check_state(state)?;
        match self.config.scheme {
            SchemeId::Td1 | SchemeId::Ntd1 | SchemeId::Ncomp => {
                decoupled_step(self, state, dt, Transport::None)
            }
            SchemeId::Ntc2 => ntc2::ntc2_step(self, state, dt),
        }
    }

    /// Chemical potential implied by `φ` alone (all explicit terms at `φ`).
    pub fn consistent_potential(&self, state: &PhaseState) -> Result<Vec<Vec<f64>>> {
        ntc2::consistent_potential(self, state)
    }
}

fn require(ctx: &SchemeContext, scheme: SchemeId, n_ok: bool) -> Result<()> {
    if ctx.config.scheme != scheme {
        return Err(Error::Parameter(format!(
            "context is configured for {}, not {scheme}",
            ctx.config.scheme
        )));
    }
    if !n_ok {
        return Err(Error::Parameter(format!(
            "{scheme} does not support {} phases",
            ctx.num_phases()
        )));
    }
    Ok(())
}

/// One step of the truncated decoupled scheme.
pub fn td1_step(ctx: &SchemeContext, state: &PhaseState) -> Result<PhaseState> {
    require(ctx, SchemeId::Td1, ctx.num_phases() == 3)?;
    ctx.step(state)
}

/// One step of the non-truncated decoupled scheme.
pub fn ntd1_step(ctx: &SchemeContext, state: &PhaseState) -> Result<PhaseState> {
    require(ctx, SchemeId::Ntd1, ctx.num_phases() == 3)?;
    ctx.step(state)
}

/// One step of the coupled second-order scheme.
pub fn ntc2_step(ctx: &SchemeContext, state: &PhaseState) -> Result<PhaseState> {
    require(ctx, SchemeId::Ntc2, true)?;
    ctx.step(state)
}

/// One step of the N-component decoupled scheme.
pub fn ncomp_step(ctx: &SchemeContext, state: &PhaseState) -> Result<PhaseState> {
    require(ctx, SchemeId::Ncomp, ctx.num_phases() >= 2)?;
    ctx.step(state)
}

/// What [`run`] hands to its callback.
pub struct StepEvent<'a> {
    pub step: usize,
    pub total_steps: usize,
    /// Previous state; `None` for the initial report.
    pub previous: Option<&'a PhaseState>,
    pub state: &'a PhaseState,
    /// Time step that produced `state` (zero for the initial report).
    pub dt: f64,
}

/// Number of steps needed to reach `t_end` from `t0` with step `dt`.
pub fn step_count(t0: f64, t_end: f64, dt: f64) -> usize {
    let span = t_end - t0;
    if span <= 0.0 {
        return 0;
    }
    (span / dt - 1e-9).ceil().max(1.0) as usize
}

/// Integrates to `t_end` with a fixed step, calling `on_output` for the
/// initial state, every `stride`-th step and the final step. The last step is
/// shortened to land exactly on `t_end`.
pub fn run(
    ctx: &SchemeContext,
    initial: PhaseState,
    t_end: f64,
    stride: usize,
    mut on_output: impl FnMut(&StepEvent) -> Result<()>,
) -> Result<PhaseState> {
    let stride = stride.max(1);
    let dt = ctx.config.dt;
    let total = step_count(initial.t, t_end, dt);
    on_output(&StepEvent {
        step: 0,
        total_steps: total,
        previous: None,
        state: &initial,
        dt: 0.0,
    })?;
    let t0 = initial.t;
    let mut state = initial;
    for k in 1..=total {
        let target = if k == total { t_end } else { t0 + k as f64 * dt };
        let h = target - state.t;
        let mut next = ctx
            .step_dt(&state, h)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        next.t = target;
        if k % stride == 0 || k == total {
            on_output(&StepEvent {
                step: k,
                total_steps: total,
                previous: Some(&state),
                state: &next,
                dt: h,
            })?;
        }
        state = next;
    }
    Ok(state)
}

/// Pointwise `(F, f, f′)` of the configured double well at quadrature values.
pub(crate) fn well_at(values: &[f64], truncated: bool) -> (Vec<f64>, Vec<f64>) {
    let mut f = Vec::with_capacity(values.len());
    let mut fp = Vec::with_capacity(values.len());
    for &v in values {
        let (_, a, b) = potential(v, truncated);
        f.push(a);
        fp.push(b);
    }
    (f, fp)
}
