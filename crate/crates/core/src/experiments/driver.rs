use std::path::PathBuf;
use std::sync::Arc;

use super::{build_initial_state, eoc_csv, write_vtk, BenchmarkId, CsvWriter, RunConfig, OUT_DIR_ENV};
use crate::diagnostics::{eoc, DiagnosticsRecord, EocTable};
use crate::error::{Error, Result};
use crate::mesh_fe::FeSpace;
use crate::nsch::{FlowState, NschContext};
use crate::schemes::{step_count, PhaseState, SchemeContext};

/// Applies the output-directory environment override, if set.
pub fn apply_env_override(cfg: &mut RunConfig) {
    if let Some(dir) = std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()) {
        cfg.out_dir = PathBuf::from(dir);
    }
}

/// Either a plain phase-field context or one with flow.
pub enum Stepper {
    Phase(SchemeContext),
    Flow(NschContext),
}

impl Stepper {
    pub fn new(cfg: &RunConfig, space: Arc<FeSpace>) -> Result<Self> {
        cfg.validate()?;
        let params = cfg.model_params()?;
        Ok(match cfg.nsch_config() {
            None => Stepper::Phase(SchemeContext::new(space, params, cfg.scheme_config())?),
            Some(nc) => Stepper::Flow(NschContext::new(space, params, cfg.scheme_config(), nc)?),
        })
    }

    pub fn phase_context(&self) -> &SchemeContext {
        match self {
            Stepper::Phase(c) => c,
            Stepper::Flow(c) => &c.phase,
        }
    }

    pub fn initial_flow(&self) -> Option<FlowState> {
        match self {
            Stepper::Phase(_) => None,
            Stepper::Flow(c) => Some(c.initial_flow()),
        }
    }

    pub fn step_dt(&self, state: &PhaseState, flow: Option<&FlowState>, dt: f64) -> Result<(PhaseState, Option<FlowState>)> {
        match (self, flow) {
            (Stepper::Phase(c), _) => Ok((c.step_dt(state, dt)?, None)),
            (Stepper::Flow(c), Some(f)) => {
                let (s, f) = c.step_dt(state, f, dt)?;
                Ok((s, Some(f)))
            }
            (Stepper::Flow(_), None) => Err(Error::Internal("flow run without a flow state".into())),
        }
    }
}

/// What a completed run produced.
#[derive(Debug)]
pub struct RunSummary {
    pub steps: usize,
    pub rows: usize,
    pub csv: PathBuf,
    pub snapshots: Vec<PathBuf>,
    pub warnings: Vec<String>,
    pub final_state: PhaseState,
    pub final_flow: Option<FlowState>,
}

/// Integrates `cfg` from its initial data, calling `observe` after every step
/// with `(step, previous, dt, state, flow)`.
pub fn integrate_with(
    cfg: &RunConfig,
    mut observe: impl FnMut(usize, &PhaseState, f64, &PhaseState, Option<&FlowState>) -> Result<()>,
) -> Result<(PhaseState, Option<FlowState>)> {
    let space = Arc::new(FeSpace::new(cfg.mesh()?));
    let stepper = Stepper::new(cfg, space.clone())?;
    let mut state = build_initial_state(cfg, &space)?;
    let mut flow = stepper.initial_flow();
    let total = step_count(0.0, cfg.t_end, cfg.dt);
    for k in 1..=total {
        let target = if k == total { cfg.t_end } else { k as f64 * cfg.dt };
        let h = target - state.t;
        let (mut next, next_flow) = stepper
            .step_dt(&state, flow.as_ref(), h)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        next.t = target;
        observe(k, &state, h, &next, next_flow.as_ref())?;
        state = next;
        flow = next_flow;
    }
    Ok((state, flow))
}

/// Final state of `cfg` with step `dt`, without writing anything.
pub fn integrate(cfg: &RunConfig, dt: f64) -> Result<PhaseState> {
    let mut c = cfg.clone();
    c.dt = dt;
    Ok(integrate_with(&c, |_, _, _, _, _| Ok(()))?.0)
}

/// Runs a benchmark, writing `diagnostics.csv` and VTK snapshots to the
/// output directory. Rows already written stay on disk if a step fails.
pub fn cmd_run(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let space = Arc::new(FeSpace::new(cfg.mesh()?));
    let stepper = Stepper::new(cfg, space.clone())?;
    let ctx = stepper.phase_context();
    let params = &ctx.params;
    let scheme = &ctx.config;
    let warnings = ctx.warnings();

    let initial = build_initial_state(cfg, &space)?;
    let initial_flow = stepper.initial_flow();
    let csv_path = cfg.out_dir.join("diagnostics.csv");
    let mut csv = CsvWriter::create(&csv_path, cfg.num_phases())?;
    let mut snapshots = Vec::new();
    let total = step_count(0.0, cfg.t_end, cfg.dt);

    let kinetic = |f: Option<&FlowState>| f.map_or(0.0, |f| f.kinetic_energy(&space));
    let mut snapshot = |step: usize, state: &PhaseState, flow: Option<&FlowState>| -> Result<()> {
        let path = cfg.out_dir.join(format!("fields_{step:06}.vtk"));
        write_vtk(&path, space.mesh(), state, flow)?;
        snapshots.push(path);
        Ok(())
    };

    csv.write(&DiagnosticsRecord::compute(
        &space,
        params,
        scheme,
        None,
        &initial,
        kinetic(initial_flow.as_ref()),
    ))?;
    snapshot(0, &initial, initial_flow.as_ref())?;

    let mut state = initial;
    let mut flow = initial_flow;
    for k in 1..=total {
        let target = if k == total { cfg.t_end } else { k as f64 * cfg.dt };
        let h = target - state.t;
        let (mut next, next_flow) = stepper
            .step_dt(&state, flow.as_ref(), h)
            .map_err(|e| Error::Step { step: k, source: Box::new(e) })?;
        next.t = target;
        if k % cfg.stride == 0 || k == total {
            csv.write(&DiagnosticsRecord::compute(
                &space,
                params,
                scheme,
                Some((&state, h)),
                &next,
                kinetic(next_flow.as_ref()),
            ))?;
        }
        if k == total || (cfg.vtk_stride > 0 && k % cfg.vtk_stride == 0) {
            snapshot(k, &next, next_flow.as_ref())?;
        }
        state = next;
        flow = next_flow;
    }
    Ok(RunSummary {
        steps: total,
        rows: csv.rows(),
        csv: csv_path,
        snapshots,
        warnings,
        final_state: state,
        final_flow: flow,
    })
}

/// Time-convergence study: runs every step in `dts` (decreasing) and the
/// reference step concurrently, then writes `eoc.csv`.
pub fn cmd_eoc(cfg: &RunConfig, dts: &[f64], ref_dt: f64) -> Result<EocTable> {
    let table = eoc_table(cfg, dts, ref_dt)?;
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let path = cfg.out_dir.join("eoc.csv");
    std::fs::write(&path, eoc_csv(&table)).map_err(|e| Error::io(&path, e))?;
    Ok(table)
}

/// The convergence table of [`cmd_eoc`] without writing files.
pub fn eoc_table(cfg: &RunConfig, dts: &[f64], ref_dt: f64) -> Result<EocTable> {
    if dts.is_empty() {
        return Err(Error::Parameter("the step ladder is empty".into()));
    }
    if dts.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::Parameter(format!("step ladder must be strictly decreasing, got {dts:?}")));
    }
    if !(ref_dt > 0.0) || dts.iter().any(|&d| !(ref_dt < d)) {
        return Err(Error::Parameter(format!("reference step {ref_dt} must be positive and below every ladder step")));
    }
    cfg.validate()?;
    let all: Vec<f64> = std::iter::once(ref_dt).chain(dts.iter().copied()).collect();
    let results: Vec<Result<PhaseState>> = std::thread::scope(|s| {
        let handles: Vec<_> = all.iter().map(|&dt| s.spawn(move || integrate(cfg, dt))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(Error::Internal("worker panicked".into()))))
            .collect()
    });
    let mut states = results.into_iter().collect::<Result<Vec<_>>>()?;
    let reference = states.remove(0);
    let runs: Vec<(f64, PhaseState)> = dts.iter().copied().zip(states).collect();
    let space = FeSpace::new(cfg.mesh()?);
    eoc(&space, &reference, &runs)
}

/// Benchmark catalog, one line per entry in a stable order.
pub fn cmd_list() -> String {
    BenchmarkId::ALL
        .iter()
        .map(|id| format!("{:<16}{} phases  {}\n", id.name(), id.num_phases(), id.description()))
        .collect()
}
