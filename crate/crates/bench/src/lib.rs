//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use phasefield_core::experiments::{build_initial_state, BenchmarkId, RunConfig};
use phasefield_core::schemes::{SchemeContext, SchemeId};
use phasefield_core::{FeSpace, PhaseState, Result};

/// Lens benchmark at the given resolution, ready to step with `scheme`.
pub fn lens_fixture(nx: usize, scheme: SchemeId) -> Result<(SchemeContext, PhaseState)> {
    let mut cfg = RunConfig::defaults(BenchmarkId::Lens);
    cfg.nx = nx;
    cfg.ny = nx / 2;
    cfg.scheme = scheme;
    let space = Arc::new(FeSpace::new(cfg.mesh()?));
    let state = build_initial_state(&cfg, &space)?;
    let ctx = SchemeContext::new(space, cfg.model_params()?, cfg.scheme_config())?;
    Ok((ctx, state))
}
