//! Finite-element solver for the penalized ternary and N-component
//! Cahn–Hilliard system.
//!
//! The crate is organised bottom-up:
//!
//! * [`mesh_fe`]: structured triangulations, P1 assembly, quadrature and
//!   the sparse linear-solve contract.
//! * [`chemistry`]: pointwise potentials, truncations, penalty operators and
//!   parameter derivations.
//! * [`schemes`]: the linear time-stepping engines (TD1, NTD1, NTC2, NCOMP).
//! * [`nsch`]: the Navier–Stokes coupled variant on the mini element.
//! * [`diagnostics`]: energies, numerical dissipation and convergence tables.
//! * [`experiments`]: configuration files, built-in benchmarks, CSV/VTK
//!   writers and the batch commands used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod chemistry;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod mesh_fe;
pub mod nsch;
pub mod schemes;

pub use chemistry::{ModelParams, SpreadingCoefficients, SpreadingKind};
pub use diagnostics::{DiagnosticsRecord, EocRow, EocTable};
pub use error::{Error, Result};
pub use experiments::{BenchmarkId, RunConfig};
pub use mesh_fe::{BlockSystem, FeSpace, Mesh, Rect, SolverConfig, SolverKind, SparseMatrix};
pub use nsch::{FlowState, NschConfig, VelocityMode};
pub use schemes::{PhaseState, SchemeConfig, SchemeId, TauMode};
