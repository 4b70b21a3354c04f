//! Benchmarks, configuration files, output writers and the batch driver
//! behind the command-line tool.

mod benchmarks;
mod config;
mod driver;
mod output;

pub use benchmarks::{build_initial_state, initial_conditions, BenchmarkId};
pub use config::{parse_config, parse_config_str, BoundaryMode, FlowMode, RunConfig, DESK_H, OUT_DIR_ENV, PAPER_H};
pub use driver::{
    apply_env_override, cmd_eoc, cmd_list, cmd_run, eoc_table, integrate, integrate_with, RunSummary, Stepper,
};
pub use output::{csv_header, csv_row, eoc_csv, read_vtk, vtk_string, write_vtk, CsvWriter, VtkData, EOC_HEADER};
