//! Configuration, scenarios, file output and the run, validation and
//! convergence harnesses behind the `swe` command.

mod config;
mod harness;
mod output;
mod scenario;

pub use config::{
    load_config, save_config, Config, CustomConfig, MeshConfig, MeshKind, OutputConfig, PhysicsConfig, ScenarioKind,
    ScenarioParams,
};
pub use harness::{
    all_passed, convergence_study, format_checks, init_threads, mesh_info, run_config, run_config_steps, state_checks,
    validate_config, Check, ConvergenceRow, ConvergenceTable, RunOutcome,
};
pub use output::{angular_speed, boundary_crest_angle, csv_string, vtk_string, write_csv, write_vtk, CSV_HEADER};
pub use scenario::{build_mesh, setup, Scenario, Setup};
