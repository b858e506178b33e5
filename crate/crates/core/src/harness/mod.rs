//! Experiment harness: instances, reference solvers, configuration files
//! and the runner that ties them to the engine and baselines.

pub mod config;
pub mod experiment;
pub mod facility;
pub mod oracle;
pub mod presets;

pub use facility::{default_instance, generate_facility_location, Ball, FacilityLocation, GeometryBounds, Rect};
pub use oracle::{grid_oracle, projected_subgradient_oracle, quadratic_oracle, OracleMethod, OracleResult};
pub use config::ExperimentConfig;
pub use experiment::{compare_table, run_experiment, validate, write_outputs, Outcome, Summary, Validation};
