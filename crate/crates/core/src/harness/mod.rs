//! Scenario configuration, experiment drivers and result files.

pub mod experiment;
pub mod pipeline;
pub mod results;
pub mod scenario;
pub mod solution_io;

pub use experiment::{run_experiment, ExperimentKind, ExperimentSpec};
pub use pipeline::{solve_scenario, PipelineSettings};
pub use results::{emit_results, Format, Metadata, ResultRow, ResultTable};
pub use scenario::{load_scenario, Scenario, ScenarioConfig};
pub use solution_io::{load_solution, save_solution, SolutionFile};
