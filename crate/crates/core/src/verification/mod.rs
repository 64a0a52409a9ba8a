//! Manufactured problems, error measures and the study drivers.

mod errors;
mod plot;
mod problems;
mod study;

pub use errors::{error_h1, error_l2, error_report, CipBreakdown, ErrorReport};
pub use plot::{LogLogPlot, Series, SlopeMark};
pub use problems::{
    manufactured, AdvectionField, BoundaryLayer, ConstantField, ExactSolution, InternalLayer,
    ManufacturedProblem, Polynomial, ProblemDefinition, ProblemRegistry, SineField,
};
pub use study::{
    convergence_study, fitted_slope, rates, robustness_sweep, run_single, to_csv, ConvergenceConfig,
    RobustnessConfig, RunResult, StudyRow, CSV_HEADER,
};
