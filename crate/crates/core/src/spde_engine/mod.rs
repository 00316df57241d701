//! Explicit solvers for the two regimes and the tangent equations.

mod coeff;
mod engine;
mod path;
mod scheme;

pub use coeff::{CoeffKind, CoefficientSpec, CubicSpline};
pub use engine::{trapezoid_weights, Engine, EngineBuffers, RecordSpec, ReplicaOutcome, Window, DIVERGENCE_LIMIT};
pub use path::{
    path_window, solve_case1, solve_case2_pam, solve_case2_pam_with, spatial_average, tangent_projection, CaseTag,
    FieldPath, TangentState,
};
pub use scheme::{FdInit, FdScheme, RatioFrameConfig, RatioFrameScheme, RfStep, Scheme, Scratch};
