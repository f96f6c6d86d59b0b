//! Factor graphs over robot and object poses, Levenberg-Marquardt solving
//! and the two-stage mapping pipeline.

pub mod graph;
pub mod pipeline;
pub mod residuals;
pub mod solver;

pub use graph::{sqrt_information, Factor, FactorGraph, VarKey};
pub use pipeline::{refine_with_contacts, run_pipeline, timings_csv, FrameTimings, KeyframeMap, MapObject, PipelineConfig, PipelineError, PipelineOutput, Variant};
pub use solver::{solve, SolveReport, SolverConfig};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OptimizerError {
    #[error("factor references missing variable {0:?}")]
    MissingVariable(VarKey),
    #[error("normal equations are singular beyond damping")]
    SingularSystem,
    #[error("invalid configuration: {0}")]
    Config(String),
}
