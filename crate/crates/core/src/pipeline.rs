//! End-to-end runs: block matching, linearization, then the splitting
//! solver initialized at the block-matching result.

use crate::blockmatch::{init_disparity, init_flow, MatchConfig};
use crate::dataterm::{build_disparity_data, build_flow_data, LinearizedData};
use crate::error::Result;
use crate::imagecore::{ScalarImage, VectorField};
use crate::solver::{run, SolverConfig, SolverOutput};

#[derive(Debug, Clone)]
pub struct PipelineResult {
    /// Integer initializer from block matching.
    pub init: VectorField,
    pub data: LinearizedData,
    pub solution: SolverOutput,
}

pub fn run_disparity(
    f1: &ScalarImage,
    f2: &ScalarImage,
    matching: &MatchConfig,
    solver: &SolverConfig,
) -> Result<PipelineResult> {
    let init = init_disparity(f1, f2, matching)?;
    let data = build_disparity_data(f1, f2, &init)?;
    let solution = run(&data, &init, solver)?;
    Ok(PipelineResult {
        init,
        data,
        solution,
    })
}

pub fn run_flow(
    f1: &ScalarImage,
    f2: &ScalarImage,
    matching: &MatchConfig,
    solver: &SolverConfig,
) -> Result<PipelineResult> {
    let init = init_flow(f1, f2, matching)?;
    let data = build_flow_data(f1, f2, &init)?;
    let solution = run(&data, &init, solver)?;
    Ok(PipelineResult {
        init,
        data,
        solution,
    })
}
