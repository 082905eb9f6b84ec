//! Piecewise-constant disparity and optical flow estimation.
//!
//! Stereo disparities and flow fields are computed by minimizing a
//! linearized brightness-invariance data term plus a Potts prior that
//! counts jumps between neighboring pixels. The minimization splits the
//! prior into column-wise and row-wise univariate Potts problems, each
//! solved exactly by dynamic programming, coupled through a penalty weight
//! that grows geometrically.
//!
//! Modules, bottom-up:
//!
//! - [`imagecore`]: grids, forward differences, grouped ℓ0, shifted sampling
//! - [`potts1d`]: exact univariate Potts solver and an exhaustive oracle
//! - [`blockmatch`]: NCC block matching initializers and median filtering
//! - [`dataterm`]: linearized data terms around the initializer
//! - [`solver`]: the splitting iterations, energies and trace
//! - [`pipeline`], [`io`], [`flowviz`], [`metrics`]: end-to-end plumbing
//!
//! Loops over pixels, rows and columns use rayon when the `parallel`
//! feature is on (the default); [`Execution::Sequential`] forces the plain
//! loops. Results are bit-identical either way.

pub mod blockmatch;
pub mod dataterm;
pub mod error;
mod exec;
pub mod flowviz;
pub mod imagecore;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod potts1d;
pub mod solver;

pub use blockmatch::MatchConfig;
pub use dataterm::{LinearizedData, Mode};
pub use error::{Error, Result};
pub use exec::Execution;
pub use imagecore::{GridIndex, Partition, ScalarImage, VectorField};
pub use potts1d::{Segmentation1D, Signal1D};
pub use solver::{IterationTrace, SolverConfig, SolverOutput, SolverState};
