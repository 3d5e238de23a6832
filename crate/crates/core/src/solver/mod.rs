//! Periodic conductivity cell problem on a rotated staggered voxel grid.

mod cg;
mod dense;
mod fft;
mod transform;

pub use cg::{
    apparent_conductivity, solve_corrector, ApparentResult, CellSolver, CorrectorSolution,
    LoadDiagnostics, SolverConfig,
};
pub use dense::{dense_oracle, DENSE_MAX_N};
pub use fft::Fft3;
pub use transform::transform_field;
