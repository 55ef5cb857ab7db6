//! Cyclic box sequences: alignment, the center point `θ^C`, first-return
//! maps and their differential, limit-cycle classification, negative
//! feedback loop recognition and parallel-wall crossing tests.

mod classify;
mod crossing;
mod interaction;
mod return_map;
mod sequence;

use thiserror::Error;

use crate::graph::GraphError;
use crate::model::{BoxIndex, ModelError};

pub use classify::{classify_cycle, start_spread, CycleCase, CycleVerdict, StartSpread, LAMBDA_BOUNDARY_EPS};
pub use crossing::{check_fast_controller, crossing_direction, traverse_times, Traverse};
pub use interaction::{interaction_graph, is_negative_feedback_loop, Interaction, InteractionGraph};
pub use return_map::{
    distance, find_periodic_point, lap, power_iteration_radius, return_map, return_map_jacobian, return_map_timed,
    spectral_radius, FixedPointSearch, Lap, DENSE_EIGEN_MAX_DIM, FIXED_POINT_MAX_ITER, FIXED_POINT_TOL,
    POWER_ITERATIONS,
};
pub use sequence::{check_alignment, cycle_point, Alignment, CycleSequence, Misalignment, Wall};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CycleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("a cycle needs at least two boxes")]
    TooShort,
    #[error("boxes {0} and {1} are not adjacent")]
    NotAdjacent(BoxIndex, BoxIndex),
    #[error("box {0} appears twice in the cycle")]
    Repeated(BoxIndex),
    #[error("not every variable switches along the cycle")]
    NotAllSwitching,
    #[error("point {0:?} is not on the return wall")]
    NotOnWall(Vec<f64>),
    #[error("trajectory left the cycle at step {step}: expected {expected}, reached {}", .reached.as_ref().map_or("no exit".to_string(), |b| b.to_string()))]
    Deviation { step: usize, expected: BoxIndex, reached: Option<BoxIndex> },
    #[error("singular configuration at step {step}: coordinate {var} at its focal value")]
    Singular { step: usize, var: usize },
    #[error("fixed-point iteration stopped after {iterations} steps (last step {last_step:e})")]
    NoConvergence { iterations: usize, last_step: f64 },
    #[error("{0}")]
    Precondition(String),
}
