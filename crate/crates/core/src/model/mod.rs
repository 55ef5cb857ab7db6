//! Network representation, focal points, closed-form flow and local transition maps.

mod builder;
mod dynamics;
mod network;
mod validate;

use thiserror::Error;

pub use builder::NetworkBuilder;
pub(crate) use dynamics::check_tie;
pub use dynamics::{
    exit_directions, exit_event, flow_at, focal_point, transition_map, ExitDirections, ExitEvent, LocalDynamics,
    TIE_REL_EPS,
};
pub use network::{
    BoxIndex, BoxIter, Network, ProductionTerm, Sign, StepFactor, StepPolynomial, Variable, THRESHOLD_EPS,
};
pub use validate::{
    default_inputs, unstable_walls_under, validate_network, FocalOnThreshold, SelfDependence, UnstableWall,
    ValidityReport,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("malformed network: {0}")]
    Malformed(String),
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("cannot parse box label `{0}`")]
    BadBoxLabel(String),
    #[error("box {0} is outside the box lattice")]
    BoxOutOfRange(BoxIndex),
    #[error("input {u} is outside [0, {bound}]")]
    InputOutOfRange { u: f64, bound: f64 },
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {var} = {value} is outside the variable range")]
    OutOfRange { var: usize, value: f64 },
    #[error("coordinate {var} = {value} is outside box {box_index}")]
    OutsideBox { box_index: BoxIndex, var: usize, value: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("focal coordinate {var} of box {box_index} lies on a threshold ({value})")]
    FocalOnThreshold { box_index: BoxIndex, var: usize, value: f64 },
    #[error("box {0} has no escaping direction")]
    NoEscape(BoxIndex),
    #[error("point already lies on the exit wall of direction {var} in box {box_index}")]
    OnExitWall { box_index: BoxIndex, var: usize },
    #[error("directions {directions:?} are reached simultaneously from box {box_index} (tau = {tau})")]
    Tie { box_index: BoxIndex, directions: (usize, usize), tau: f64 },
}
