//! Analysis and qualitative control of piecewise-affine gene network models.
//!
//! Inside each regular domain (box) of the threshold lattice the dynamics
//! `dx/dt = κ - Γ x` are affine, so trajectories are computed exactly from
//! wall to wall. On top of that the crate builds transition graphs,
//! classifies cyclic box sequences through their first-return maps, and
//! synthesizes box-wise constant inputs that realize a prescribed graph.

// `!(a < b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod cycle;
pub mod graph;
pub mod io;
pub mod model;
pub mod models;
pub mod sim;

pub use model::{BoxIndex, ModelError, Network, NetworkBuilder, Sign};
