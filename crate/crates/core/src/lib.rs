//! Base placement optimization for mobile manipulators doing surface coverage work.
//!
//! The pipeline tiles a task surface with scale-like discs ([`sld`]), precomputes a voxel
//! reachability map of the arm ([`reachmap`]), samples and filters candidate base poses
//! ([`placement`]), scores placement sets on coverage, time and manipulability
//! ([`objectives`]), searches the Pareto front with NSGA-II ([`nsga2`]) and finally refines the
//! chosen placements locally ([`finetune`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod finetune;
pub mod kinematics;
pub mod nsga2;
pub mod objectives;
pub mod pipeline;
pub mod placement;
pub mod reachmap;
pub mod scene;
pub mod sld;
pub mod spatial;
pub mod tsp;

pub use error::{Error, Result};
