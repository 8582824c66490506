//! Camera-pose memory retrieval for long, interactively steered frame
//! sequences.
//!
//! Given the pose history of everything generated so far, [retrieval]
//! picks the few past frames whose view overlaps a new target pose.
//! [`world`] supplies a raycast 2D world whose visible-landmark sets serve
//! as ground truth, and `eval` measures retrieval strategies against it.

pub mod conditioning;
pub mod eval;
pub mod geometry;
pub mod json;
pub mod retrieval;
pub mod rng;
pub mod store;
pub mod trajectory;
pub mod world;

pub use geometry::{CameraPose, OverlapConfig, OverlapVerdict, Vec2};
