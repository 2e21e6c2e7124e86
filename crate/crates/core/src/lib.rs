//! Deterministic generation of paired trajectory videos (A, B) where one
//! object follows the same simulated motion offset by a displacement, plus
//! the evaluation metrics used on such pairs.

// `!(x > 0.0)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod geometry;
pub mod camera;
pub mod physics;
pub mod placement;
pub mod scenemod;
pub mod render;
pub mod pipeline;
pub mod metrics;
