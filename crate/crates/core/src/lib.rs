//! Spatial supervision toolkit: 9-DoF box geometry, field-of-view unification,
//! box matching metrics and RL rewards, depth-based visibility, templated
//! sample generation and scene-pack I/O.

pub mod config;
pub mod dataset;
pub mod fov;
pub mod generate;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod visibility;
