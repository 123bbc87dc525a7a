//! Whole-body LiDAR object augmentation.
//!
//! Objects are extracted from labeled frames into a ground-truth database,
//! completed into whole-body objects by stochastic per-partition
//! complementing, dropped at random poses, and then thinned with hidden point
//! removal so that self- and inter-object occlusion match the new viewpoint.

pub mod baseline;
pub mod construction;
pub mod database;
pub mod geometry;
pub mod hpr;
pub mod io;
pub mod oracle;
pub mod pipeline;
pub mod placement;
pub mod seeding;
pub mod synthetic;

pub use geometry::{BoundingBox, LabeledObject, ObjectClass, Point, Pose};
pub use io::Frame;
