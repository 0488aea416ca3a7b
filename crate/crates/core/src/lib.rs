//! Interactive volumetric semantic labelling.
//!
//! A user labels a voxel scene by picking (or touching) surfaces; labels are
//! spread over smooth surfaces, a streaming random forest learns from the
//! labelled voxels online, and its predictions fill in the rest of the scene.
//!
//! The crate is organised by pipeline stage:
//!
//! - [`scene`]: voxel storage, packed labels, the provenance-aware marker, scene files
//! - [`rendering`]: camera rigs, DDA raycasting, overlays and image export
//! - [`features`]: voxel-oriented patch descriptors in CIELab
//! - [`sampling`]: prefix-sum stream compaction and the training/prediction samplers
//! - [`forest`]: the streaming random forest
//! - [`propagation`]: per-frame label spreading
//! - [`interaction`]: picking, selection transformers, undo/redo
//! - [`touch`]: touch detection from depth frames
//! - [`engine`]: modes, the frame loop, sessions and configuration
//! - [`evaluation`]: the Poker benchmark harness
//! - [`presets`]: generated desk and room scenes

pub mod engine;
pub mod evaluation;
pub mod features;
pub mod forest;
pub mod interaction;
pub mod label;
pub mod par;
pub mod presets;
pub mod propagation;
pub mod rendering;
pub mod sampling;
pub mod scene;
pub mod touch;

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;

pub use label::{LabelGroup, LabelId, PackedLabel};
pub use scene::{Voxel, VoxelId, VoxelPos, VoxelScene};
