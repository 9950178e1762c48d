//! Sensing-driven voxel scene features and path-loss ground truth for indoor
//! radio propagation.
//!
//! The pipeline runs in this order:
//!
//! 1. [`scenegen`] builds a labeled indoor scene out of axis-aligned boxes and
//!    renders virtual RGB-D scans of it.
//! 2. [`sensing`] back-projects the depth/semantic frames into a fused,
//!    labeled world-frame point cloud.
//! 3. [`voxelizer`] discretizes the cloud and assembles the four feature
//!    channels (occupancy, reflection dB, transmission dB, Tx distance) plus
//!    the free-space path-loss baseline.
//! 4. [`simulator`] is a deterministic propagation oracle (direct path plus
//!    first-order specular reflections) producing multi-height path-loss maps.
//! 5. [`dataset`] samples transmitters, serializes samples to HDF5, applies
//!    rotational augmentation and builds scene-level splits.
//! 6. [`evaluation`] reconstructs path loss from predicted residuals and
//!    scores it with MAE/RMSE.
//!
//! Material physics lives in [`materials`].

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod geom;
pub mod materials;
pub mod scenegen;
pub mod sensing;
pub mod simulator;
pub mod stack;
pub mod voxelizer;

pub use error::{Error, Result};
pub use geom::{Aabb, Vec3};
