//! Segmentation, artefact removal and petrophysics for reconstructed X-ray
//! micro-tomography volumes of geomaterials.

pub mod clustering;
pub mod ede_removal;
pub mod error;
pub mod filters;
pub mod petrophysics;
pub mod progress;
pub mod stats;
pub mod supervised;
pub mod synthetic;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{BitDepth, Dims, LabelVolume, Roi, VoxelVolume};
