//! Measurement physics: the forward sampling model, gridding, dirty imaging
//! and the dense image/grid transforms.

pub mod io;
mod sampling;
mod transform;
mod types;

pub use sampling::{dirty_image, grid_visibility, nearest_cell, sample_visibility};
pub use transform::{grid_to_image, grid_to_image_with, image_to_grid, image_to_grid_with, spectrum, DftMethod};
pub use types::{within_nyquist, Image, SkyImage, UvCoverage, VisibilityGrid, VisibilitySet};
