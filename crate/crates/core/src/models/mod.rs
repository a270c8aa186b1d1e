//! Reconstructors: sparse visibilities in, dense visibility grid out.

mod clean;
mod mlp;

pub use clean::{clean_deconvolve, clean_detailed, dirty_beam, CleanConfig, CleanReconstructor, CleanResult};
pub use mlp::{GridMlpConfig, GridMlpModel};

use visrec_autodiff::{Graph, NodeId, Tensor};

use crate::error::{CoreError, Result};
use crate::interferometry::{grid_to_image, grid_visibility, Image, VisibilityGrid, VisibilitySet};

pub trait Reconstructor {
    /// `(height, width)` of the produced grid.
    fn grid_shape(&self) -> (usize, usize);

    /// Dense, fully masked grid estimate for one measurement.
    fn reconstruct(&self, vis: &VisibilitySet) -> Result<VisibilityGrid>;
}

/// A reconstructor with learnable parameters and a differentiable batched
/// forward pass over encoded measurements.
pub trait Trainable: Reconstructor {
    fn parameters(&self) -> &[Tensor];

    fn parameters_mut(&mut self) -> &mut [Tensor];

    /// Flattened network input for one measurement.
    fn encode(&self, vis: &VisibilitySet) -> Result<Vec<f64>>;

    /// Length of [`Trainable::encode`] output and of one output row.
    fn feature_len(&self) -> usize;

    /// Builds the forward pass for a `[n, feature_len]` input node. `params`
    /// are the graph ids of [`Trainable::parameters`], in order.
    fn forward_graph(&self, g: &mut Graph, params: &[NodeId], input: NodeId) -> Result<NodeId>;

    /// Same computation as [`Trainable::forward_graph`] without recording a
    /// graph; results are bit-identical for the same input batch.
    fn forward_plain(&self, input: &[f64], rows: usize) -> Result<Vec<f64>>;

    /// Output row layout for a dense grid (used for training targets).
    fn target_row(&self, grid: &VisibilityGrid) -> Result<Vec<f64>>;
}

/// Grid values as one `[re plane, im plane]` row.
pub fn grid_row(grid: &VisibilityGrid) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * grid.re.len());
    row.extend_from_slice(&grid.re);
    row.extend_from_slice(&grid.im);
    row
}

/// Inverse of [`grid_row`].
pub fn row_to_grid(row: &[f64], height: usize, width: usize) -> Result<VisibilityGrid> {
    let n = height * width;
    if row.len() != 2 * n {
        return Err(CoreError::invalid("grid row", format!("{} values for a {height}x{width} grid", row.len())));
    }
    VisibilityGrid::dense(height, width, row[..n].to_vec(), row[n..].to_vec())
}

/// Image-domain estimate: the raw inverse of the reconstructed grid, and the
/// same image clipped to nonnegative values for metrics.
pub struct ReconstructedImage {
    pub clipped: Image,
    pub raw: Image,
}

pub fn reconstruct_to_image(model: &dyn Reconstructor, vis: &VisibilitySet) -> Result<ReconstructedImage> {
    let grid = model.reconstruct(vis)?;
    let (raw, _) = grid_to_image(&grid);
    Ok(ReconstructedImage {
        clipped: raw.clipped_nonnegative(),
        raw,
    })
}

/// Naive imaging: the gridded samples with unmeasured cells left at zero.
#[derive(Debug, Clone, Copy)]
pub struct DirtyImager {
    pub height: usize,
    pub width: usize,
}

impl Reconstructor for DirtyImager {
    fn grid_shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn reconstruct(&self, vis: &VisibilitySet) -> Result<VisibilityGrid> {
        if vis.is_empty() {
            return Err(CoreError::Empty("visibility set"));
        }
        let g = grid_visibility(vis, self.height, self.width)?;
        VisibilityGrid::dense(self.height, self.width, g.re, g.im)
    }
}
