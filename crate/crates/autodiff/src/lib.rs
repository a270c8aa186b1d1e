//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Graph`] is an append-only arena of [`Tensor`]s. Operations read earlier
//! nodes and push their result, so the arena is always topologically sorted and
//! [`Graph::backward`] is a single reverse sweep. Parameters live outside the
//! graph between steps; [`Graph::adopt`] moves them in for one forward/backward
//! pass and [`Graph::release`] hands them back with gradients attached, ready for
//! [`adam_step`].

pub mod adam;
pub mod binio;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod tensor;

pub use adam::{adam_step, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, NamedArray};
pub use error::{AutodiffError, Result};
pub use gradcheck::{finite_diff_check, max_relative_error, numeric_gradient};
pub use graph::{Graph, OpKind};
pub use tensor::{NodeId, OpRecord, Tensor};
