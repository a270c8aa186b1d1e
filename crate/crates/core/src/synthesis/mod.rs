//! Synthetic skies, array coverage and dataset assembly.

mod coverage;
mod dataset;
mod sky;

pub use coverage::{generate_coverage, ArrayConfig, ArrayStyle};
pub use dataset::{
    build_dataset, build_dataset_from_images, decode_dataset, encode_dataset, load_dataset, save_dataset,
    shuffled_indices, Dataset, LabeledExample, UnlabeledExample, DATASET_MAGIC, DATASET_VERSION,
};
pub use sky::{generate_sky, generate_sky_sample, SkyModelConfig, SkySample, SkySource, SourceKind};
