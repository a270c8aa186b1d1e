pub mod augmentation;
pub mod error;
pub mod interferometry;
pub mod metrics;
pub mod models;
pub mod rng;
pub mod synthesis;
pub mod training;

pub use error::{CoreError, Result};
