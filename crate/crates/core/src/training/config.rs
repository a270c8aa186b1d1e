use std::fmt;
use std::str::FromStr;

use crate::augmentation::{AugmentationConfig, CorruptionConfig};
use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrainMode {
    /// `L_sup` on raw measurements.
    Supervised,
    /// `L_sup` with label-variant then label-invariant augmentation.
    SupervisedAug,
    /// Agreement between two independent corruptions of unlabeled data.
    SelfSupervised,
    /// Augmented `L_sup + lambda * L_cons`.
    Visrec,
    /// Unaugmented `L_sup + lambda * L_cons`.
    VisrecNoSupAug,
}

impl TrainMode {
    pub const ALL: [TrainMode; 5] = [
        TrainMode::Supervised,
        TrainMode::SupervisedAug,
        TrainMode::SelfSupervised,
        TrainMode::Visrec,
        TrainMode::VisrecNoSupAug,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TrainMode::Supervised => "supervised",
            TrainMode::SupervisedAug => "supervised_aug",
            TrainMode::SelfSupervised => "self_supervised",
            TrainMode::Visrec => "visrec",
            TrainMode::VisrecNoSupAug => "visrec_no_sup_aug",
        }
    }

    pub fn uses_labeled(&self) -> bool {
        !matches!(self, TrainMode::SelfSupervised)
    }

    pub fn uses_unlabeled(&self) -> bool {
        matches!(self, TrainMode::SelfSupervised | TrainMode::Visrec | TrainMode::VisrecNoSupAug)
    }

    pub fn augments_supervised(&self) -> bool {
        matches!(self, TrainMode::SupervisedAug | TrainMode::Visrec)
    }
}

impl fmt::Display for TrainMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TrainMode {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| CoreError::invalid("training mode", format!("unknown mode {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub mode: TrainMode,
    /// Consistency weight; applied once, in `L_sup + lambda * L_cons`.
    pub lambda: f64,
    pub batch_size_sup: usize,
    pub batch_size_unsup: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub aug: AugmentationConfig,
    pub corr: CorruptionConfig,
    pub rng_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mode: TrainMode::Visrec,
            lambda: 0.1,
            batch_size_sup: 16,
            batch_size_unsup: 16,
            epochs: 100,
            learning_rate: 1e-3,
            aug: AugmentationConfig::default(),
            corr: CorruptionConfig::default(),
            rng_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CoreError::invalid("lambda", format!("{} must be >= 0", self.lambda)));
        }
        if self.batch_size_sup == 0 || self.batch_size_unsup == 0 {
            return Err(CoreError::invalid("batch size", "must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(CoreError::invalid("epochs", "must be >= 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(CoreError::invalid("learning_rate", format!("{} must be > 0", self.learning_rate)));
        }
        self.aug.validate()?;
        self.corr.validate()
    }
}
