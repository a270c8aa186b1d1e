use crate::error::{CoreError, Result};

/// Enable flag plus application probability of one transform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Toggle {
    pub enabled: bool,
    pub probability: f64,
}

impl Toggle {
    pub const fn on(probability: f64) -> Self {
        Self {
            enabled: true,
            probability,
        }
    }

    pub const fn off() -> Self {
        Self {
            enabled: false,
            probability: 0.0,
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        check_probability(name, self.probability)
    }
}

impl Default for Toggle {
    fn default() -> Self {
        Self::on(0.5)
    }
}

fn check_probability(name: &'static str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(CoreError::invalid(name, format!("probability {p} outside [0, 1]")));
    }
    Ok(())
}

fn check_nonneg(name: &'static str, x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(CoreError::invalid(name, format!("{x} must be >= 0")));
    }
    Ok(())
}

/// Parameters of the supervised-module augmentations.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationConfig {
    pub position_offset: Toggle,
    pub sigma_pos: f64,
    pub visibility_noise: Toggle,
    pub sigma_vis: f64,
    pub global_offset: Toggle,
    pub global_offset_max: f64,
    pub random_crop: Toggle,
    /// Drop fraction is drawn uniformly from `[0, crop_fraction_max]`.
    pub crop_fraction_max: f64,
    pub frequency_band: Toggle,
    pub band_d_min: f64,
    pub band_d_max: f64,
    pub transpose: Toggle,
    pub reflect_u: Toggle,
    pub reflect_v: Toggle,
    pub central_symmetry: Toggle,
    pub rng_seed: u64,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            position_offset: Toggle::default(),
            sigma_pos: 0.1,
            visibility_noise: Toggle::default(),
            sigma_vis: 0.1,
            global_offset: Toggle::default(),
            global_offset_max: 0.25,
            random_crop: Toggle::default(),
            crop_fraction_max: 0.3,
            frequency_band: Toggle::default(),
            band_d_min: 0.0,
            band_d_max: f64::MAX,
            transpose: Toggle::default(),
            reflect_u: Toggle::default(),
            reflect_v: Toggle::default(),
            central_symmetry: Toggle::default(),
            rng_seed: 0,
        }
    }
}

impl AugmentationConfig {
    /// Every transform enabled with probability zero.
    pub fn never() -> Self {
        let mut c = Self::default();
        c.set_all_probabilities(0.0);
        c
    }

    pub fn toggles_mut(&mut self) -> [&mut Toggle; 9] {
        [
            &mut self.position_offset,
            &mut self.visibility_noise,
            &mut self.global_offset,
            &mut self.random_crop,
            &mut self.frequency_band,
            &mut self.transpose,
            &mut self.reflect_u,
            &mut self.reflect_v,
            &mut self.central_symmetry,
        ]
    }

    pub fn set_all_probabilities(&mut self, p: f64) {
        for t in self.toggles_mut() {
            t.probability = p;
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.position_offset.validate("position offset")?;
        self.visibility_noise.validate("visibility noise")?;
        self.global_offset.validate("global offset")?;
        self.random_crop.validate("random crop")?;
        self.frequency_band.validate("frequency band")?;
        self.transpose.validate("transpose")?;
        self.reflect_u.validate("reflect_u")?;
        self.reflect_v.validate("reflect_v")?;
        self.central_symmetry.validate("central symmetry")?;
        check_nonneg("sigma_pos", self.sigma_pos)?;
        check_nonneg("sigma_vis", self.sigma_vis)?;
        check_nonneg("global_offset_max", self.global_offset_max)?;
        check_nonneg("band_d_min", self.band_d_min)?;
        if !(0.0..1.0).contains(&self.crop_fraction_max) {
            return Err(CoreError::invalid(
                "crop_fraction_max",
                format!("{} outside [0, 1)", self.crop_fraction_max),
            ));
        }
        if !(self.band_d_min <= self.band_d_max) {
            return Err(CoreError::invalid(
                "frequency band",
                format!("d_min {} > d_max {}", self.band_d_min, self.band_d_max),
            ));
        }
        Ok(())
    }
}

/// Parameters of the unsupervised corruption model.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionConfig {
    pub noise_sigma: f64,
    pub drop_fraction: f64,
    pub antenna_offset_sigma: f64,
    pub p_noise: f64,
    pub p_drop: f64,
    pub p_offset: f64,
    pub rng_seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            noise_sigma: 0.5,
            drop_fraction: 0.3,
            antenna_offset_sigma: 0.1,
            p_noise: 0.5,
            p_drop: 0.5,
            p_offset: 0.5,
            rng_seed: 0,
        }
    }
}

impl CorruptionConfig {
    /// Corruption with all magnitudes zero.
    pub fn identity() -> Self {
        Self {
            noise_sigma: 0.0,
            drop_fraction: 0.0,
            antenna_offset_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_nonneg("noise_sigma", self.noise_sigma)?;
        check_nonneg("antenna_offset_sigma", self.antenna_offset_sigma)?;
        check_probability("p_noise", self.p_noise)?;
        check_probability("p_drop", self.p_drop)?;
        check_probability("p_offset", self.p_offset)?;
        if !(0.0..1.0).contains(&self.drop_fraction) {
            return Err(CoreError::invalid(
                "drop_fraction",
                format!("{} outside [0, 1)", self.drop_fraction),
            ));
        }
        Ok(())
    }
}
