use std::f64::consts::PI;

use rand::Rng;

use crate::error::{CoreError, Result};
use crate::interferometry::{Image, SkyImage};

#[derive(Debug, Clone, PartialEq)]
pub struct SkyModelConfig {
    /// Side length in pixels (power of two).
    pub image_size: usize,
    /// Inclusive range for the number of sources.
    pub n_sources: (usize, usize),
    /// Probability that a source is a single-pixel point rather than a blob.
    pub point_fraction: f64,
    pub amplitude_range: (f64, f64),
    /// Gaussian sigma range in pixels.
    pub sigma_range: (f64, f64),
    /// Source centers are drawn within this fraction of the half-width
    /// around the image center.
    pub center_spread: f64,
    pub rng_seed: u64,
}

impl Default for SkyModelConfig {
    fn default() -> Self {
        Self {
            image_size: 32,
            n_sources: (1, 4),
            point_fraction: 0.15,
            amplitude_range: (0.3, 1.0),
            sigma_range: (1.0, 3.0),
            center_spread: 0.5,
            rng_seed: 0,
        }
    }
}

fn check_range(what: &'static str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(CoreError::invalid(what, format!("[{lo}, {hi}] must be positive and nonempty")));
    }
    Ok(())
}

impl SkyModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.image_size < 2 || !self.image_size.is_power_of_two() {
            return Err(CoreError::invalid("image_size", format!("{} is not a power of two >= 2", self.image_size)));
        }
        let (a, b) = self.n_sources;
        if a == 0 || a > b {
            return Err(CoreError::invalid("n_sources", format!("[{a}, {b}] must be positive and nonempty")));
        }
        check_range("amplitude_range", self.amplitude_range)?;
        check_range("sigma_range", self.sigma_range)?;
        if !(0.0..=1.0).contains(&self.point_fraction) {
            return Err(CoreError::invalid("point_fraction", format!("{} outside [0, 1]", self.point_fraction)));
        }
        if !(0.0..=1.0).contains(&self.center_spread) {
            return Err(CoreError::invalid("center_spread", format!("{} outside [0, 1]", self.center_spread)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    Point,
    Gaussian { sigma: f64 },
}

/// One component before peak normalization. Centers are in pixel units
/// (column, row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkySource {
    pub kind: SourceKind,
    pub amplitude: f64,
    pub center: (f64, f64),
}

impl SkySource {
    /// Integrated flux on an unbounded plane.
    pub fn flux(&self) -> f64 {
        match self.kind {
            SourceKind::Point => self.amplitude,
            SourceKind::Gaussian { sigma } => self.amplitude * 2.0 * PI * sigma * sigma,
        }
    }
}

/// A generated sky plus the components that produced it.
#[derive(Debug, Clone)]
pub struct SkySample {
    pub image: SkyImage,
    pub sources: Vec<SkySource>,
    /// Factor applied to the raw component sum to bring the peak to 1.
    pub normalization: f64,
}

pub fn generate_sky<R: Rng>(cfg: &SkyModelConfig, rng: &mut R) -> Result<SkyImage> {
    Ok(generate_sky_sample(cfg, rng)?.image)
}

pub fn generate_sky_sample<R: Rng>(cfg: &SkyModelConfig, rng: &mut R) -> Result<SkySample> {
    cfg.validate()?;
    let n = cfg.image_size;
    let half = n as f64 / 2.0;
    let spread = cfg.center_spread * half;
    let count = rng.gen_range(cfg.n_sources.0..=cfg.n_sources.1);
    let mut sources = Vec::with_capacity(count);
    for _ in 0..count {
        let point = rng.gen::<f64>() < cfg.point_fraction;
        let amplitude = rng.gen_range(cfg.amplitude_range.0..=cfg.amplitude_range.1);
        let cx = half + rng.gen_range(-spread..=spread);
        let cy = half + rng.gen_range(-spread..=spread);
        let source = if point {
            let clamp = |c: f64| c.round().clamp(0.0, (n - 1) as f64);
            SkySource {
                kind: SourceKind::Point,
                amplitude,
                center: (clamp(cx), clamp(cy)),
            }
        } else {
            SkySource {
                kind: SourceKind::Gaussian {
                    sigma: rng.gen_range(cfg.sigma_range.0..=cfg.sigma_range.1),
                },
                amplitude,
                center: (cx, cy),
            }
        };
        sources.push(source);
    }

    let mut img = Image::zeros(n, n);
    for s in &sources {
        match s.kind {
            SourceKind::Point => {
                let (c, r) = (s.center.0 as usize, s.center.1 as usize);
                img.set(r, c, img.at(r, c) + s.amplitude);
            }
            SourceKind::Gaussian { sigma } => {
                let inv = 1.0 / (2.0 * sigma * sigma);
                let gx: Vec<f64> = (0..n).map(|l| (-(l as f64 - s.center.0).powi(2) * inv).exp()).collect();
                let gy: Vec<f64> = (0..n).map(|m| (-(m as f64 - s.center.1).powi(2) * inv).exp()).collect();
                for (m, y) in gy.iter().enumerate() {
                    for (l, x) in gx.iter().enumerate() {
                        img.data[m * n + l] += s.amplitude * x * y;
                    }
                }
            }
        }
    }
    let peak = img.max();
    let normalization = 1.0 / peak;
    img.data.iter_mut().for_each(|x| *x /= peak);
    Ok(SkySample {
        image: SkyImage::from_image(img)?,
        sources,
        normalization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn single_point_source() {
        let cfg = SkyModelConfig {
            n_sources: (1, 1),
            point_fraction: 1.0,
            ..SkyModelConfig::default()
        };
        let sky = generate_sky(&cfg, &mut rng_from_seed(1)).unwrap();
        assert_eq!(sky.intensity().iter().filter(|&&x| x > 0.0).count(), 1);
        assert_eq!(sky.image().max(), 1.0);
    }

    #[test]
    fn seeded_and_peak_normalized() {
        let cfg = SkyModelConfig::default();
        let a = generate_sky(&cfg, &mut rng_from_seed(4)).unwrap();
        let b = generate_sky(&cfg, &mut rng_from_seed(4)).unwrap();
        assert_eq!(a, b);
        assert!((a.image().max() - 1.0).abs() < 1e-15);
        assert!(a.image().min() >= 0.0);
    }

    #[test]
    fn bad_configs_rejected() {
        let mut cfg = SkyModelConfig::default();
        cfg.image_size = 24;
        assert!(cfg.validate().is_err());
        let mut cfg = SkyModelConfig::default();
        cfg.sigma_range = (2.0, 1.0);
        assert!(cfg.validate().is_err());
        let mut cfg = SkyModelConfig::default();
        cfg.n_sources = (0, 2);
        assert!(cfg.validate().is_err());
    }
}
