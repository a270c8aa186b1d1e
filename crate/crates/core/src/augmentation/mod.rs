//! Stochastic transforms of visibility data.
//!
//! Label-invariant transforms only ever see the measurement, so ground truth
//! is untouched by construction. Label-variant transforms act on matched
//! (measurement, image) pairs. The corruption model reuses the label-invariant
//! building blocks.

mod config;
mod label_variant;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};

pub use config::{AugmentationConfig, CorruptionConfig, Toggle};
pub use label_variant::{aug_label_variant, transform_image, transform_visibilities, LabelVariant};

use crate::error::Result;
use crate::interferometry::{SkyImage, VisibilitySet};

/// Keeps shifted coordinates strictly inside `(-n/2, n/2)`.
fn clamp_to_nyquist(x: f64, n: usize) -> f64 {
    let half = n as f64 / 2.0;
    let limit = half - 1e-9 * half.max(1.0);
    x.clamp(-limit, limit)
}

fn gaussian(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma).expect("sigma validated as >= 0")
}

/// Gaussian jitter on every coordinate, clamped to the grid's Nyquist bound.
pub fn aug_position_offset<R: Rng>(vis: &VisibilitySet, sigma_pos: f64, grid: (usize, usize), rng: &mut R) -> VisibilitySet {
    if sigma_pos == 0.0 {
        return vis.clone();
    }
    let (h, w) = grid;
    let normal = gaussian(sigma_pos);
    let mut out = vis.clone();
    for i in 0..out.len() {
        out.u[i] = clamp_to_nyquist(out.u[i] + normal.sample(rng), w);
        out.v[i] = clamp_to_nyquist(out.v[i] + normal.sample(rng), h);
    }
    out
}

/// Complex Gaussian noise, each component `N(0, sigma_vis)`.
pub fn aug_visibility_noise<R: Rng>(vis: &VisibilitySet, sigma_vis: f64, rng: &mut R) -> VisibilitySet {
    if sigma_vis == 0.0 {
        return vis.clone();
    }
    let normal = gaussian(sigma_vis);
    let mut out = vis.clone();
    for i in 0..out.len() {
        out.re[i] += normal.sample(rng);
        out.im[i] += normal.sample(rng);
    }
    out
}

/// One uniform offset in `[-max_offset, max_offset]^2` applied to every sample.
pub fn aug_global_offset<R: Rng>(vis: &VisibilitySet, max_offset: f64, grid: (usize, usize), rng: &mut R) -> VisibilitySet {
    if max_offset == 0.0 {
        return vis.clone();
    }
    let (h, w) = grid;
    let dist = Uniform::new_inclusive(-max_offset, max_offset);
    let du = dist.sample(rng);
    let dv = dist.sample(rng);
    let mut out = vis.clone();
    for i in 0..out.len() {
        out.u[i] = clamp_to_nyquist(out.u[i] + du, w);
        out.v[i] = clamp_to_nyquist(out.v[i] + dv, h);
    }
    out
}

/// Removes `floor(drop_fraction * M)` uniformly chosen samples; survivors keep
/// their relative order.
pub fn aug_random_crop<R: Rng>(vis: &VisibilitySet, drop_fraction: f64, rng: &mut R) -> VisibilitySet {
    let m = vis.len();
    let k = (drop_fraction * m as f64).floor() as usize;
    if k == 0 {
        return vis.clone();
    }
    let mut dropped = vec![false; m];
    for i in index::sample(rng, m, k.min(m)) {
        dropped[i] = true;
    }
    vis.filter_indices(|i| !dropped[i])
}

/// Keeps samples with `d_min <= sqrt(u^2 + v^2) <= d_max`.
pub fn aug_frequency_band(vis: &VisibilitySet, d_min: f64, d_max: f64) -> VisibilitySet {
    vis.filter_indices(|i| {
        let r = vis.u[i].hypot(vis.v[i]);
        d_min <= r && r <= d_max
    })
}

/// Draws whether a transform fires. The draw happens even for disabled
/// transforms so that toggling one never shifts the random stream of the rest.
fn fires<R: Rng>(t: &Toggle, rng: &mut R) -> bool {
    let draw: f64 = rng.gen();
    t.enabled && draw < t.probability
}

/// Label-invariant composition, applied in declaration order: position
/// offset, visibility noise, global offset, random crop, frequency band.
pub fn compose_inv<R: Rng>(vis: &VisibilitySet, cfg: &AugmentationConfig, grid: (usize, usize), rng: &mut R) -> VisibilitySet {
    let mut out = vis.clone();
    if fires(&cfg.position_offset, rng) {
        out = aug_position_offset(&out, cfg.sigma_pos, grid, rng);
    }
    if fires(&cfg.visibility_noise, rng) {
        out = aug_visibility_noise(&out, cfg.sigma_vis, rng);
    }
    if fires(&cfg.global_offset, rng) {
        out = aug_global_offset(&out, cfg.global_offset_max, grid, rng);
    }
    if fires(&cfg.random_crop, rng) {
        let f = if cfg.crop_fraction_max > 0.0 {
            rng.gen_range(0.0..=cfg.crop_fraction_max)
        } else {
            0.0
        };
        out = aug_random_crop(&out, f, rng);
    }
    if fires(&cfg.frequency_band, rng) {
        out = aug_frequency_band(&out, cfg.band_d_min, cfg.band_d_max);
    }
    out
}

/// Label-variant composition in declaration order: transpose, reflect_u,
/// reflect_v, central symmetry.
pub fn compose_var<R: Rng>(
    vis: &VisibilitySet,
    image: &SkyImage,
    cfg: &AugmentationConfig,
    rng: &mut R,
) -> Result<(VisibilitySet, SkyImage)> {
    let mut v = vis.clone();
    let mut x = image.clone();
    let steps = [
        (&cfg.transpose, LabelVariant::Transpose),
        (&cfg.reflect_u, LabelVariant::ReflectU),
        (&cfg.reflect_v, LabelVariant::ReflectV),
        (&cfg.central_symmetry, LabelVariant::CentralSymmetry),
    ];
    for (toggle, kind) in steps {
        if fires(toggle, rng) {
            (v, x) = aug_label_variant(&v, &x, kind)?;
        }
    }
    Ok((v, x))
}

/// Corruption model: missing data, antenna offset, observation noise, each
/// applied with its own probability.
pub fn corrupt<R: Rng>(vis: &VisibilitySet, cfg: &CorruptionConfig, grid: (usize, usize), rng: &mut R) -> VisibilitySet {
    let mut out = vis.clone();
    let draw: f64 = rng.gen();
    if draw < cfg.p_drop {
        out = aug_random_crop(&out, cfg.drop_fraction, rng);
    }
    let draw: f64 = rng.gen();
    if draw < cfg.p_offset {
        out = aug_position_offset(&out, cfg.antenna_offset_sigma, grid, rng);
    }
    let draw: f64 = rng.gen();
    if draw < cfg.p_noise {
        out = aug_visibility_noise(&out, cfg.noise_sigma, rng);
    }
    out
}
