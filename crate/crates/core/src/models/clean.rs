use super::Reconstructor;
use crate::error::{CoreError, Result};
use crate::interferometry::{grid_to_image, grid_visibility, spectrum, DftMethod, Image, VisibilityGrid, VisibilitySet};

#[derive(Debug, Clone, PartialEq)]
pub struct CleanConfig {
    pub gain: f64,
    pub max_iterations: usize,
    /// Stop once the residual peak drops below this fraction of the initial peak.
    pub threshold_fraction: f64,
    /// Restoring Gaussian sigma in pixels.
    pub restore_beam_sigma: f64,
}

impl Default for CleanConfig {
    fn default() -> Self {
        Self {
            gain: 0.1,
            max_iterations: 500,
            threshold_fraction: 1e-3,
            restore_beam_sigma: 1.5,
        }
    }
}

impl CleanConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(CoreError::invalid("gain", format!("{} outside (0, 1]", self.gain)));
        }
        if self.max_iterations == 0 {
            return Err(CoreError::invalid("max_iterations", "must be > 0"));
        }
        if !(self.threshold_fraction > 0.0 && self.threshold_fraction < 1.0) {
            return Err(CoreError::invalid("threshold_fraction", format!("{} outside (0, 1)", self.threshold_fraction)));
        }
        if !(self.restore_beam_sigma > 0.0 && self.restore_beam_sigma.is_finite()) {
            return Err(CoreError::invalid("restore_beam_sigma", format!("{} must be > 0", self.restore_beam_sigma)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct CleanResult {
    /// Components convolved with the restoring beam plus the rescaled residual.
    pub restored: Image,
    /// Point-component map.
    pub components: Image,
    pub residual: Image,
    pub dirty: Image,
    pub beam: Image,
    /// Residual peak absolute value before each iteration, plus the final one.
    pub peak_history: Vec<f64>,
    /// Residual sum of squares, recorded alongside `peak_history`.
    pub energy_history: Vec<f64>,
    pub iterations: usize,
}

/// Dirty image of unit visibilities on the measured cells: the point spread
/// function of the coverage, peaked at the image center.
pub fn dirty_beam(vis: &VisibilitySet, height: usize, width: usize) -> Result<Image> {
    let g = grid_visibility(vis, height, width)?;
    let ones: Vec<f64> = g.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    let grid = VisibilityGrid::dense(height, width, ones, vec![0.0; height * width])?;
    Ok(grid_to_image(&grid).0)
}

fn restore_kernel(sigma: f64, height: usize, width: usize) -> Image {
    // Gaussian centered on (h/2, w/2), unit sum; applied cyclically
    let mut k = Image::zeros(height, width);
    let inv = 1.0 / (2.0 * sigma * sigma);
    for m in 0..height {
        for l in 0..width {
            let dy = m as f64 - (height / 2) as f64;
            let dx = l as f64 - (width / 2) as f64;
            k.set(m, l, (-(dx * dx + dy * dy) * inv).exp());
        }
    }
    let s = k.sum();
    k.data.iter_mut().for_each(|x| *x /= s);
    k
}

/// Cyclic convolution of `img` with a kernel whose origin sits at the image center.
fn convolve_centered(img: &Image, kernel: &Image) -> Image {
    let (h, w) = img.dims();
    let mut out = Image::zeros(h, w);
    for m in 0..h {
        for l in 0..w {
            let a = img.at(m, l);
            if a == 0.0 {
                continue;
            }
            for km in 0..h {
                for kl in 0..w {
                    let r = (m + km + h - h / 2) % h;
                    let c = (l + kl + w - w / 2) % w;
                    out.data[r * w + c] += a * kernel.at(km, kl);
                }
            }
        }
    }
    out
}

fn peak_abs(img: &Image) -> (usize, f64) {
    img.data
        .iter()
        .enumerate()
        .fold((0, 0.0f64), |(bi, bv), (i, &v)| if v.abs() > bv { (i, v.abs()) } else { (bi, bv) })
}

/// Hogbom CLEAN with full diagnostics.
pub fn clean_detailed(vis: &VisibilitySet, height: usize, width: usize, cfg: &CleanConfig) -> Result<CleanResult> {
    cfg.validate()?;
    if vis.is_empty() {
        return Err(CoreError::Empty("visibility set"));
    }
    let grid = grid_visibility(vis, height, width)?;
    let dirty = grid_to_image(&grid).0;
    let beam = dirty_beam(vis, height, width)?;
    let (cy, cx) = (height / 2, width / 2);
    let beam_peak = beam.at(cy, cx);

    let mut residual = dirty.clone();
    let mut components = Image::zeros(height, width);
    let (_, initial) = peak_abs(&residual);
    let energy = |r: &Image| r.data.iter().map(|x| x * x).sum::<f64>();
    let mut history = vec![initial];
    let mut energies = vec![energy(&residual)];
    let mut iterations = 0;
    if initial > 0.0 && beam_peak > 0.0 {
        let stop = cfg.threshold_fraction * initial;
        while iterations < cfg.max_iterations {
            let (idx, p) = peak_abs(&residual);
            if p < stop {
                break;
            }
            let (pm, pl) = (idx / width, idx % width);
            let amp = cfg.gain * residual.data[idx] / beam_peak;
            components.data[idx] += amp;
            for m in 0..height {
                let bm = (m + height + cy - pm) % height;
                for l in 0..width {
                    let bl = (l + width + cx - pl) % width;
                    residual.data[m * width + l] -= amp * beam.at(bm, bl);
                }
            }
            iterations += 1;
            let (_, p) = peak_abs(&residual);
            if !p.is_finite() {
                return Err(CoreError::NonFinite("CLEAN residual".into()));
            }
            history.push(p);
            energies.push(energy(&residual));
        }
    }

    let kernel = restore_kernel(cfg.restore_beam_sigma, height, width);
    let mut restored = convolve_centered(&components, &kernel);
    for (r, x) in restored.data.iter_mut().zip(&residual.data) {
        *r += x;
    }
    Ok(CleanResult {
        restored,
        components,
        residual,
        dirty,
        beam,
        peak_history: history,
        energy_history: energies,
        iterations,
    })
}

/// Restored CLEAN image for a square grid of side `size`.
pub fn clean_deconvolve(vis: &VisibilitySet, size: usize, cfg: &CleanConfig) -> Result<Image> {
    Ok(clean_detailed(vis, size, size, cfg)?.restored)
}

/// CLEAN as a [`Reconstructor`]: the restored image's spectrum.
#[derive(Debug, Clone)]
pub struct CleanReconstructor {
    pub size: usize,
    pub config: CleanConfig,
}

impl Reconstructor for CleanReconstructor {
    fn grid_shape(&self) -> (usize, usize) {
        (self.size, self.size)
    }

    fn reconstruct(&self, vis: &VisibilitySet) -> Result<VisibilityGrid> {
        let img = clean_deconvolve(vis, self.size, &self.config)?;
        let (re, im) = spectrum(&img, DftMethod::Direct);
        VisibilityGrid::dense(self.size, self.size, re, im)
    }
}
