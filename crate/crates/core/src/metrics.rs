//! Image quality metrics: log frequency distance, PSNR and SSIM.

use crate::error::{CoreError, Result};
use crate::interferometry::{spectrum, DftMethod, Image};

/// PSNR reported for a perfect reconstruction.
pub const PSNR_CAP_DB: f64 = 100.0;
/// Side of the square SSIM window.
pub const SSIM_WINDOW: usize = 7;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub lfd: Option<f64>,
    pub psnr_db: f64,
    pub ssim: f64,
}

fn same_shape(a: &Image, b: &Image) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(CoreError::ShapeMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// `ln(1 + mean |F(reference) - F(candidate)|^2)` over all grid frequencies.
pub fn lfd(reference: &Image, candidate: &Image) -> Result<f64> {
    same_shape(reference, candidate)?;
    let (ar, ai) = spectrum(reference, DftMethod::Direct);
    let (br, bi) = spectrum(candidate, DftMethod::Direct);
    let n = (reference.height * reference.width) as f64;
    let total: f64 = ar
        .iter()
        .zip(&br)
        .zip(ai.iter().zip(&bi))
        .map(|((a, b), (c, d))| (a - b).powi(2) + (c - d).powi(2))
        .sum();
    Ok((total / n).ln_1p())
}

/// `10 log10(peak^2 / mse)` with `peak = max(reference)`, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(reference: &Image, candidate: &Image) -> Result<f64> {
    same_shape(reference, candidate)?;
    let peak = reference.max();
    if !(peak > 0.0) {
        return Err(CoreError::invalid("psnr reference", format!("peak {peak} must be > 0")));
    }
    let mse = reference
        .data
        .iter()
        .zip(&candidate.data)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        / reference.data.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Mean SSIM over all fully contained 7x7 windows, data range taken from the
/// reference.
pub fn ssim(reference: &Image, candidate: &Image) -> Result<f64> {
    ssim_with_range(reference, candidate, reference.max() - reference.min())
}

/// Summed-area table with a zero first row and column.
fn integral(h: usize, w: usize, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut t = vec![0.0; (h + 1) * (w + 1)];
    for r in 0..h {
        let mut row = 0.0;
        for c in 0..w {
            row += f(r * w + c);
            t[(r + 1) * (w + 1) + c + 1] = t[r * (w + 1) + c + 1] + row;
        }
    }
    t
}

/// SSIM with an explicit data range. A zero range falls back to 1 so that
/// constant images still compare equal to themselves.
pub fn ssim_with_range(reference: &Image, candidate: &Image, data_range: f64) -> Result<f64> {
    same_shape(reference, candidate)?;
    let (h, w) = reference.dims();
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(CoreError::invalid(
            "ssim input",
            format!("{h}x{w} image is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window"),
        ));
    }
    let l = if data_range > 0.0 { data_range } else { 1.0 };
    let c1 = (K1 * l).powi(2);
    let c2 = (K2 * l).powi(2);
    let x = &reference.data;
    let y = &candidate.data;
    // the summed-area tables can leave a few ulps of error on identical inputs
    if x == y {
        return Ok(1.0);
    }
    let sx = integral(h, w, |i| x[i]);
    let sy = integral(h, w, |i| y[i]);
    let sxx = integral(h, w, |i| x[i] * x[i]);
    let syy = integral(h, w, |i| y[i] * y[i]);
    let sxy = integral(h, w, |i| x[i] * y[i]);

    let k = SSIM_WINDOW;
    let np = (k * k) as f64;
    let cov_norm = np / (np - 1.0);
    let stride = w + 1;
    let window = |t: &[f64], r: usize, c: usize| {
        (t[(r + k) * stride + c + k] - t[r * stride + c + k] - t[(r + k) * stride + c] + t[r * stride + c]) / np
    };
    let mut total = 0.0;
    for r in 0..=h - k {
        for c in 0..=w - k {
            let mx = window(&sx, r, c);
            let my = window(&sy, r, c);
            let vx = cov_norm * (window(&sxx, r, c) - mx * mx);
            let vy = cov_norm * (window(&syy, r, c) - my * my);
            let vxy = cov_norm * (window(&sxy, r, c) - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * vxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    Ok(total / ((h - k + 1) * (w - k + 1)) as f64)
}

/// All three metrics; LFD can be skipped for speed.
pub fn evaluate(reference: &Image, candidate: &Image, with_lfd: bool) -> Result<MetricReport> {
    Ok(MetricReport {
        lfd: if with_lfd { Some(lfd(reference, candidate)?) } else { None },
        psnr_db: psnr(reference, candidate)?,
        ssim: ssim(reference, candidate)?,
    })
}
