use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};

use super::transform::grid_to_image;
use super::types::{Image, SkyImage, UvCoverage, VisibilityGrid, VisibilitySet};
use crate::error::{CoreError, Result};
use crate::rng::rng_from_seed;

/// Forward model: evaluates the sky's Fourier transform at each coverage
/// point and adds complex Gaussian noise (each component `N(0, noise_sigma)`).
pub fn sample_visibility(
    image: &SkyImage,
    coverage: &UvCoverage,
    noise_sigma: f64,
    rng_seed: u64,
) -> Result<VisibilitySet> {
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(CoreError::invalid("noise sigma", format!("{noise_sigma} must be >= 0")));
    }
    let (h, w) = (image.height(), image.width());
    coverage.check_nyquist(h, w)?;

    let n = coverage.len();
    let mut out = VisibilitySet {
        u: Vec::with_capacity(n),
        v: Vec::with_capacity(n),
        re: Vec::with_capacity(n),
        im: Vec::with_capacity(n),
    };
    let x = image.intensity();
    let mut ph_l = vec![(0.0, 0.0); w];
    let mut ph_m = vec![(0.0, 0.0); h];
    for &(u, v) in &coverage.points {
        for (l, p) in ph_l.iter_mut().enumerate() {
            let a = -2.0 * PI * u * (l as f64 - w as f64 / 2.0) / w as f64;
            *p = (a.cos(), a.sin());
        }
        for (m, p) in ph_m.iter_mut().enumerate() {
            let a = -2.0 * PI * v * (m as f64 - h as f64 / 2.0) / h as f64;
            *p = (a.cos(), a.sin());
        }
        let (mut sr, mut si) = (0.0, 0.0);
        for m in 0..h {
            let row = &x[m * w..(m + 1) * w];
            let (mut rr, mut ri) = (0.0, 0.0);
            for (xv, &(c, s)) in row.iter().zip(&ph_l) {
                rr += xv * c;
                ri += xv * s;
            }
            let (c, s) = ph_m[m];
            sr += rr * c - ri * s;
            si += rr * s + ri * c;
        }
        out.u.push(u);
        out.v.push(v);
        out.re.push(sr);
        out.im.push(si);
    }

    if noise_sigma > 0.0 {
        let mut rng = rng_from_seed(rng_seed);
        let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
        for i in 0..n {
            out.re[i] += normal.sample(&mut rng);
            out.im[i] += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// Nearest integer-frequency cell of a coordinate, with `+n/2` folded onto
/// `-n/2` (the two are the same frequency on an `n`-point grid).
pub fn nearest_cell(coord: f64, n: usize) -> i64 {
    let half = (n / 2) as i64;
    let k = coord.round() as i64;
    if k >= half {
        k - n as i64
    } else {
        k
    }
}

/// Nearest-cell gridding with per-cell averaging.
pub fn grid_visibility(vis: &VisibilitySet, height: usize, width: usize) -> Result<VisibilityGrid> {
    vis.check_nyquist(height, width)?;
    let mut g = VisibilityGrid::empty(height, width);
    for i in 0..vis.len() {
        let ku = nearest_cell(vis.u[i], width);
        let kv = nearest_cell(vis.v[i], height);
        let c = g.cell_index(ku, kv);
        g.re[c] += vis.re[i];
        g.im[c] += vis.im[i];
        g.weight[c] += 1.0;
    }
    for c in 0..height * width {
        if g.weight[c] > 0.0 {
            g.re[c] /= g.weight[c];
            g.im[c] /= g.weight[c];
            g.mask[c] = true;
        }
    }
    Ok(g)
}

/// Naive inverse of gridded sparse samples (uniform weighting).
pub fn dirty_image(vis: &VisibilitySet, height: usize, width: usize) -> Result<Image> {
    if vis.is_empty() {
        return Err(CoreError::Empty("visibility set"));
    }
    let grid = grid_visibility(vis, height, width)?;
    Ok(grid_to_image(&grid).0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centered_point_has_unit_visibilities() {
        let mut d = vec![0.0; 64];
        d[4 * 8 + 4] = 1.0;
        let sky = SkyImage::new(8, 8, d).unwrap();
        let cov = UvCoverage::new(vec![(0.3, -1.7), (3.9, 2.2), (-3.99, 0.0)]).unwrap();
        let vis = sample_visibility(&sky, &cov, 0.0, 0).unwrap();
        for i in 0..3 {
            assert!((vis.re[i] - 1.0).abs() < 1e-14);
            assert!(vis.im[i].abs() < 1e-14);
        }
    }

    #[test]
    fn zero_image_gives_zero_visibilities() {
        let sky = SkyImage::zeros(8).unwrap();
        let cov = UvCoverage::new(vec![(1.0, 2.0), (-0.5, 0.25)]).unwrap();
        let vis = sample_visibility(&sky, &cov, 0.0, 0).unwrap();
        assert!(vis.re.iter().chain(&vis.im).all(|&x| x == 0.0));
    }

    #[test]
    fn bounds_and_sigma_are_checked() {
        let sky = SkyImage::zeros(8).unwrap();
        let cov = UvCoverage::new(vec![(4.0, 0.0)]).unwrap();
        assert!(matches!(
            sample_visibility(&sky, &cov, 0.0, 0),
            Err(CoreError::OutOfBounds { index: 0, .. })
        ));
        let cov = UvCoverage::new(vec![(1.0, 0.0)]).unwrap();
        assert!(sample_visibility(&sky, &cov, -1.0, 0).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let sky = SkyImage::zeros(8).unwrap();
        let cov = UvCoverage::new(vec![(1.0, 0.0); 5]).unwrap();
        let a = sample_visibility(&sky, &cov, 0.5, 3).unwrap();
        let b = sample_visibility(&sky, &cov, 0.5, 3).unwrap();
        let c = sample_visibility(&sky, &cov, 0.5, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empty_set_grids_to_empty_mask() {
        let g = grid_visibility(&VisibilitySet::default(), 8, 8).unwrap();
        assert!(g.mask.iter().all(|&m| !m));
        assert!(g.weight.iter().all(|&w| w == 0.0));
        assert!(dirty_image(&VisibilitySet::default(), 8, 8).is_err());
    }

    #[test]
    fn same_cell_samples_are_averaged() {
        let vis = VisibilitySet::new(vec![1.1, 0.9], vec![-2.0, -1.8], vec![0.9, 1.1], vec![0.0, 0.0]).unwrap();
        let g = grid_visibility(&vis, 8, 8).unwrap();
        let c = g.cell_index(1, -2);
        assert!((g.re[c] - 1.0).abs() < 1e-15);
        assert_eq!(g.im[c], 0.0);
        assert_eq!(g.weight[c], 2.0);
        assert_eq!(g.occupied(), 1);
        assert!(g.mask_consistent());
    }

    #[test]
    fn positive_half_frequency_folds_to_negative() {
        assert_eq!(nearest_cell(3.7, 8), -4);
        assert_eq!(nearest_cell(-3.7, 8), -4);
        assert_eq!(nearest_cell(3.2, 8), 3);
    }
}
