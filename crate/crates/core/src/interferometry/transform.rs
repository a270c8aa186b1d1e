//! Dense centered 2-D Fourier transforms between images and visibility grids.
//!
//! Forward: `F(k_u, k_v) = Σ x[m][l] · exp(-2πi (k_u·l' + k_v·m'))` with
//! `l' = (l - W/2)/W`, `m' = (m - H/2)/H`, unnormalized.
//! Inverse: the conjugate kernel scaled by `1/(H·W)`.

use std::f64::consts::PI;

use super::types::{Image, SkyImage, VisibilityGrid};

/// How the dense transform is evaluated. Both produce the same values to
/// rounding; `Direct` is the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DftMethod {
    #[default]
    Direct,
    /// Radix-2 FFT; requires power-of-two sides.
    Fft,
}

/// `exp(sign · 2πi · k · (p - n/2) / n)` for centered `k` and pixel `p`,
/// laid out `[k_index * n + p]`. The integer phase is reduced mod `n` first so
/// large products keep full precision.
fn twiddles(n: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let half = (n / 2) as i64;
    let ni = n as i64;
    let mut re = Vec::with_capacity(n * n);
    let mut im = Vec::with_capacity(n * n);
    for ki in 0..ni {
        let k = ki - half;
        for p in 0..ni {
            let t = (k * (p - half)).rem_euclid(ni) as f64;
            let a = sign * 2.0 * PI * t / n as f64;
            re.push(a.cos());
            im.push(a.sin());
        }
    }
    (re, im)
}

/// Separable direct transform of a complex `h × w` array.
fn direct(re: &[f64], im: &[f64], h: usize, w: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let (tw_re, tw_im) = twiddles(w, sign);
    let (th_re, th_im) = twiddles(h, sign);
    // along each row (l -> k_u)
    let mut a_re = vec![0.0; h * w];
    let mut a_im = vec![0.0; h * w];
    for m in 0..h {
        let row_re = &re[m * w..(m + 1) * w];
        let row_im = &im[m * w..(m + 1) * w];
        for k in 0..w {
            let (er, ei) = (&tw_re[k * w..(k + 1) * w], &tw_im[k * w..(k + 1) * w]);
            let mut sr = 0.0;
            let mut si = 0.0;
            for l in 0..w {
                sr += row_re[l] * er[l] - row_im[l] * ei[l];
                si += row_re[l] * ei[l] + row_im[l] * er[l];
            }
            a_re[m * w + k] = sr;
            a_im[m * w + k] = si;
        }
    }
    // along each column (m -> k_v)
    let mut o_re = vec![0.0; h * w];
    let mut o_im = vec![0.0; h * w];
    for kv in 0..h {
        let (er, ei) = (&th_re[kv * h..(kv + 1) * h], &th_im[kv * h..(kv + 1) * h]);
        for m in 0..h {
            let (c, s) = (er[m], ei[m]);
            let (ar, ai) = (&a_re[m * w..(m + 1) * w], &a_im[m * w..(m + 1) * w]);
            let (or, oi) = (&mut o_re[kv * w..(kv + 1) * w], &mut o_im[kv * w..(kv + 1) * w]);
            for ku in 0..w {
                or[ku] += ar[ku] * c - ai[ku] * s;
                oi[ku] += ar[ku] * s + ai[ku] * c;
            }
        }
    }
    (o_re, o_im)
}

/// In-place iterative radix-2 FFT with kernel `exp(sign · 2πi k p / n)`.
fn fft_1d(re: &mut [f64], im: &mut [f64], sign: f64) {
    let n = re.len();
    assert!(n.is_power_of_two(), "fft length must be a power of two");
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            re.swap(i, j);
            im.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        for k in 0..half {
            let a = sign * 2.0 * PI * k as f64 / len as f64;
            let (c, s) = (a.cos(), a.sin());
            let mut start = 0;
            while start < n {
                let (i, j) = (start + k, start + k + half);
                let tr = re[j] * c - im[j] * s;
                let ti = re[j] * s + im[j] * c;
                re[j] = re[i] - tr;
                im[j] = im[i] - ti;
                re[i] += tr;
                im[i] += ti;
                start += len;
            }
        }
        len <<= 1;
    }
}

/// Centered 1-D transform along a line: `(-1)^k` relates the centered kernel
/// to the standard one, and centered index `k + n/2` maps to `k mod n`.
fn centered_line(re: &mut [f64], im: &mut [f64], sign: f64) {
    let n = re.len();
    let half = n / 2;
    let parity = |k: i64| if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    if sign > 0.0 {
        // centered input -> standard order with (-1)^k applied
        let mut r = vec![0.0; n];
        let mut i = vec![0.0; n];
        for idx in 0..n {
            let k = idx as i64 - half as i64;
            let dst = k.rem_euclid(n as i64) as usize;
            r[dst] = parity(k) * re[idx];
            i[dst] = parity(k) * im[idx];
        }
        fft_1d(&mut r, &mut i, sign);
        re.copy_from_slice(&r);
        im.copy_from_slice(&i);
    } else {
        fft_1d(re, im, sign);
        let r = re.to_vec();
        let i = im.to_vec();
        for idx in 0..n {
            let k = idx as i64 - half as i64;
            let src = k.rem_euclid(n as i64) as usize;
            re[idx] = parity(k) * r[src];
            im[idx] = parity(k) * i[src];
        }
    }
}

fn fft2(re: &[f64], im: &[f64], h: usize, w: usize, sign: f64) -> (Vec<f64>, Vec<f64>) {
    let mut re = re.to_vec();
    let mut im = im.to_vec();
    for m in 0..h {
        centered_line(&mut re[m * w..(m + 1) * w], &mut im[m * w..(m + 1) * w], sign);
    }
    let mut col_re = vec![0.0; h];
    let mut col_im = vec![0.0; h];
    for l in 0..w {
        for m in 0..h {
            col_re[m] = re[m * w + l];
            col_im[m] = im[m * w + l];
        }
        centered_line(&mut col_re, &mut col_im, sign);
        for m in 0..h {
            re[m * w + l] = col_re[m];
            im[m * w + l] = col_im[m];
        }
    }
    (re, im)
}

fn transform(re: &[f64], im: &[f64], h: usize, w: usize, sign: f64, method: DftMethod) -> (Vec<f64>, Vec<f64>) {
    match method {
        DftMethod::Direct => direct(re, im, h, w, sign),
        DftMethod::Fft => fft2(re, im, h, w, sign),
    }
}

/// Centered spectrum of any real image (negatives allowed).
pub fn spectrum(image: &Image, method: DftMethod) -> (Vec<f64>, Vec<f64>) {
    let zeros = vec![0.0; image.data.len()];
    transform(&image.data, &zeros, image.height, image.width, -1.0, method)
}

/// Dense visibility grid of a sky image: every cell occupied with weight 1.
pub fn image_to_grid(image: &SkyImage) -> VisibilityGrid {
    image_to_grid_with(image, DftMethod::Direct)
}

pub fn image_to_grid_with(image: &SkyImage, method: DftMethod) -> VisibilityGrid {
    let (re, im) = spectrum(image.image(), method);
    VisibilityGrid::dense(image.height(), image.width(), re, im).expect("spectrum has grid size")
}

/// Inverse transform of a full grid. Returns the real part and the largest
/// absolute imaginary residual.
pub fn grid_to_image(grid: &VisibilityGrid) -> (Image, f64) {
    grid_to_image_with(grid, DftMethod::Direct)
}

pub fn grid_to_image_with(grid: &VisibilityGrid, method: DftMethod) -> (Image, f64) {
    let (h, w) = grid.dims();
    let (re, im) = transform(&grid.re, &grid.im, h, w, 1.0, method);
    let norm = 1.0 / (h * w) as f64;
    let residual = im.iter().fold(0.0f64, |acc, x| acc.max((x * norm).abs()));
    let data = re.into_iter().map(|x| x * norm).collect();
    (Image { height: h, width: w, data }, residual)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(size: usize, row: usize, col: usize) -> SkyImage {
        let mut d = vec![0.0; size * size];
        d[row * size + col] = 1.0;
        SkyImage::new(size, size, d).unwrap()
    }

    #[test]
    fn centered_point_has_flat_spectrum() {
        let g = image_to_grid(&point(8, 4, 4));
        for (r, i) in g.re.iter().zip(&g.im) {
            assert!((r - 1.0).abs() < 1e-15);
            assert!(i.abs() < 1e-15);
        }
        assert!(g.mask.iter().all(|&m| m));
        assert!(g.weight.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn zero_grid_gives_zero_image() {
        let (img, res) = grid_to_image(&VisibilityGrid::empty(8, 8));
        assert!(img.data.iter().all(|&x| x == 0.0));
        assert_eq!(res, 0.0);
    }

    #[test]
    fn single_mode_inverse_is_a_cosine_fringe() {
        let n = 16;
        let mut g = VisibilityGrid::empty(n, n);
        let i = g.cell_index(1, 0);
        g.re[i] = 1.0;
        let (img, _) = grid_to_image(&g);
        for m in 0..n {
            for l in 0..n {
                let lp = (l as f64 - n as f64 / 2.0) / n as f64;
                let expect = (2.0 * PI * lp).cos() / (n * n) as f64;
                assert!((img.at(m, l) - expect).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn fft_path_matches_direct() {
        let n = 16;
        let data: Vec<f64> = (0..n * n).map(|i| ((i * 37 % 101) as f64) / 101.0).collect();
        let sky = SkyImage::new(n, n, data).unwrap();
        let a = image_to_grid_with(&sky, DftMethod::Direct);
        let b = image_to_grid_with(&sky, DftMethod::Fft);
        for i in 0..n * n {
            assert!((a.re[i] - b.re[i]).abs() < 1e-9);
            assert!((a.im[i] - b.im[i]).abs() < 1e-9);
        }
        let (x, _) = grid_to_image_with(&a, DftMethod::Fft);
        for (p, q) in x.data.iter().zip(sky.intensity()) {
            assert!((p - q).abs() < 1e-9);
        }
    }
}
