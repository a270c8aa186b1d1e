use crate::error::{CoreError, Result};

/// Row-major real image. Row index `m` runs along the second sky coordinate,
/// column index `l` along the first.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(CoreError::invalid(
                "image",
                format!("{} values for a {height}x{width} grid", data.len()),
            ));
        }
        Ok(Self { height, width, data })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0.0; height * width],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.width + col] = value;
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Copy with negative values replaced by zero.
    pub fn clipped_nonnegative(&self) -> Image {
        Image {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&x| x.max(0.0)).collect(),
        }
    }
}

/// Nonnegative sky brightness on a square power-of-two grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SkyImage(Image);

impl SkyImage {
    pub fn new(height: usize, width: usize, intensity: Vec<f64>) -> Result<Self> {
        Self::from_image(Image::new(height, width, intensity)?)
    }

    pub fn from_image(image: Image) -> Result<Self> {
        let (h, w) = image.dims();
        if h != w || !h.is_power_of_two() {
            return Err(CoreError::invalid(
                "sky image",
                format!("{h}x{w} is not a square power-of-two grid"),
            ));
        }
        if let Some(bad) = image.data.iter().find(|x| !x.is_finite() || **x < 0.0) {
            return Err(CoreError::invalid(
                "sky image",
                format!("intensity {bad} is negative or non-finite"),
            ));
        }
        Ok(Self(image))
    }

    pub fn zeros(size: usize) -> Result<Self> {
        Self::from_image(Image::zeros(size, size))
    }

    pub fn image(&self) -> &Image {
        &self.0
    }

    pub fn into_image(self) -> Image {
        self.0
    }

    pub fn height(&self) -> usize {
        self.0.height
    }

    pub fn width(&self) -> usize {
        self.0.width
    }

    pub fn intensity(&self) -> &[f64] {
        &self.0.data
    }

    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.0.at(row, col)
    }
}

/// Checks `|u| < width/2` and `|v| < height/2`.
pub fn within_nyquist(u: f64, v: f64, height: usize, width: usize) -> bool {
    u.is_finite() && v.is_finite() && u.abs() < width as f64 / 2.0 && v.abs() < height as f64 / 2.0
}

/// Ordered (u, v) sampling pattern in cycles per field of view.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct UvCoverage {
    pub points: Vec<(f64, f64)>,
}

impl UvCoverage {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.iter().any(|(u, v)| !u.is_finite() || !v.is_finite()) {
            return Err(CoreError::NonFinite("uv coverage".into()));
        }
        Ok(Self { points })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn check_nyquist(&self, height: usize, width: usize) -> Result<()> {
        for (index, &(u, v)) in self.points.iter().enumerate() {
            if !within_nyquist(u, v, height, width) {
                return Err(CoreError::OutOfBounds {
                    index,
                    u,
                    v,
                    height,
                    width,
                });
            }
        }
        Ok(())
    }
}

/// Sparse complex visibility samples V(u, v).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VisibilitySet {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl VisibilitySet {
    pub fn new(u: Vec<f64>, v: Vec<f64>, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n = u.len();
        if v.len() != n || re.len() != n || im.len() != n {
            return Err(CoreError::invalid(
                "visibility set",
                format!("array lengths {} {} {} {}", n, v.len(), re.len(), im.len()),
            ));
        }
        let s = Self { u, v, re, im };
        if !s.is_finite() {
            return Err(CoreError::NonFinite("visibility set".into()));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.u.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        [&self.u, &self.v, &self.re, &self.im]
            .iter()
            .all(|a| a.iter().all(|x| x.is_finite()))
    }

    pub fn coverage(&self) -> UvCoverage {
        UvCoverage {
            points: self.u.iter().copied().zip(self.v.iter().copied()).collect(),
        }
    }

    pub fn check_nyquist(&self, height: usize, width: usize) -> Result<()> {
        for i in 0..self.len() {
            if !within_nyquist(self.u[i], self.v[i], height, width) {
                return Err(CoreError::OutOfBounds {
                    index: i,
                    u: self.u[i],
                    v: self.v[i],
                    height,
                    width,
                });
            }
        }
        Ok(())
    }

    /// Keeps the samples whose index satisfies `keep`, preserving order.
    pub fn filter_indices(&self, mut keep: impl FnMut(usize) -> bool) -> VisibilitySet {
        let mut out = VisibilitySet::default();
        for i in 0..self.len() {
            if keep(i) {
                out.u.push(self.u[i]);
                out.v.push(self.v[i]);
                out.re.push(self.re[i]);
                out.im.push(self.im[i]);
            }
        }
        out
    }

    /// Root-mean-square visibility amplitude (0 for an empty set).
    pub fn rms_amplitude(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let s: f64 = self.re.iter().zip(&self.im).map(|(r, i)| r * r + i * i).sum();
        (s / self.len() as f64).sqrt()
    }
}

/// Dense centered Fourier-plane grid. Cell `(row, col)` holds integer
/// frequency `(k_u, k_v) = (col - width/2, row - height/2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityGrid {
    pub height: usize,
    pub width: usize,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    pub mask: Vec<bool>,
    pub weight: Vec<f64>,
}

impl VisibilityGrid {
    pub fn empty(height: usize, width: usize) -> Self {
        let n = height * width;
        Self {
            height,
            width,
            re: vec![0.0; n],
            im: vec![0.0; n],
            mask: vec![false; n],
            weight: vec![0.0; n],
        }
    }

    /// Fully occupied grid with unit weights.
    pub fn dense(height: usize, width: usize, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        let n = height * width;
        if re.len() != n || im.len() != n {
            return Err(CoreError::invalid(
                "visibility grid",
                format!("{} / {} values for {height}x{width}", re.len(), im.len()),
            ));
        }
        Ok(Self {
            height,
            width,
            re,
            im,
            mask: vec![true; n],
            weight: vec![1.0; n],
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    /// Flat index of integer frequency `(ku, kv)`; frequencies are taken
    /// modulo the grid size.
    pub fn cell_index(&self, ku: i64, kv: i64) -> usize {
        let (h, w) = (self.height as i64, self.width as i64);
        let col = (ku + w / 2).rem_euclid(w) as usize;
        let row = (kv + h / 2).rem_euclid(h) as usize;
        row * self.width + col
    }

    /// Integer frequency of flat cell `index`.
    pub fn frequency_of(&self, index: usize) -> (i64, i64) {
        let row = (index / self.width) as i64;
        let col = (index % self.width) as i64;
        (col - self.width as i64 / 2, row - self.height as i64 / 2)
    }

    pub fn value(&self, ku: i64, kv: i64) -> (f64, f64) {
        let i = self.cell_index(ku, kv);
        (self.re[i], self.im[i])
    }

    pub fn occupied(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Checks `mask[i] == (weight[i] > 0)` for every cell.
    pub fn mask_consistent(&self) -> bool {
        self.mask.iter().zip(&self.weight).all(|(&m, &w)| m == (w > 0.0))
    }
}
