//! Matched (measurement, image) transforms.
//!
//! Each kind moves the uv coordinates and permutes the image pixels so that
//! sampling the transformed image at the transformed coordinates reproduces
//! the transformed values exactly. Pixel centers sit at `(p - n/2)/n`, so a
//! flip about the grid center shifts the sky by one pixel; that shift shows up
//! as the phase factor applied to the values.

use std::f64::consts::PI;
use std::str::FromStr;

use crate::error::{CoreError, Result};
use crate::interferometry::{Image, SkyImage, VisibilitySet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelVariant {
    /// swap u and v; transpose the image
    Transpose,
    /// negate u; mirror columns
    ReflectU,
    /// negate v; mirror rows
    ReflectV,
    /// negate both; rotate the image by 180 degrees
    CentralSymmetry,
}

impl LabelVariant {
    pub const ALL: [LabelVariant; 4] = [
        LabelVariant::Transpose,
        LabelVariant::ReflectU,
        LabelVariant::ReflectV,
        LabelVariant::CentralSymmetry,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LabelVariant::Transpose => "transpose",
            LabelVariant::ReflectU => "reflect_u",
            LabelVariant::ReflectV => "reflect_v",
            LabelVariant::CentralSymmetry => "central_symmetry",
        }
    }
}

impl FromStr for LabelVariant {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| CoreError::invalid("label-variant kind", format!("unknown kind {s:?}")))
    }
}

/// Applies the image half of a label-variant pair.
pub fn transform_image(image: &Image, kind: LabelVariant) -> Image {
    let (h, w) = image.dims();
    let mut out = Image::zeros(h, w);
    for m in 0..h {
        for l in 0..w {
            let v = match kind {
                LabelVariant::Transpose => image.at(l, m),
                LabelVariant::ReflectU => image.at(m, w - 1 - l),
                LabelVariant::ReflectV => image.at(h - 1 - m, l),
                LabelVariant::CentralSymmetry => image.at(h - 1 - m, w - 1 - l),
            };
            out.set(m, l, v);
        }
    }
    out
}

/// Applies the measurement half of a label-variant pair for a
/// `height × width` image grid.
pub fn transform_visibilities(vis: &VisibilitySet, kind: LabelVariant, height: usize, width: usize) -> VisibilitySet {
    let (hf, wf) = (height as f64, width as f64);
    let mut out = vis.clone();
    for i in 0..vis.len() {
        let (u, v) = (vis.u[i], vis.v[i]);
        let (nu, nv, phase) = match kind {
            LabelVariant::Transpose => (v, u, 0.0),
            LabelVariant::ReflectU => (-u, v, -2.0 * PI * u / wf),
            LabelVariant::ReflectV => (u, -v, -2.0 * PI * v / hf),
            LabelVariant::CentralSymmetry => (-u, -v, -2.0 * PI * (u / wf + v / hf)),
        };
        out.u[i] = nu;
        out.v[i] = nv;
        if phase != 0.0 {
            let (c, s) = (phase.cos(), phase.sin());
            let (re, im) = (vis.re[i], vis.im[i]);
            out.re[i] = re * c - im * s;
            out.im[i] = re * s + im * c;
        }
    }
    out
}

/// Applies a matched label-variant pair to a measurement and its ground truth.
pub fn aug_label_variant(vis: &VisibilitySet, image: &SkyImage, kind: LabelVariant) -> Result<(VisibilitySet, SkyImage)> {
    if kind == LabelVariant::Transpose && image.height() != image.width() {
        return Err(CoreError::invalid("transpose", "image must be square"));
    }
    let vis = transform_visibilities(vis, kind, image.height(), image.width());
    let img = SkyImage::from_image(transform_image(image.image(), kind))?;
    Ok((vis, img))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinds_parse_by_name() {
        for k in LabelVariant::ALL {
            assert_eq!(k.name().parse::<LabelVariant>().unwrap(), k);
        }
        assert!("rotate90".parse::<LabelVariant>().is_err());
    }

    #[test]
    fn image_transforms_are_permutations() {
        let img = Image::new(4, 4, (0..16).map(|x| x as f64).collect()).unwrap();
        for k in LabelVariant::ALL {
            let mut vals = transform_image(&img, k).data;
            vals.sort_by(f64::total_cmp);
            assert_eq!(vals, img.data);
        }
        let t = transform_image(&img, LabelVariant::Transpose);
        assert_eq!(t.at(1, 2), img.at(2, 1));
    }
}
