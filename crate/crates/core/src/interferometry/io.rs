//! `VRIM` image and `VRGD` grid files: 4-byte tag, u32 version, u32 height,
//! u32 width, then little-endian f64 planes in row-major order (grids store
//! the real, imaginary and weight planes in that order).

use std::fs;
use std::path::Path;

use visrec_autodiff::binio::{ByteReader, ByteWriter, FormatError};

use super::types::{Image, VisibilityGrid};
use crate::error::Result;

pub const IMAGE_MAGIC: &[u8; 4] = b"VRIM";
pub const GRID_MAGIC: &[u8; 4] = b"VRGD";
pub const FORMAT_VERSION: u32 = 1;

fn dims(r: &mut ByteReader<'_>) -> std::result::Result<(usize, usize), FormatError> {
    let h = r.u32()? as usize;
    let w = r.u32()? as usize;
    Ok((h, w))
}

pub fn encode_image(image: &Image) -> Vec<u8> {
    let mut w = ByteWriter::header(IMAGE_MAGIC, FORMAT_VERSION);
    w.u32(image.height as u32);
    w.u32(image.width as u32);
    w.f64s(&image.data);
    w.into_bytes()
}

pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let mut r = ByteReader::new(bytes);
    r.header(IMAGE_MAGIC, FORMAT_VERSION)?;
    let (h, w) = dims(&mut r)?;
    let data = r.f64s(h * w)?;
    r.expect_end()?;
    Image::new(h, w, data)
}

pub fn encode_grid(grid: &VisibilityGrid) -> Vec<u8> {
    let mut w = ByteWriter::header(GRID_MAGIC, FORMAT_VERSION);
    w.u32(grid.height as u32);
    w.u32(grid.width as u32);
    w.f64s(&grid.re);
    w.f64s(&grid.im);
    w.f64s(&grid.weight);
    w.into_bytes()
}

pub fn decode_grid(bytes: &[u8]) -> Result<VisibilityGrid> {
    let mut r = ByteReader::new(bytes);
    r.header(GRID_MAGIC, FORMAT_VERSION)?;
    let (h, w) = dims(&mut r)?;
    let n = h * w;
    let re = r.f64s(n)?;
    let im = r.f64s(n)?;
    let weight = r.f64s(n)?;
    r.expect_end()?;
    let mask = weight.iter().map(|&w| w > 0.0).collect();
    Ok(VisibilityGrid {
        height: h,
        width: w,
        re,
        im,
        mask,
        weight,
    })
}

pub fn save_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    fs::write(path, encode_image(image))?;
    Ok(())
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    decode_image(&fs::read(path)?)
}

pub fn save_grid(path: impl AsRef<Path>, grid: &VisibilityGrid) -> Result<()> {
    fs::write(path, encode_grid(grid))?;
    Ok(())
}

pub fn load_grid(path: impl AsRef<Path>) -> Result<VisibilityGrid> {
    decode_grid(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::CoreError;

    #[test]
    fn image_round_trip() {
        let img = Image::new(2, 4, vec![1.0, -2.0, 0.5, 1e-310, 3.0, 4.0, -0.0, 7.0]).unwrap();
        let back = decode_image(&encode_image(&img)).unwrap();
        assert_eq!(
            img.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>(),
            back.data.iter().map(|x| x.to_bits()).collect::<Vec<_>>()
        );
    }

    #[test]
    fn grid_round_trip_restores_mask() {
        let mut g = VisibilityGrid::empty(4, 4);
        g.re[3] = 1.5;
        g.im[3] = -0.5;
        g.weight[3] = 2.0;
        g.mask[3] = true;
        let back = decode_grid(&encode_grid(&g)).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn truncated_and_mislabelled_files_fail() {
        let bytes = encode_image(&Image::zeros(4, 4));
        assert!(matches!(
            decode_image(&bytes[..bytes.len() - 1]),
            Err(CoreError::Format(FormatError::Truncated { .. }))
        ));
        assert!(matches!(
            decode_grid(&bytes),
            Err(CoreError::Format(FormatError::BadMagic { .. }))
        ));
    }
}
