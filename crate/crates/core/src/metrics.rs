//! Frame similarity (MSE, PSNR, NCC) and box overlap (IOU).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Peak intensity of 8-bit frames.
pub const MAX_INTENSITY: f64 = 255.0;
/// PSNR reported for identical frames.
pub const DEFAULT_PSNR_CAP: f64 = 100.0;

/// Row-major 8-bit grayscale frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidInput("frame must have nonzero size".into()));
        }
        if pixels.len() != width * height {
            return Err(Error::InvalidInput(format!(
                "frame {width}x{height} needs {} pixels, got {}",
                width * height,
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// Reads an 8-bit PGM (binary or ASCII). Color inputs are converted to luma.
    pub fn load_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        let img =
            image::load_from_memory_with_format(&bytes, image::ImageFormat::Pnm)?.into_luma8();
        let (w, h) = img.dimensions();
        Self::new(w as usize, h as usize, img.into_raw())
    }

    pub fn save_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let img =
            image::GrayImage::from_raw(self.width as u32, self.height as u32, self.pixels.clone())
                .expect("dimensions checked at construction");
        let mut out = Vec::new();
        image::codecs::pnm::PnmEncoder::new(&mut out)
            .with_subtype(image::codecs::pnm::PnmSubtype::Graymap(
                image::codecs::pnm::SampleEncoding::Binary,
            ))
            .encode(
                img.as_raw().as_slice(),
                img.width(),
                img.height(),
                image::ExtendedColorType::L8,
            )?;
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }
}

/// Axis-aligned box given by its center and extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if !(w > 0.0 && h > 0.0)
            || !x.is_finite()
            || !y.is_finite()
            || !w.is_finite()
            || !h.is_finite()
        {
            return Err(Error::InvalidInput(format!(
                "invalid box ({x}, {y}, {w}, {h})"
            )));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

pub fn mse(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: u64 = a
        .pixels
        .iter()
        .zip(&b.pixels)
        .map(|(&p, &q)| {
            let d = (p as i64 - q as i64).unsigned_abs();
            d * d
        })
        .sum();
    Ok(sum as f64 / a.pixels.len() as f64)
}

/// PSNR for a given MSE; `cap` is returned when `mse == 0`.
pub fn psnr_from_mse(mse: f64, cap: f64) -> f64 {
    if mse <= 0.0 {
        return cap;
    }
    (20.0 * (MAX_INTENSITY / mse.sqrt()).log10()).min(cap)
}

/// MSE that yields the given PSNR. Inverse of [`psnr_from_mse`] below the cap.
pub fn mse_from_psnr(psnr: f64) -> f64 {
    MAX_INTENSITY * MAX_INTENSITY / 10f64.powf(psnr / 10.0)
}

pub fn psnr(a: &Frame, b: &Frame) -> Result<f64> {
    psnr_capped(a, b, DEFAULT_PSNR_CAP)
}

pub fn psnr_capped(a: &Frame, b: &Frame, cap: f64) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?, cap))
}

pub fn iou(g: &BoundingBox, p: &BoundingBox) -> f64 {
    let overlap = |c1: f64, e1: f64, c2: f64, e2: f64| {
        let lo = (c1 - e1 / 2.0).max(c2 - e2 / 2.0);
        let hi = (c1 + e1 / 2.0).min(c2 + e2 / 2.0);
        (hi - lo).max(0.0)
    };
    let inter = overlap(g.x, g.w, p.x, p.w) * overlap(g.y, g.h, p.y, p.h);
    let union = g.area() + p.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Zero-mean normalized cross-correlation.
pub fn ncc(a: &Frame, b: &Frame) -> Result<f64> {
    a.check_same_shape(b)?;
    let n = a.pixels.len() as f64;
    let mean = |px: &[u8]| px.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (ma, mb) = (mean(&a.pixels), mean(&b.pixels));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&p, &q) in a.pixels.iter().zip(&b.pixels) {
        let (da, db) = (p as f64 - ma, q as f64 - mb);
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::DegenerateFrame);
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}
