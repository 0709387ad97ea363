//! Dense raster images with intensities normalized to `[0, 1]`.

use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use crate::error::{dimension, domain, Result};

/// A row-major raster of `channels`-dimensional intensity vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(domain("image must have at least one pixel"));
        }
        if channels != 1 && channels != 3 {
            return Err(domain(format!("unsupported channel count {channels}")));
        }
        if data.len() != width * height * channels {
            return Err(dimension(format!(
                "expected {} values for {width}x{height}x{channels}, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(domain(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    /// Builds a single-channel image from a closure over `(row, col)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self::new(width, height, 1, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let start = (row * self.width + col) * self.channels;
        &self.data[start..start + self.channels]
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Per-pixel luminance (channel mean), row-major.
    pub fn luminance(&self) -> Vec<f64> {
        self.data
            .chunks(self.channels)
            .map(|px| px.iter().sum::<f64>() / self.channels as f64)
            .collect()
    }

    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let img = image::open(path)
            .map_err(|e| crate::Error::Format(format!("cannot read image {}: {e}", path.display())))?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &DynamicImage) -> Self {
        let (width, height, channels, raw) = match img {
            DynamicImage::ImageLuma8(_) | DynamicImage::ImageLumaA8(_) => {
                let g = img.to_luma8();
                (g.width(), g.height(), 1, g.into_raw())
            }
            DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA16(_) => {
                let g = img.to_luma8();
                (g.width(), g.height(), 1, g.into_raw())
            }
            _ => {
                let rgb = img.to_rgb8();
                (rgb.width(), rgb.height(), 3, rgb.into_raw())
            }
        };
        Self {
            width: width as usize,
            height: height as usize,
            channels,
            data: raw.into_iter().map(|b| f64::from(b) / 255.0).collect(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|v| quantize(*v)).collect()
    }

    /// Writes the image; the format follows the extension (`.pgm`/`.ppm` or `.png`).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let format = ImageFormat::from_path(path)?;
        let (w, h) = (self.width as u32, self.height as u32);
        let dynamic = if self.channels == 1 {
            DynamicImage::ImageLuma8(
                GrayImage::from_raw(w, h, self.to_bytes()).expect("buffer sized by construction"),
            )
        } else {
            DynamicImage::ImageRgb8(
                RgbImage::from_raw(w, h, self.to_bytes()).expect("buffer sized by construction"),
            )
        };
        dynamic.save_with_format(path, format)?;
        Ok(())
    }
}

/// Maps a unit-interval value to an 8-bit level.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Writes a single-channel `[0, 1]` map as binary PGM (P5).
pub fn write_pgm(path: impl AsRef<Path>, width: usize, height: usize, values: &[f64]) -> Result<()> {
    if values.len() != width * height {
        return Err(dimension(format!(
            "{} values for a {width}x{height} map",
            values.len()
        )));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(values.iter().map(|v| quantize(*v)));
    std::fs::write(path, out)?;
    Ok(())
}
