//! Coarse-to-fine imaging: a full low-resolution scan steers a sparse
//! full-resolution second scan.

use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Result};
use crate::image::Image;
use crate::mask::SampleMask;
use crate::reconstruct::SparseImage;
use crate::sauce::{apply_mask, heatmap, rate_logit, threshold, Heatmap, SamplerParams, VarianceMode};
use crate::scanner::{scan, SampleStream, ScanConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoStageConfig {
    /// Side of the square block averaged by one first-pass sample.
    pub factor: usize,
    /// Samples taken by the full-resolution second pass.
    pub second_pass_budget: usize,
    pub params: SamplerParams,
    /// Place first-pass samples into the reconstruction where the second pass left gaps.
    pub reuse_first_pass: bool,
}

impl TwoStageConfig {
    pub fn new(factor: usize, second_pass_budget: usize, params: SamplerParams) -> Self {
        Self {
            factor,
            second_pass_budget,
            params,
            reuse_first_pass: true,
        }
    }

    fn validate(&self, total: usize) -> Result<()> {
        if self.factor < 2 {
            return Err(domain(format!("downscale factor must be >= 2, got {}", self.factor)));
        }
        if self.second_pass_budget > total {
            return Err(domain(format!(
                "second-pass budget {} exceeds {total} samples",
                self.second_pass_budget
            )));
        }
        Ok(())
    }
}

/// Number of first-pass samples for a `width x height` image.
pub fn low_res_count(width: usize, height: usize, factor: usize) -> usize {
    width.div_ceil(factor) * height.div_ceil(factor)
}

/// Full low-resolution scan (one sample per `f x f` block, edge blocks
/// clipped) and its heatmap.
pub fn first_pass(image: &Image, config: &TwoStageConfig) -> Result<(SampleStream, Heatmap)> {
    config.validate(image.len())?;
    let stream = scan(
        image,
        &ScanConfig::with_footprint(image.width(), image.height(), config.factor),
    )?;
    let hmap = heatmap(&stream, &config.params, VarianceMode::TwoPass)?;
    Ok((stream, hmap))
}

/// Bilinear interpolation of a low-resolution map at fractional lattice
/// coordinates, clamped to the lattice.
pub fn bilinear_at(low: &Heatmap, row: f64, col: f64) -> f64 {
    let (lw, lh) = (low.width(), low.height());
    let u = row.clamp(0.0, (lh - 1) as f64);
    let v = col.clamp(0.0, (lw - 1) as f64);
    let (r0, c0) = (u.floor() as usize, v.floor() as usize);
    let (r1, c1) = ((r0 + 1).min(lh - 1), (c0 + 1).min(lw - 1));
    let (t, s) = (u - r0 as f64, v - c0 as f64);
    let p = low.p();
    let at = |r: usize, c: usize| p[r * lw + c];
    let top = at(r0, c0) * (1.0 - s) + at(r0, c1) * s;
    let bottom = at(r1, c0) * (1.0 - s) + at(r1, c1) * s;
    top * (1.0 - t) + bottom * t
}

/// Bilinear upsampling of a first-pass heatmap onto the `width x height` grid.
///
/// Low-resolution cell `(R, C)` sits at the centre of its block,
/// `(R·f + (f-1)/2, C·f + (f-1)/2)` in full-resolution pixel coordinates.
pub fn upsample_heatmap(low: &Heatmap, factor: usize, width: usize, height: usize) -> Result<Heatmap> {
    if factor == 0 {
        return Err(domain("upsampling factor must be positive"));
    }
    if low.width() != width.div_ceil(factor) || low.height() != height.div_ceil(factor) {
        return Err(dimension(format!(
            "{}x{} map cannot be upsampled by {factor} to {width}x{height}",
            low.width(),
            low.height()
        )));
    }
    let f = factor as f64;
    let offset = (f - 1.0) / 2.0;
    let mut p = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let v = bilinear_at(low, (y as f64 - offset) / f, (x as f64 - offset) / f);
            p.push(v.clamp(0.0, 1.0));
        }
    }
    Heatmap::from_probabilities(width, height, p)
}

/// Everything produced by one two-stage acquisition.
#[derive(Debug, Clone)]
pub struct TwoStageOutput {
    pub low_stream: SampleStream,
    pub low_heatmap: Heatmap,
    pub upsampled: Heatmap,
    /// Second-pass mask over the full-resolution raster.
    pub mask: SampleMask,
    /// Both passes' samples over the full-resolution sample count.
    pub effective_rate: f64,
    pub sparse: SparseImage,
}

/// Second-pass mask and the effective samplerate of both scans together.
pub fn two_stage_mask(image: &Image, config: &TwoStageConfig) -> Result<(SampleMask, f64)> {
    let out = two_stage_sample(image, config)?;
    Ok((out.mask, out.effective_rate))
}

pub fn two_stage_sample(image: &Image, config: &TwoStageConfig) -> Result<TwoStageOutput> {
    let total = image.len();
    let (low_stream, low_heatmap) = first_pass(image, config)?;
    let upsampled = upsample_heatmap(&low_heatmap, config.factor, image.width(), image.height())?;
    let n2 = config.second_pass_budget;
    let mask = if n2 == 0 {
        SampleMask::empty(total)
    } else if n2 == total {
        SampleMask::full(total)
    } else {
        // top-n2 of the normalized map; normalization preserves order (see `select`)
        rate_logit(n2, total)?;
        threshold(&upsampled, n2)?
    };
    let effective_rate = (low_stream.len() + n2) as f64 / total as f64;

    let full = scan(image, &ScanConfig::identity(image.width(), image.height()))?;
    let mut sparse = apply_mask(&full, &mask)?;
    if config.reuse_first_pass {
        let f = config.factor;
        let (w, h) = (image.width(), image.height());
        sparse.merge_unoccupied((0..low_stream.len()).map(|i| {
            let (r, c) = low_stream.grid_position(i);
            (
                (r * f + (f - 1) / 2).min(h - 1),
                (c * f + (f - 1) / 2).min(w - 1),
                low_stream.value(i).to_vec(),
            )
        }))?;
    }
    Ok(TwoStageOutput {
        low_stream,
        low_heatmap,
        upsampled,
        mask,
        effective_rate,
        sparse,
    })
}
