//! Raster-scanning single-pixel camera simulation.
//!
//! A sensor with acceptance angle `φ` sweeps across the scene at angular
//! velocity `ω` and is sampled at `SR` hertz. Consecutive footprints abut
//! when `SR = ω / φ`; above that rate they overlap and the resulting samples
//! are a box blur of the scene.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Error, Result};
use crate::image::Image;

/// Oversampling beyond this multiple of the no-overlap bound is rejected.
pub const MAX_OVERSAMPLING: f64 = 64.0;

const EDGE_EPS: f64 = 1e-9;

/// Largest samplerate at which consecutive footprints do not overlap.
pub fn max_samplerate(angular_velocity: f64, acceptance_angle: f64) -> Result<f64> {
    if !(angular_velocity > 0.0) || !(acceptance_angle > 0.0) {
        return Err(domain(format!(
            "angular velocity ({angular_velocity}) and acceptance angle ({acceptance_angle}) must be positive"
        )));
    }
    Ok(angular_velocity / acceptance_angle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScanPattern {
    #[default]
    Raster,
}

/// How the scan-position change is measured on the jump between rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Flyback {
    /// Euclidean distance of the jump in scan coordinates.
    #[default]
    Euclidean,
    /// Treat the jump like an ordinary in-row step.
    Clamp,
}

/// Sensor geometry and motion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub width: usize,
    pub height: usize,
    /// Acceptance angle in degrees.
    pub acceptance_angle: f64,
    /// Angular velocity in degrees per second.
    pub angular_velocity: f64,
    /// Samplerate in hertz.
    pub samplerate: f64,
    /// Angular extent of one source pixel in degrees.
    pub pixel_pitch: f64,
    pub pattern: ScanPattern,
    pub flyback: Flyback,
}

impl ScanConfig {
    /// One-pixel footprint sampled exactly at the bound: sample `i` is pixel `i`.
    pub fn identity(width: usize, height: usize) -> Self {
        Self::with_footprint(width, height, 1)
    }

    /// Square footprint of `footprint` pixels sampled exactly at the bound.
    pub fn with_footprint(width: usize, height: usize, footprint: usize) -> Self {
        Self {
            width,
            height,
            acceptance_angle: footprint as f64,
            angular_velocity: 1.0,
            samplerate: 1.0 / footprint as f64,
            pixel_pitch: 1.0,
            pattern: ScanPattern::Raster,
            flyback: Flyback::Euclidean,
        }
    }

    /// Sets the samplerate to `multiple` times the no-overlap bound.
    pub fn oversampled(mut self, multiple: f64) -> Self {
        self.samplerate = multiple * self.angular_velocity / self.acceptance_angle;
        self
    }

    pub fn flyback(mut self, flyback: Flyback) -> Self {
        self.flyback = flyback;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(domain("scan dimensions must be at least 1x1"));
        }
        let bound = max_samplerate(self.angular_velocity, self.acceptance_angle)?;
        if !(self.samplerate > 0.0) || !(self.pixel_pitch > 0.0) {
            return Err(domain("samplerate and pixel pitch must be positive"));
        }
        if self.footprint_px() < 1 {
            return Err(domain(format!(
                "acceptance angle {} covers less than one pixel of pitch {}",
                self.acceptance_angle, self.pixel_pitch
            )));
        }
        if self.samplerate > MAX_OVERSAMPLING * bound {
            return Err(domain(format!(
                "samplerate {} exceeds {MAX_OVERSAMPLING}x the bound {bound}",
                self.samplerate
            )));
        }
        Ok(())
    }

    /// Footprint width in source pixels.
    pub fn footprint_px(&self) -> usize {
        (self.acceptance_angle / self.pixel_pitch).round() as usize
    }

    /// Distance travelled between samples, in source pixels.
    pub fn step_px(&self) -> f64 {
        self.angular_velocity / self.samplerate / self.pixel_pitch
    }
}

/// Source-pixel rectangle covered by one sample, already clipped to the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    pub rows: Range<usize>,
    pub cols: Range<usize>,
    /// Nominal centre in pixel-index coordinates, before clipping.
    pub center: (f64, f64),
    pub grid: (usize, usize),
}

/// Footprints visited by a raster scan, in sampling order.
pub fn footprints(config: &ScanConfig) -> Result<Vec<Footprint>> {
    config.validate()?;
    let f = config.footprint_px();
    let step = config.step_px();
    let (w, h) = (config.width, config.height);

    // Horizontal windows are shared by every scan line.
    let mut windows = Vec::new();
    let mut k = 0usize;
    loop {
        let start = k as f64 * step;
        if k > 0 && (k - 1) as f64 * step + f as f64 >= w as f64 - EDGE_EPS {
            break;
        }
        let end = start + f as f64;
        // pixel c belongs to the window when its centre c + 0.5 lies in [start, end)
        let lo = (start - 0.5 - EDGE_EPS).ceil().max(0.0) as usize;
        let hi = ((end - 0.5 - EDGE_EPS).ceil().max(0.0) as usize).min(w);
        if lo >= hi {
            break;
        }
        windows.push((lo..hi, start + f as f64 / 2.0 - 0.5));
        k += 1;
    }

    let lines = h.div_ceil(f);
    let mut out = Vec::with_capacity(lines * windows.len());
    for line in 0..lines {
        let rows = line * f..((line + 1) * f).min(h);
        let row_center = (line * f) as f64 + f as f64 / 2.0 - 0.5;
        for (gc, (cols, col_center)) in windows.iter().enumerate() {
            out.push(Footprint {
                rows: rows.clone(),
                cols: cols.clone(),
                center: (row_center, *col_center),
                grid: (line, gc),
            });
        }
    }
    Ok(out)
}

/// Position and angle of one sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPosition {
    pub row: f64,
    pub col: f64,
    /// Horizontal scan angle in degrees.
    pub theta: f64,
}

/// The ordered set of all potential samples of one scan.
///
/// Sample indices are implicit: sample `i` is the `i`-th entry, laid out on a
/// `grid_width x grid_height` lattice in raster order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleStream {
    grid_width: usize,
    grid_height: usize,
    channels: usize,
    pixel_pitch: f64,
    flyback: Flyback,
    positions: Vec<ScanPosition>,
    values: Vec<f64>,
}

impl SampleStream {
    pub fn new(
        grid_width: usize,
        grid_height: usize,
        channels: usize,
        positions: Vec<ScanPosition>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("sample stream"));
        }
        if channels != 1 && channels != 3 {
            return Err(domain(format!("unsupported channel count {channels}")));
        }
        if grid_width * grid_height != positions.len() || values.len() != positions.len() * channels
        {
            return Err(dimension(format!(
                "{}x{} grid with {} positions and {} values (d = {channels})",
                grid_width,
                grid_height,
                positions.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(domain("sample values must be finite and in [0, 1]"));
        }
        let pixel_pitch = infer_pitch(&positions);
        Ok(Self {
            grid_width,
            grid_height,
            channels,
            pixel_pitch,
            flyback: Flyback::Euclidean,
            positions,
            values,
        })
    }

    pub fn with_flyback(mut self, flyback: Flyback) -> Self {
        self.flyback = flyback;
        self
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn grid_width(&self) -> usize {
        self.grid_width
    }

    pub fn grid_height(&self) -> usize {
        self.grid_height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_pitch(&self) -> f64 {
        self.pixel_pitch
    }

    pub fn flyback_mode(&self) -> Flyback {
        self.flyback
    }

    pub fn position(&self, i: usize) -> ScanPosition {
        self.positions[i]
    }

    pub fn positions(&self) -> &[ScanPosition] {
        &self.positions
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.channels..(i + 1) * self.channels]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lattice coordinates `(row, col)` of sample `i`.
    pub fn grid_position(&self, i: usize) -> (usize, usize) {
        (i / self.grid_width, i % self.grid_width)
    }

    /// Reassembles the samples into an image on the scan lattice.
    pub fn to_image(&self) -> Image {
        Image::new(
            self.grid_width,
            self.grid_height,
            self.channels,
            self.values.clone(),
        )
        .expect("stream invariants imply a valid image")
    }
}

fn infer_pitch(positions: &[ScanPosition]) -> f64 {
    positions
        .iter()
        .find(|p| p.col.abs() > 1e-6)
        .map(|p| p.theta / p.col)
        .filter(|p| p.is_finite() && *p > 0.0)
        .unwrap_or(1.0)
}

/// Scans `image` following `config`, one sample per sampling instant.
pub fn scan(image: &Image, config: &ScanConfig) -> Result<SampleStream> {
    if image.width() != config.width || image.height() != config.height {
        return Err(dimension(format!(
            "image is {}x{}, scan configured for {}x{}",
            image.width(),
            image.height(),
            config.width,
            config.height
        )));
    }
    let prints = footprints(config)?;
    let d = image.channels();
    let grid_height = prints.last().map(|fp| fp.grid.0 + 1).unwrap_or(0);
    let grid_width = prints.len() / grid_height.max(1);

    let mut positions = Vec::with_capacity(prints.len());
    let mut values = Vec::with_capacity(prints.len() * d);
    let mut acc = vec![0.0; d];
    for fp in &prints {
        acc.iter_mut().for_each(|a| *a = 0.0);
        for r in fp.rows.clone() {
            for c in fp.cols.clone() {
                for (a, v) in acc.iter_mut().zip(image.pixel(r, c)) {
                    *a += v;
                }
            }
        }
        let count = (fp.rows.len() * fp.cols.len()) as f64;
        values.extend(acc.iter().map(|a| (a / count).clamp(0.0, 1.0)));
        positions.push(ScanPosition {
            row: fp.center.0,
            col: fp.center.1,
            theta: fp.center.1 * config.pixel_pitch,
        });
    }
    let mut stream = SampleStream::new(grid_width, grid_height, d, positions, values)?;
    stream.pixel_pitch = config.pixel_pitch;
    Ok(stream.with_flyback(config.flyback))
}

/// Per-sample change in scan position and intensity relative to the previous sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanDelta {
    /// Change in scan position, degrees per sample interval.
    pub theta_dot: f64,
    /// Mean absolute per-channel intensity change.
    pub delta_i: f64,
}

/// Changes between consecutive samples. Entry 0 has no predecessor and is `None`.
pub fn scan_deltas(stream: &SampleStream) -> Result<Vec<Option<ScanDelta>>> {
    if stream.is_empty() {
        return Err(Error::Empty("sample stream"));
    }
    let d = stream.channels() as f64;
    let pitch = stream.pixel_pitch();
    let in_row_step = if stream.grid_width() >= 2 {
        (stream.position(1).theta - stream.position(0).theta).abs()
    } else {
        0.0
    };
    let mut out = Vec::with_capacity(stream.len());
    out.push(None);
    for i in 1..stream.len() {
        let (prev, cur) = (stream.position(i - 1), stream.position(i));
        let wraps = i % stream.grid_width() == 0;
        let theta_dot = if !wraps {
            (cur.theta - prev.theta).abs()
        } else {
            match stream.flyback_mode() {
                Flyback::Euclidean => ((cur.row - prev.row) * pitch).hypot(cur.theta - prev.theta),
                Flyback::Clamp => in_row_step,
            }
        };
        let delta_i = stream
            .value(i)
            .iter()
            .zip(stream.value(i - 1))
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / d;
        out.push(Some(ScanDelta { theta_dot, delta_i }));
    }
    Ok(out)
}
