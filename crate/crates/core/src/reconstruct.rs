//! Dense reconstruction from kept samples, and image-quality scores.

use crate::error::{dimension, domain, Error, Result};
use crate::image::Image;

/// Kept samples positioned on a `width x height` lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseImage {
    width: usize,
    height: usize,
    channels: usize,
    points: Vec<(usize, usize, Vec<f64>)>,
}

impl SparseImage {
    /// Points must lie inside the lattice, at most one per position.
    pub fn new(
        width: usize,
        height: usize,
        channels: usize,
        mut points: Vec<(usize, usize, Vec<f64>)>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(domain("sparse image needs a non-empty lattice"));
        }
        for (r, c, v) in &points {
            if *r >= height || *c >= width {
                return Err(domain(format!(
                    "point ({r}, {c}) outside {width}x{height}"
                )));
            }
            if v.len() != channels {
                return Err(dimension(format!(
                    "point ({r}, {c}) has {} channels, expected {channels}",
                    v.len()
                )));
            }
        }
        points.sort_by_key(|(r, c, _)| (*r, *c));
        if points
            .windows(2)
            .any(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1))
        {
            return Err(domain("duplicate sample position"));
        }
        Ok(Self {
            width,
            height,
            channels,
            points,
        })
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

    /// Points in row-major order.
    pub fn points(&self) -> &[(usize, usize, Vec<f64>)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Adds points at positions not already occupied; occupied positions keep their value.
    pub fn merge_unoccupied(&mut self, extra: impl IntoIterator<Item = (usize, usize, Vec<f64>)>) -> Result<()> {
        let mut occupied = vec![false; self.width * self.height];
        for (r, c, _) in &self.points {
            occupied[r * self.width + c] = true;
        }
        let mut points = std::mem::take(&mut self.points);
        for (r, c, v) in extra {
            if r < self.height && c < self.width && !occupied[r * self.width + c] {
                occupied[r * self.width + c] = true;
                points.push((r, c, v));
            }
        }
        *self = Self::new(self.width, self.height, self.channels, points)?;
        Ok(())
    }
}

/// Fills every pixel with the value of its nearest kept sample.
///
/// Distances are Euclidean on the lattice; ties go to the lower row, then the lower column.
pub fn nearest_fill(sparse: &SparseImage) -> Result<Image> {
    if sparse.is_empty() {
        return Err(Error::Empty("sparse image has no points"));
    }
    let (w, h, d) = (sparse.width, sparse.height, sparse.channels);
    // per-row sorted (col, point index)
    let mut rows: Vec<Vec<(usize, usize)>> = vec![Vec::new(); h];
    for (k, (r, c, _)) in sparse.points.iter().enumerate() {
        rows[*r].push((*c, k));
    }

    let mut data = Vec::with_capacity(w * h * d);
    for y in 0..h {
        for x in 0..w {
            let mut best: Option<(usize, usize, usize, usize)> = None; // (d2, row, col, k)
            let mut dr = 0usize;
            loop {
                if let Some((bd, ..)) = best {
                    if dr * dr > bd {
                        break;
                    }
                }
                if dr > y && y + dr >= h {
                    break;
                }
                let candidates = [y.checked_sub(dr), (dr > 0).then_some(y + dr).filter(|r| *r < h)];
                for row in candidates.into_iter().flatten() {
                    let cols = &rows[row];
                    if cols.is_empty() {
                        continue;
                    }
                    let split = cols.partition_point(|(c, _)| *c < x);
                    for j in [split.checked_sub(1), Some(split)].into_iter().flatten() {
                        if let Some(&(c, k)) = cols.get(j) {
                            let dc = c.abs_diff(x);
                            let cand = (dr * dr + dc * dc, row, c, k);
                            if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                                best = Some(cand);
                            }
                        }
                    }
                }
                dr += 1;
            }
            let (.., k) = best.expect("at least one point exists");
            data.extend_from_slice(&sparse.points[k].2);
        }
    }
    Image::new(w, h, d, data)
}

/// Dense image with kept samples in place and zeros elsewhere.
pub fn zero_fill(sparse: &SparseImage) -> Result<Image> {
    let (w, d) = (sparse.width, sparse.channels);
    let mut data = vec![0.0; sparse.width * sparse.height * d];
    for (r, c, v) in &sparse.points {
        let at = (r * w + c) * d;
        data[at..at + d].copy_from_slice(v);
    }
    Image::new(sparse.width, sparse.height, d, data)
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if (a.width(), a.height(), a.channels()) != (b.width(), b.height(), b.channels()) {
        return Err(dimension(format!(
            "{}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.channels(),
            b.width(),
            b.height(),
            b.channels()
        )));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Peak signal-to-noise ratio with peak 1; `+inf` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    let mse = mse(a, b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}
