//! Small procedurally generated image datasets for desk-scale experiments.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::image::Image;
use crate::taskproxy::LabeledDataset;

// Seven-segment layout, segments a..g:
//  aaa
// f   b
//  ggg
// e   c
//  ddd
const DIGIT_SEGMENTS: [[bool; 7]; 10] = [
    [true, true, true, true, true, true, false],
    [false, true, true, false, false, false, false],
    [true, true, false, true, true, false, true],
    [true, true, true, true, false, false, true],
    [false, true, true, false, false, true, true],
    [true, false, true, true, false, true, true],
    [true, false, true, true, true, true, true],
    [true, true, true, false, false, false, false],
    [true, true, true, true, true, true, true],
    [true, true, true, true, false, true, true],
];

/// Settings for [`digits`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DigitStyle {
    pub size: usize,
    /// Standard deviation of additive Gaussian noise.
    pub noise: f64,
    /// Maximum shift of the glyph from the centre, in pixels.
    pub jitter: usize,
}

impl Default for DigitStyle {
    fn default() -> Self {
        Self {
            size: 16,
            noise: 0.03,
            jitter: 1,
        }
    }
}

fn noisy(value: f64, noise: &Normal<f64>, rng: &mut impl Rng) -> f64 {
    (value + noise.sample(rng)).clamp(0.0, 1.0)
}

/// Renders one seven-segment digit with one-pixel strokes.
pub fn render_digit(digit: usize, style: &DigitStyle, rng: &mut impl Rng) -> Image {
    let size = style.size;
    let glyph_w = rng.random_range(5..=7usize).min(size);
    let glyph_h = rng.random_range(9..=11usize).min(size);
    let jitter = style.jitter as i64;
    let left = ((size - glyph_w) as i64 / 2 + rng.random_range(-jitter..=jitter))
        .clamp(0, (size - glyph_w) as i64) as usize;
    let top = ((size - glyph_h) as i64 / 2 + rng.random_range(-jitter..=jitter))
        .clamp(0, (size - glyph_h) as i64) as usize;
    let background = rng.random_range(0.05..0.25);
    let ink = rng.random_range(0.75..0.95);

    let (right, bottom, mid) = (left + glyph_w - 1, top + glyph_h - 1, top + glyph_h / 2);
    let seg = DIGIT_SEGMENTS[digit % 10];
    let on = |r: usize, c: usize| -> bool {
        let in_cols = (left..=right).contains(&c);
        let upper = (top..=mid).contains(&r);
        let lower = (mid..=bottom).contains(&r);
        (seg[0] && r == top && in_cols)
            || (seg[1] && c == right && upper)
            || (seg[2] && c == right && lower)
            || (seg[3] && r == bottom && in_cols)
            || (seg[4] && c == left && lower)
            || (seg[5] && c == left && upper)
            || (seg[6] && r == mid && in_cols)
    };
    let noise = Normal::new(0.0, style.noise.max(0.0)).expect("finite noise level");
    Image::from_fn(size, size, |r, c| {
        noisy(if on(r, c) { ink } else { background }, &noise, rng)
    })
    .expect("values clamped to [0, 1]")
}

/// Ten-class seven-segment digit corpus, `per_class` images per class, shuffled.
pub fn digits(per_class: usize, style: &DigitStyle, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items: Vec<(Image, usize)> = (0..per_class)
        .flat_map(|_| 0..10)
        .map(|d| (render_digit(d, style, &mut rng), d))
        .collect();
    items.shuffle(&mut rng);
    LabeledDataset::new(items, 10).expect("generated labels are in range")
}

/// Two-class corpus whose label is carried only by thin high-contrast lines.
///
/// Every image has a smooth random intensity gradient. Class 0 adds a
/// one-pixel line in a random column of the left half, class 1 in the right
/// half. The gradient dominates the pixel variance but changes slowly along
/// the scan, so the label lives in the samples with large intensity changes.
pub fn edge_coded(per_class: usize, size: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).expect("finite noise level");
    let mut items = Vec::with_capacity(2 * per_class);
    for _ in 0..per_class {
        for label in 0..2 {
            let base = rng.random_range(0.2..0.6);
            let (gr, gc) = (rng.random_range(-0.2..0.2), rng.random_range(-0.2..0.2));
            let half = size / 2;
            let col = if label == 0 {
                rng.random_range(1..half.max(2) - 1)
            } else {
                rng.random_range(half + 1..size - 1)
            };
            let (row0, row1) = (rng.random_range(0..size / 4), rng.random_range(3 * size / 4..size));
            let img = Image::from_fn(size, size, |r, c| {
                let smooth = base + gr * r as f64 / size as f64 + gc * c as f64 / size as f64;
                let line = if c == col && (row0..row1).contains(&r) { 0.35 } else { 0.0 };
                noisy(smooth + line, &noise, &mut rng)
            })
            .expect("values clamped");
            items.push((img, label));
        }
    }
    items.shuffle(&mut rng);
    LabeledDataset::new(items, 2).expect("labels in range")
}

/// Smooth random gradients with labels drawn independently of the pixels.
pub fn unstructured(per_class: usize, classes: usize, size: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.05).expect("finite noise level");
    let items = (0..per_class * classes)
        .map(|k| {
            let base = rng.random_range(0.2..0.8);
            let img = Image::from_fn(size, size, |_, _| noisy(base, &noise, &mut rng))
                .expect("values clamped");
            (img, k % classes)
        })
        .collect();
    LabeledDataset::new(items, classes).expect("labels in range")
}

/// Images of independent uniform noise.
pub fn noise_image(width: usize, height: usize, seed: u64) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Image::from_fn(width, height, |_, _| rng.random::<f64>()).expect("uniform values in [0, 1)")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digits_are_balanced_and_reproducible() {
        let a = digits(3, &DigitStyle::default(), 1);
        let b = digits(3, &DigitStyle::default(), 1);
        assert_eq!(a.len(), 30);
        assert_eq!(a.items(), b.items());
        let mut counts = [0; 10];
        a.items().iter().for_each(|(_, l)| counts[*l] += 1);
        assert!(counts.iter().all(|c| *c == 3));
    }

    #[test]
    fn eight_has_more_ink_than_one() {
        let style = DigitStyle {
            noise: 0.0,
            ..DigitStyle::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let one = render_digit(1, &style, &mut rng);
        let eight = render_digit(8, &style, &mut rng);
        let ink = |img: &Image| img.data().iter().filter(|v| **v > 0.5).count();
        assert!(ink(&eight) > 2 * ink(&one));
    }

    #[test]
    fn edge_coded_line_side_matches_label() {
        let ds = edge_coded(5, 16, 3);
        for (img, label) in ds.items() {
            // the line column has the largest jump against its left neighbour
            let mut best = (0.0, 0);
            for c in 1..16 {
                let jump: f64 = (0..16).map(|r| img.pixel(r, c)[0] - img.pixel(r, c - 1)[0]).sum();
                if jump > best.0 {
                    best = (jump, c);
                }
            }
            assert_eq!(usize::from(best.1 >= 8), *label);
        }
    }
}
