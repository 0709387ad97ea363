//! Reference samplers: uniform downsampling, random sampling, level-crossing
//! and mixed adaptive-random (MAR) selection.
//!
//! The level-crossing and MAR rules are deliberately simple reconstructions
//! of those families, not reimplementations of any particular published variant.

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::mask::SampleMask;
use crate::sauce::top_k;
use crate::scanner::SampleStream;

/// Bisection iterations used when matching a level-crossing threshold to a budget.
pub const RATE_MATCH_ITERATIONS: usize = 32;

/// Default share of the MAR budget spent on random samples.
pub const DEFAULT_MAR_RHO: f64 = 0.5;

fn check_budget(total: usize, n: usize) -> Result<()> {
    if n > total {
        return Err(domain(format!("budget {n} exceeds {total} samples")));
    }
    Ok(())
}

/// Keeps `round(k·N/n)` for `k = 0..n`, topped up from the front if rounding collides.
pub fn uniform_mask(total: usize, n: usize) -> Result<SampleMask> {
    check_budget(total, n)?;
    if n == 0 {
        return Ok(SampleMask::empty(total));
    }
    let step = total as f64 / n as f64;
    let mut mask = SampleMask::from_indices(
        total,
        (0..n).map(|k| ((k as f64 * step).round() as usize).min(total - 1)),
    )?;
    mask.trim_or_pad(n)?;
    Ok(mask)
}

/// A uniformly random `n`-subset, reproducible from `seed`.
pub fn random_mask(total: usize, n: usize, seed: u64) -> Result<SampleMask> {
    check_budget(total, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SampleMask::from_indices(total, index::sample(&mut rng, total, n))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelCrossingConfig {
    /// Intensity change (mean absolute over channels) that triggers a sample.
    pub delta: f64,
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

/// Keeps sample 0, then every sample whose value has moved at least `delta`
/// from the last kept one.
pub fn level_crossing_mask(stream: &SampleStream, delta: f64) -> Result<SampleMask> {
    if stream.is_empty() {
        return Err(Error::Empty("sample stream"));
    }
    if !(delta > 0.0) {
        return Err(domain(format!("level-crossing delta must be positive, got {delta}")));
    }
    let mut keep = vec![false; stream.len()];
    keep[0] = true;
    let mut last = 0;
    for (i, slot) in keep.iter_mut().enumerate().skip(1) {
        if mean_abs_diff(stream.value(i), stream.value(last)) >= delta {
            *slot = true;
            last = i;
        }
    }
    Ok(SampleMask::from_keep(keep))
}

/// A level-crossing mask placed on a samplerate axis.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatched {
    pub mask: SampleMask,
    /// Threshold whose kept count came closest to the budget.
    pub delta: f64,
    /// False when no threshold came within one sample of the budget and the
    /// mask was padded or trimmed by index order.
    pub reached: bool,
}

/// Bisects the level-crossing threshold until the kept count is within one
/// sample of `n`, then trims or pads to exactly `n`.
pub fn level_crossing_at_rate(stream: &SampleStream, n: usize) -> Result<RateMatched> {
    if stream.is_empty() {
        return Err(Error::Empty("sample stream"));
    }
    if n == 0 || n > stream.len() {
        return Err(domain(format!(
            "level-crossing budget must be in 1..={}, got {n}",
            stream.len()
        )));
    }
    // every change is at most 1, so delta slightly above 1 keeps only sample 0
    let (mut lo, mut hi) = (0.0f64, 1.0 + 1e-9);
    let mut best: Option<(usize, f64, SampleMask)> = None;
    for _ in 0..RATE_MATCH_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= 0.0 {
            break;
        }
        let mask = level_crossing_mask(stream, mid)?;
        let gap = mask.kept().abs_diff(n);
        if best.as_ref().is_none_or(|(g, ..)| gap < *g) {
            best = Some((gap, mid, mask.clone()));
        }
        if gap <= 1 {
            break;
        }
        if mask.kept() > n {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (gap, delta, mut mask) = best.expect("at least one bisection step runs");
    let reached = gap <= 1;
    if !reached {
        log::warn!(
            "level-crossing could not reach {n} samples (closest {}), padding by index order",
            mask.kept()
        );
    }
    mask.trim_or_pad(n)?;
    Ok(RateMatched {
        mask,
        delta,
        reached,
    })
}

/// Mixed adaptive-random selection: `floor(rho·n)` random samples, the rest
/// of the budget on the largest local intensity changes.
pub fn mar_mask(stream: &SampleStream, n: usize, rho: f64, seed: u64) -> Result<SampleMask> {
    if stream.is_empty() {
        return Err(Error::Empty("sample stream"));
    }
    check_budget(stream.len(), n)?;
    if !(0.0..=1.0).contains(&rho) {
        return Err(domain(format!("rho must be in [0, 1], got {rho}")));
    }
    let total = stream.len();
    let random_n = (rho * n as f64).floor() as usize;
    let random = random_mask(total, random_n, seed)?;

    // already-picked samples rank below every remaining one
    let scores: Vec<f64> = (0..total)
        .map(|i| {
            if random.keeps(i) {
                f64::NEG_INFINITY
            } else if i == 0 {
                0.0
            } else {
                stream
                    .value(i)
                    .iter()
                    .zip(stream.value(i - 1))
                    .map(|(a, b)| (a - b).abs())
                    .sum()
            }
        })
        .collect();
    let adaptive = top_k(&scores, n - random_n)?;
    let mut mask = SampleMask::from_keep(
        random
            .as_slice()
            .iter()
            .zip(adaptive.as_slice())
            .map(|(a, b)| *a || *b)
            .collect(),
    );
    mask.trim_or_pad(n)?;
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::scanner::{scan, ScanConfig};

    fn stream_of(values: &[f64]) -> SampleStream {
        let img = Image::new(values.len(), 1, 1, values.to_vec()).unwrap();
        scan(&img, &ScanConfig::identity(values.len(), 1)).unwrap()
    }

    fn kept(m: &SampleMask) -> Vec<usize> {
        m.indices().collect()
    }

    #[test]
    fn uniform_examples() {
        assert_eq!(kept(&uniform_mask(8, 4).unwrap()), vec![0, 2, 4, 6]);
        assert_eq!(uniform_mask(5, 5).unwrap().kept(), 5);
        assert_eq!(uniform_mask(5, 0).unwrap().kept(), 0);
        assert!(uniform_mask(5, 6).is_err());
        // round(k * 10/4) = 0, 3 (2.5 rounds away from zero), 5, 8
        assert_eq!(kept(&uniform_mask(10, 4).unwrap()), vec![0, 3, 5, 8]);
    }

    #[test]
    fn random_examples() {
        assert_eq!(random_mask(50, 10, 7).unwrap(), random_mask(50, 10, 7).unwrap());
        assert_ne!(random_mask(50, 10, 7).unwrap(), random_mask(50, 10, 8).unwrap());
        assert_eq!(random_mask(100, 100, 3).unwrap().kept(), 100);
    }

    #[test]
    fn random_marginals_are_uniform() {
        let mut counts = [0usize; 10];
        for seed in 0..10_000 {
            for i in random_mask(10, 3, seed).unwrap().indices() {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / 10_000.0;
            assert!((freq - 0.3).abs() <= 0.02, "frequency {freq}");
        }
    }

    #[test]
    fn level_crossing_examples() {
        assert_eq!(kept(&level_crossing_mask(&stream_of(&[0.3; 6]), 0.01).unwrap()), vec![0]);
        let s = stream_of(&[0.0, 0.5, 0.6, 1.0]);
        assert_eq!(kept(&level_crossing_mask(&s, 0.4).unwrap()), vec![0, 1, 3]);
        let distinct = stream_of(&[0.1, 0.2, 0.25, 0.9, 0.4]);
        assert_eq!(level_crossing_mask(&distinct, 1e-9).unwrap().kept(), 5);
        assert!(level_crossing_mask(&s, 0.0).is_err());
    }

    #[test]
    fn level_crossing_at_rate_examples() {
        let distinct = stream_of(&[0.1, 0.2, 0.25, 0.9, 0.4]);
        let full = level_crossing_at_rate(&distinct, 5).unwrap();
        assert_eq!(full.mask.kept(), 5);
        assert!(full.reached);

        let mut step = vec![0.2; 10];
        step[6..].iter_mut().for_each(|v| *v = 0.8);
        let edge = level_crossing_at_rate(&stream_of(&step), 2).unwrap();
        assert_eq!(kept(&edge.mask), vec![0, 6]);

        let flat = level_crossing_at_rate(&stream_of(&[0.5; 8]), 3).unwrap();
        assert!(!flat.reached);
        assert_eq!(kept(&flat.mask), vec![0, 1, 2]);
    }

    #[test]
    fn level_crossing_on_ramp_is_evenly_spaced() {
        let ramp: Vec<f64> = (0..64).map(|i| i as f64 / 63.0).collect();
        let out = level_crossing_at_rate(&stream_of(&ramp), 32).unwrap();
        let idx = kept(&out.mask);
        assert_eq!(idx.len(), 32);
        // a ramp crosses a level every delta/slope samples; at half rate that is every 2nd
        let gaps: Vec<usize> = idx.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.iter().all(|g| (1..=3).contains(g)), "{gaps:?}");
    }

    #[test]
    fn mar_examples() {
        let mut step = vec![0.1; 20];
        step[9..].iter_mut().for_each(|v| *v = 0.9);
        let s = stream_of(&step);
        assert_eq!(mar_mask(&s, 6, 1.0, 11).unwrap(), random_mask(20, 6, 11).unwrap());
        let adaptive = mar_mask(&s, 1, 0.0, 0).unwrap();
        assert_eq!(kept(&adaptive), vec![9]);
        assert_eq!(mar_mask(&s, 7, 0.5, 2).unwrap().kept(), 7);
        assert!(mar_mask(&s, 3, 1.5, 0).is_err());
    }
}
