//! Online adaptive sample selection.
//!
//! Each sample gets a distance `D(i) = α·θ̇(i) + β·ΔI(i) + γ` from the change in
//! scan position and intensity since the previous sample. The distance is
//! mapped to a keep probability `P(i) = 1 - exp(-D(i) / σ²_D)`, where `σ²_D` is
//! the variance of `D` over the scan. The resulting heatmap can be shifted to
//! a target samplerate and thresholded into an exact-budget mask.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::image::write_pgm;
use crate::mask::SampleMask;
use crate::reconstruct::SparseImage;
use crate::scanner::{scan_deltas, SampleStream, ScanDelta};
use crate::stats::{population_variance, RunningStats};

/// Lower bound applied to the variance of the distance trace.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// The learnable weights of the distance function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Weight on the change in scan position (per degree).
    pub alpha: f64,
    /// Weight on the change in intensity.
    pub beta: f64,
    /// Constant offset.
    pub gamma: f64,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
            gamma: 0.0,
        }
    }
}

impl SamplerParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64) -> Self {
        Self { alpha, beta, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.alpha, self.beta, self.gamma]
            .iter()
            .all(|v| v.is_finite())
        {
            Ok(())
        } else {
            Err(domain(format!("non-finite sampler parameters {self:?}")))
        }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.alpha, self.beta, self.gamma]
    }

    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let params: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        params.validate()?;
        Ok(params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// How `σ²_D` is estimated over a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceMode {
    /// Population variance of the whole distance trace.
    #[default]
    TwoPass,
    /// Running variance over the samples seen so far.
    Streaming,
}

/// Per-sample usefulness estimate laid out on the scan lattice.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    width: usize,
    height: usize,
    p: Vec<f64>,
    sigma_sq: f64,
    d_values: Vec<f64>,
}

impl Heatmap {
    /// Builds a heatmap from probabilities alone (no distance trace).
    pub fn from_probabilities(width: usize, height: usize, p: Vec<f64>) -> Result<Self> {
        if p.len() != width * height {
            return Err(crate::error::dimension(format!(
                "{} probabilities for a {width}x{height} map",
                p.len()
            )));
        }
        if let Some(v) = p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(domain(format!("probability {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            p,
            sigma_sq: 1.0,
            d_values: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// For two-pass maps the single variance used; for streaming maps the final running value.
    pub fn sigma_sq(&self) -> f64 {
        self.sigma_sq
    }

    /// Raw distance trace. Entry 0 is `0` (no predecessor); empty for maps
    /// not computed from a stream.
    pub fn d_values(&self) -> &[f64] {
        &self.d_values
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.p.len() as f64
    }

    /// Writes `P` scaled to 0-255 as binary PGM.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        write_pgm(path, self.width, self.height, &self.p)
    }
}

/// `α·θ̇ + β·ΔI + γ`.
pub fn distance(theta_dot: f64, delta_i: f64, params: &SamplerParams) -> f64 {
    params.alpha * theta_dot + params.beta * delta_i + params.gamma
}

/// `1 - exp(-D / σ²)`, with negative distances clamped to probability 0.
pub fn probability(d: f64, sigma_sq: f64) -> Result<f64> {
    if !(sigma_sq > 0.0) {
        return Err(domain(format!("variance must be positive, got {sigma_sq}")));
    }
    if d.is_nan() {
        return Err(Error::Numeric("distance is NaN".into()));
    }
    if d <= 0.0 {
        return Ok(0.0);
    }
    Ok((-(-d / sigma_sq).exp_m1()).clamp(0.0, 1.0))
}

/// Gradient of the keep probability with respect to `(α, β, γ)`, holding `σ²` fixed.
///
/// Zero where the distance is negative, since the probability is clamped there.
pub fn probability_gradient(delta: ScanDelta, params: &SamplerParams, sigma_sq: f64) -> [f64; 3] {
    let d = distance(delta.theta_dot, delta.delta_i, params);
    if d < 0.0 {
        return [0.0; 3];
    }
    let g = (-d / sigma_sq).exp() / sigma_sq;
    [g * delta.theta_dot, g * delta.delta_i, g]
}

/// Computes the keep-probability heatmap of a stream. Sample 0 always gets `P = 1`.
pub fn heatmap(
    stream: &SampleStream,
    params: &SamplerParams,
    mode: VarianceMode,
) -> Result<Heatmap> {
    params.validate()?;
    let deltas = scan_deltas(stream)?;
    let mut d_values = Vec::with_capacity(deltas.len());
    d_values.push(0.0);
    d_values.extend(
        deltas
            .iter()
            .skip(1)
            .flatten()
            .map(|dl| distance(dl.theta_dot, dl.delta_i, params)),
    );

    let mut p = Vec::with_capacity(d_values.len());
    p.push(1.0);
    let sigma_sq = match mode {
        VarianceMode::TwoPass => {
            let var = population_variance(&d_values[1..]).max(VARIANCE_FLOOR);
            for d in &d_values[1..] {
                p.push(probability(*d, var)?);
            }
            var
        }
        VarianceMode::Streaming => {
            let mut running = RunningStats::new();
            let mut var = VARIANCE_FLOOR;
            for d in &d_values[1..] {
                running.push(*d);
                var = running.population_variance().max(VARIANCE_FLOOR);
                p.push(probability(*d, var)?);
            }
            var
        }
    };

    Ok(Heatmap {
        width: stream.grid_width(),
        height: stream.grid_height(),
        p,
        sigma_sq,
        d_values,
    })
}

/// Log-odds of the target samplerate, `ln(n / (N - n))`.
pub fn rate_logit(n: usize, total: usize) -> Result<f64> {
    if n == 0 || n >= total {
        return Err(domain(format!(
            "target {n} of {total} has no finite log-odds"
        )));
    }
    Ok((n as f64 / (total - n) as f64).ln())
}

/// Shifts the heatmap's log-odds by the log-odds of the target samplerate `n / N`.
///
/// Every probability becomes `logistic(logit(p) + ln(n / (N - n)))`, so a sample
/// with `p = 1/2` is kept at exactly the target rate, probabilities of 0 and 1
/// are fixed points, and the ordering of samples is unchanged.
pub fn normalize(hmap: &Heatmap, n: usize, total: usize) -> Result<Heatmap> {
    if total != hmap.len() {
        return Err(crate::error::dimension(format!(
            "normalizing a {}-sample heatmap against N = {total}",
            hmap.len()
        )));
    }
    rate_logit(n, total)?;
    if 2 * n == total {
        return Ok(hmap.clone());
    }
    let r = n as f64 / total as f64;
    let p = hmap
        .p
        .iter()
        .map(|&p| {
            let kept = p * r;
            kept / (kept + (1.0 - p) * (1.0 - r))
        })
        .collect();
    Ok(Heatmap { p, ..hmap.clone() })
}

/// Affine map of the values onto `[0, 1]`; a constant input maps to all `0.5`.
pub fn rescale01(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            (lo.min(*v), hi.max(*v))
        });
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

/// Keeps exactly the `n` highest-probability samples, lower index first on ties.
pub fn threshold(hmap: &Heatmap, n: usize) -> Result<SampleMask> {
    top_k(&hmap.p, n)
}

pub(crate) fn top_k(scores: &[f64], n: usize) -> Result<SampleMask> {
    if n > scores.len() {
        return Err(domain(format!(
            "budget {n} exceeds {} samples",
            scores.len()
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    SampleMask::from_indices(scores.len(), order.into_iter().take(n))
}

/// Keeps each sample independently with its heatmap probability.
pub fn bernoulli_mask(hmap: &Heatmap, rng: &mut impl Rng) -> SampleMask {
    SampleMask::from_keep(hmap.p.iter().map(|p| rng.random::<f64>() < *p).collect())
}

/// How a heatmap is turned into a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    /// Exactly `n` samples, top of the heatmap.
    #[default]
    TopK,
    /// Independent draws from the rate-normalized heatmap.
    Bernoulli,
}

/// Normalizes `hmap` to the target `n / N` and selects samples by `selection`.
///
/// Normalization is strictly order-preserving, so top-k ranks the raw map:
/// the selected set is the same, and values that the shift would round
/// together near 0 or 1 keep their order.
pub fn select(
    hmap: &Heatmap,
    n: usize,
    selection: Selection,
    rng: &mut impl Rng,
) -> Result<SampleMask> {
    let total = hmap.len();
    if n == 0 {
        return Ok(SampleMask::empty(total));
    }
    if n >= total {
        return threshold(hmap, n);
    }
    match selection {
        Selection::TopK => {
            rate_logit(n, total)?;
            threshold(hmap, n)
        }
        Selection::Bernoulli => Ok(bernoulli_mask(&normalize(hmap, n, total)?, rng)),
    }
}

/// The kept samples as a sparse image on the scan lattice.
pub fn apply_mask(stream: &SampleStream, mask: &SampleMask) -> Result<SparseImage> {
    mask.check_len(stream.len())?;
    let points = mask
        .indices()
        .map(|i| {
            let (r, c) = stream.grid_position(i);
            (r, c, stream.value(i).to_vec())
        })
        .collect();
    SparseImage::new(
        stream.grid_width(),
        stream.grid_height(),
        stream.channels(),
        points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::Image;
    use crate::scanner::{scan, ScanConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn stream_of(values: &[f64]) -> SampleStream {
        let img = Image::new(values.len(), 1, 1, values.to_vec()).unwrap();
        scan(&img, &ScanConfig::identity(values.len(), 1)).unwrap()
    }

    fn hmap(p: &[f64]) -> Heatmap {
        Heatmap::from_probabilities(p.len(), 1, p.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        assert_eq!(distance(0.0, 0.0, &SamplerParams::new(1.0, 1.0, 0.0)), 0.0);
        assert_eq!(distance(1.0, 0.0, &SamplerParams::new(2.0, 5.0, 0.5)), 2.5);
        let p = SamplerParams::new(0.7, -1.3, 0.0);
        assert!((distance(2.0 * 0.4, 2.0 * 0.9, &p) - 2.0 * distance(0.4, 0.9, &p)).abs() < 1e-15);
    }

    #[test]
    fn probability_examples() {
        assert_eq!(probability(0.0, 3.0).unwrap(), 0.0);
        assert!((probability(2.5, 2.5).unwrap() - 0.632_120_558_8).abs() < 1e-9);
        assert_eq!(probability(f64::INFINITY, 1.0).unwrap(), 1.0);
        assert_eq!(probability(1e6, 1.0).unwrap(), 1.0);
        assert_eq!(probability(-4.0, 1.0).unwrap(), 0.0);
        assert!(probability(1.0, 0.0).is_err());
        assert!(probability(1.0, -1.0).is_err());
    }

    #[test]
    fn constant_image_heatmap() {
        let s = stream_of(&[0.4; 6]);
        let h = heatmap(&s, &SamplerParams::new(1.0, 1.0, 0.0), VarianceMode::TwoPass).unwrap();
        assert_eq!(h.sigma_sq(), VARIANCE_FLOOR);
        assert_eq!(h.p()[0], 1.0);
        assert!(h.p()[1..].iter().all(|p| *p > 0.999_999));

        let h = heatmap(&s, &SamplerParams::new(0.0, 1.0, 0.0), VarianceMode::TwoPass).unwrap();
        assert!(h.p()[1..].iter().all(|p| *p == 0.0));
    }

    #[test]
    fn step_edge_peaks_at_edge() {
        let mut values = vec![0.1; 12];
        values[7..].iter_mut().for_each(|v| *v = 0.9);
        let s = stream_of(&values);
        let h = heatmap(&s, &SamplerParams::new(0.0, 1.0, 0.0), VarianceMode::TwoPass).unwrap();
        // brute force: only D(7) = 0.8 is non-zero among i >= 1
        let d: Vec<f64> = (1..12).map(|i| (values[i] - values[i - 1]).abs()).collect();
        let mean = d.iter().sum::<f64>() / 11.0;
        let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 11.0;
        assert!((h.sigma_sq() - var).abs() < 1e-15);
        let argmax = (1..12)
            .max_by(|&a, &b| h.p()[a].total_cmp(&h.p()[b]))
            .unwrap();
        assert_eq!(argmax, 7);
        assert!((h.p()[7] - (1.0 - (-0.8 / var).exp())).abs() < 1e-12);
    }

    #[test]
    fn empty_stream_and_bad_params() {
        let s = stream_of(&[0.0, 1.0]);
        assert!(heatmap(&s, &SamplerParams::new(f64::NAN, 0.0, 0.0), VarianceMode::TwoPass).is_err());
    }

    #[test]
    fn normalize_examples() {
        let h10 = Heatmap::from_probabilities(10, 1, vec![0.2, 0.9, 0.5, 0.0, 1.0, 0.3, 0.3, 0.7, 0.1, 0.6]).unwrap();
        let same = normalize(&h10, 5, 10).unwrap();
        for (a, b) in same.p().iter().zip(h10.p()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((rate_logit(1, 4).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((rate_logit(1, 4).unwrap() + 1.098_612_288_7).abs() < 1e-9);

        assert!(matches!(
            normalize(&h10, 25, 100),
            Err(Error::Dimension(_))
        ));
        let flat = hmap(&[0.5; 8]);
        assert!(normalize(&flat, 4, 8).unwrap().p().iter().all(|p| *p == 0.5));
        assert!(normalize(&flat, 2, 8).unwrap().p().iter().all(|p| (p - 0.25).abs() < 1e-15));
        assert!(normalize(&flat, 0, 8).is_err());
        assert!(normalize(&flat, 8, 8).is_err());
    }

    #[test]
    fn normalize_shifts_log_odds() {
        let h = hmap(&[0.2, 0.7, 0.0, 1.0]);
        let out = normalize(&h, 1, 4).unwrap();
        let shift = rate_logit(1, 4).unwrap();
        for (q, p) in out.p().iter().zip(h.p()) {
            if *p == 0.0 || *p == 1.0 {
                assert_eq!(q, p);
            } else {
                let expected = 1.0 / (1.0 + (-((p / (1.0 - p)).ln() + shift)).exp());
                assert!((q - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rescale_examples() {
        assert_eq!(rescale01(&[2.0, 4.0, 3.0]), vec![0.0, 1.0, 0.5]);
        assert_eq!(rescale01(&[7.0; 3]), vec![0.5; 3]);
    }

    #[test]
    fn threshold_examples() {
        let h = hmap(&[0.9, 0.1, 0.5, 0.5]);
        let m = threshold(&h, 2).unwrap();
        assert_eq!(m.indices().collect::<Vec<_>>(), vec![0, 2]);
        assert_eq!(threshold(&h, 4).unwrap().kept(), 4);
        assert_eq!(threshold(&h, 0).unwrap().kept(), 0);
        assert!(threshold(&h, 5).is_err());
    }

    #[test]
    fn apply_mask_examples() {
        let s = stream_of(&[0.9, 0.1, 0.5, 0.5]);
        let h = hmap(&[0.9, 0.1, 0.5, 0.5]);
        let sparse = apply_mask(&s, &threshold(&h, 2).unwrap()).unwrap();
        assert_eq!(
            sparse.points(),
            &[(0, 0, vec![0.9]), (0, 2, vec![0.5])]
        );
        assert_eq!(apply_mask(&s, &SampleMask::full(4)).unwrap().points().len(), 4);
        assert!(apply_mask(&s, &SampleMask::empty(4)).unwrap().points().is_empty());
        assert!(apply_mask(&s, &SampleMask::full(3)).is_err());
    }

    #[test]
    fn bernoulli_is_seeded() {
        let h = hmap(&[0.3; 64]);
        let a = bernoulli_mask(&h, &mut ChaCha8Rng::seed_from_u64(3));
        let b = bernoulli_mask(&h, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let all = bernoulli_mask(&hmap(&[1.0; 16]), &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(all.kept(), 16);
    }

    #[test]
    fn streaming_variance_warms_up() {
        let s = stream_of(&[0.0, 0.5, 0.5, 0.5, 1.0]);
        let h = heatmap(&s, &SamplerParams::new(0.0, 1.0, 0.0), VarianceMode::Streaming).unwrap();
        // first distance sees a single value, so the floor applies and P saturates
        assert!(h.p()[1] > 0.999_999);
        assert_eq!(h.p()[2], 0.0);
    }
}
