//! Fitting sampler weights against the proxy task, samplerate sweeps and
//! achieved-rate reports.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::optim::NelderMead;
use crate::pipeline::{budget, mix_seed, sample_image, Fill, Pipeline, Sampler};
use crate::sauce::{bernoulli_mask, heatmap, normalize, select, SamplerParams, Selection, VarianceMode};
use crate::scanner::{scan, ScanConfig};
use crate::taskproxy::{
    accuracy, droprate_loss, mean_cross_entropy, train_classifier, LabeledDataset, TrainConfig,
};

/// Settings shared by the objective and the parameter search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Per-example target samplerates are drawn uniformly from this range.
    pub rate_range: (f64, f64),
    /// Weight of the droprate term.
    pub lambda_drop: f64,
    /// Simplex iterations per start.
    pub iterations: usize,
    /// Random restarts in addition to the start at `(1, 1, 0)`.
    pub restarts: usize,
    pub seed: u64,
    pub selection: Selection,
    pub fill: Fill,
    /// Share of the objective's dataset the classifier is retrained on.
    pub classifier_fraction: f64,
    pub train: TrainConfig,
    /// Share of `fit_params`' dataset used for fitting; the rest validates.
    pub train_fraction: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            rate_range: (0.05, 0.95),
            lambda_drop: 1.0,
            iterations: 40,
            restarts: 3,
            seed: 0,
            selection: Selection::TopK,
            fill: Fill::Nearest,
            classifier_fraction: 0.5,
            train: TrainConfig::default(),
            train_fraction: 0.8,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.rate_range;
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return Err(domain(format!("rate range ({lo}, {hi}) must satisfy 0 < lo <= hi < 1")));
        }
        if !(self.lambda_drop >= 0.0) {
            return Err(domain("lambda_drop must be non-negative"));
        }
        if !(self.classifier_fraction > 0.0 && self.classifier_fraction <= 1.0) {
            return Err(domain("classifier fraction must be in (0, 1]"));
        }
        Ok(())
    }

    /// Target samplerate of example `k`.
    pub fn target_rate(&self, k: usize) -> f64 {
        let (lo, hi) = self.rate_range;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(self.seed, k as u64));
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    }
}

/// Task and droprate parts of one objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveParts {
    pub task: f64,
    pub droprate: f64,
    pub total: f64,
}

fn sample_dataset(
    params: &SamplerParams,
    data: &LabeledDataset,
    config: &FitConfig,
    salt: u64,
) -> Result<(LabeledDataset, f64)> {
    let sampler = Sampler::Sauce {
        params: *params,
        variance: VarianceMode::TwoPass,
        selection: config.selection,
    };
    let drops: Vec<f64> = data
        .items()
        .par_iter()
        .enumerate()
        .map(|(k, (img, _))| {
            let stream = scan(img, &ScanConfig::identity(img.width(), img.height()))?;
            let total = stream.len();
            let n = budget(config.target_rate(k), total)?;
            let h = heatmap(&stream, params, VarianceMode::TwoPass)?;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed ^ salt, k as u64));
            let mask = select(&h, n, config.selection, &mut rng)?;
            Ok(droprate_loss(&mask, n, total))
        })
        .collect::<Result<_>>()?;
    let sampled = data.map_images(|k, img| {
        let rate = config.target_rate(k);
        Ok(sample_image(img, &sampler, rate, config.fill, mix_seed(config.seed ^ salt, k as u64))?.image)
    })?;
    Ok((sampled, drops.iter().sum::<f64>() / drops.len() as f64))
}

/// Mean task cross-entropy on sampled input plus `lambda_drop` times the mean droprate loss.
///
/// The classifier is retrained on the sampled first `classifier_fraction` of
/// the dataset and scored on all of it.
pub fn objective_parts(params: &SamplerParams, dataset: &LabeledDataset, config: &FitConfig) -> Result<ObjectiveParts> {
    config.validate()?;
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    let (sampled, droprate) = sample_dataset(params, dataset, config, 0)?;
    let fit_n = ((dataset.len() as f64 * config.classifier_fraction).ceil() as usize).max(1);
    let classifier = train_classifier(&sampled.take(fit_n), &config.train)?;
    let task = mean_cross_entropy(&classifier, &sampled)?;
    let total = task + config.lambda_drop * droprate;
    if !total.is_finite() {
        return Err(Error::Numeric(format!("objective {total} at {params:?}")));
    }
    Ok(ObjectiveParts {
        task,
        droprate,
        total,
    })
}

pub fn objective(params: &SamplerParams, dataset: &LabeledDataset, config: &FitConfig) -> Result<f64> {
    Ok(objective_parts(params, dataset, config)?.total)
}

/// Classifier trained on sampled `train`, scored on sampled `validation`.
pub fn validation_objective(
    params: &SamplerParams,
    train: &LabeledDataset,
    validation: &LabeledDataset,
    config: &FitConfig,
) -> Result<f64> {
    config.validate()?;
    params.validate()?;
    let (sampled_train, _) = sample_dataset(params, train, config, 0)?;
    let (sampled_val, droprate) = sample_dataset(params, validation, config, 1)?;
    let classifier = train_classifier(&sampled_train, &config.train)?;
    Ok(mean_cross_entropy(&classifier, &sampled_val)? + config.lambda_drop * droprate)
}

/// Result of [`fit_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: SamplerParams,
    pub objective: f64,
    pub validation_objective: f64,
    pub init_validation_objective: f64,
    /// `(iteration, best objective)` across all starts.
    pub log: Vec<(usize, f64)>,
}

impl FitResult {
    pub fn write_log(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "iteration,objective")?;
        for (i, v) in &self.log {
            writeln!(w, "{i},{v:.6}")?;
        }
        Ok(())
    }
}

pub const FIT_INIT: SamplerParams = SamplerParams {
    alpha: 1.0,
    beta: 1.0,
    gamma: 0.0,
};

/// Simplex search over `(α, β, γ)` from `(1, 1, 0)` plus random restarts.
///
/// The dataset is split into fitting and validation parts; among the init
/// and each start's optimum, the one with the lowest validation objective is returned.
pub fn fit_params(dataset: &LabeledDataset, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    if dataset.len() < 2 {
        return Err(Error::Empty("fit needs at least two examples"));
    }
    let (train, validation) = dataset.split(config.train_fraction, config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, u64::MAX));
    let mut starts = vec![FIT_INIT];
    for _ in 0..config.restarts {
        starts.push(SamplerParams::new(
            rng.random_range(-2.0..2.0),
            rng.random_range(-2.0..2.0),
            rng.random_range(-1.0..1.0),
        ));
    }
    let nm = NelderMead {
        max_iterations: config.iterations,
        initial_step: 1.0,
        tolerance: 1e-6,
        ..NelderMead::default()
    };

    let mut log = Vec::new();
    let mut candidates = vec![(FIT_INIT, objective(&FIT_INIT, &train, config)?)];
    for start in &starts {
        let m = nm.minimize(
            |x| {
                objective(&SamplerParams::from_slice(x), &train, config).unwrap_or(f64::INFINITY)
            },
            &start.to_array(),
        );
        let base = log.len();
        log.extend(m.history.iter().enumerate().map(|(i, v)| (base + i, *v)));
        if m.value.is_finite() {
            candidates.push((SamplerParams::from_slice(&m.x), m.value));
        }
    }

    let mut best: Option<(SamplerParams, f64, f64)> = None;
    let mut init_validation = f64::NAN;
    for (k, (params, value)) in candidates.into_iter().enumerate() {
        let v = validation_objective(&params, &train, &validation, config)?;
        if k == 0 {
            init_validation = v;
        }
        if best.is_none_or(|(_, _, bv)| v < bv) {
            best = Some((params, value, v));
        }
    }
    let (params, objective, validation_objective) = best.expect("init is always a candidate");
    Ok(FitResult {
        params,
        objective,
        validation_objective,
        init_validation_objective: init_validation,
        log,
    })
}

/// One cell of a samplerate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub sampler: String,
    pub rate: f64,
    pub metric: f64,
    pub achieved_rate: f64,
}

/// Metric against samplerate, sorted by rate then sampler name.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RateCurve {
    pub points: Vec<CurvePoint>,
}

impl RateCurve {
    pub fn new(mut points: Vec<CurvePoint>) -> Self {
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate).then_with(|| a.sampler.cmp(&b.sampler)));
        Self { points }
    }

    pub fn get(&self, sampler: &str, rate: f64) -> Option<&CurvePoint> {
        self.points
            .iter()
            .find(|p| p.sampler == sampler && (p.rate - rate).abs() < 1e-12)
    }

    /// `sampler,rate,metric,achieved_rate`, six decimals.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "sampler,rate,metric,achieved_rate")?;
        for p in &self.points {
            writeln!(w, "{},{:.6},{:.6},{:.6}", p.sampler, p.rate, p.metric, p.achieved_rate)?;
        }
        Ok(())
    }
}

/// Name of the unsampled reference row in a sweep.
pub const FULL_REFERENCE: &str = "full";

/// Settings for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub fill: Fill,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fill: Fill::Nearest,
            train: TrainConfig::default(),
            seed: 0,
        }
    }
}

/// Test accuracy of a classifier retrained on images sampled by `pipeline`.
pub fn accuracy_at(train: &LabeledDataset, test: &LabeledDataset, pipeline: &Pipeline, train_config: &TrainConfig) -> Result<(f64, f64)> {
    let sampled_train = train.map_images(|k, img| Ok(pipeline.run(img, k as u64)?.image))?;
    let classifier = train_classifier(&sampled_train, train_config)?;
    let test_pipeline = Pipeline {
        seed: pipeline.seed ^ 0x5EED,
        ..pipeline.clone()
    };
    let runs = test
        .items()
        .par_iter()
        .enumerate()
        .map(|(k, (img, label))| Ok((test_pipeline.run(img, k as u64)?, *label)))
        .collect::<Result<Vec<_>>>()?;
    let achieved = runs.iter().map(|(s, _)| s.achieved_rate).sum::<f64>() / runs.len().max(1) as f64;
    let sampled_test = LabeledDataset::new(
        runs.into_iter().map(|(s, l)| (s.image, l)).collect(),
        test.class_count(),
    )?;
    Ok((accuracy(&classifier, &sampled_test)?, achieved))
}

/// Accuracy of every sampler at every rate, plus the unsampled reference at rate 1.
///
/// For each cell the classifier is retrained on training images passed through
/// the same sampler at the same rate.
pub fn sweep(
    train: &LabeledDataset,
    test: &LabeledDataset,
    rates: &[f64],
    samplers: &[Sampler],
    config: &SweepConfig,
) -> Result<RateCurve> {
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r <= 1.0)) {
        return Err(domain(format!("sweep rate {r} outside (0, 1]")));
    }
    let cells: Vec<(&Sampler, f64)> = samplers
        .iter()
        .flat_map(|s| rates.iter().map(move |r| (s, *r)))
        .collect();
    let mut points = cells
        .par_iter()
        .map(|(sampler, rate)| {
            let pipeline = Pipeline {
                sampler: (*sampler).clone(),
                rate: *rate,
                fill: config.fill,
                seed: config.seed,
            };
            let (metric, achieved_rate) = accuracy_at(train, test, &pipeline, &config.train)?;
            Ok(CurvePoint {
                sampler: sampler.name(),
                rate: *rate,
                metric,
                achieved_rate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let reference = train_classifier(train, &config.train)?;
    points.push(CurvePoint {
        sampler: FULL_REFERENCE.into(),
        rate: 1.0,
        metric: accuracy(&reference, test)?,
        achieved_rate: 1.0,
    });
    Ok(RateCurve::new(points))
}

/// Mean kept fraction under Bernoulli selection, with and without rate normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchievedRate {
    pub target: f64,
    pub normalized: f64,
    pub unnormalized: f64,
}

/// For each target rate, the mean fraction of samples kept by Bernoulli draws
/// from the normalized and from the raw heatmap.
pub fn achieved_rate_report(
    dataset: &LabeledDataset,
    params: &SamplerParams,
    rates: &[f64],
    seed: u64,
) -> Result<Vec<AchievedRate>> {
    if dataset.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if let Some(r) = rates.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(domain(format!("target rate {r} must lie in (0, 1)")));
    }
    let maps = dataset
        .items()
        .par_iter()
        .map(|(img, _)| {
            let stream = scan(img, &ScanConfig::identity(img.width(), img.height()))?;
            heatmap(&stream, params, VarianceMode::TwoPass)
        })
        .collect::<Result<Vec<_>>>()?;
    rates
        .iter()
        .enumerate()
        .map(|(ri, &target)| {
            let mut normalized = 0.0;
            let mut unnormalized = 0.0;
            for (k, h) in maps.iter().enumerate() {
                let total = h.len();
                let n = ((target * total as f64).round() as usize).clamp(1, total - 1);
                let salt = mix_seed(seed, (ri * maps.len() + k) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(salt);
                normalized += bernoulli_mask(&normalize(h, n, total)?, &mut rng).rate();
                unnormalized += bernoulli_mask(h, &mut rng).rate();
            }
            let count = maps.len() as f64;
            Ok(AchievedRate {
                target,
                normalized: normalized / count,
                unnormalized: unnormalized / count,
            })
        })
        .collect()
}

pub fn write_report_csv(report: &[AchievedRate], mut w: impl Write) -> Result<()> {
    writeln!(w, "target,achieved_normalized,achieved_unnormalized")?;
    for r in report {
        writeln!(w, "{:.6},{:.6},{:.6}", r.target, r.normalized, r.unnormalized)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{digits, DigitStyle};

    fn small() -> LabeledDataset {
        digits(4, &DigitStyle { size: 12, ..DigitStyle::default() }, 7)
    }

    fn quick() -> FitConfig {
        FitConfig {
            iterations: 3,
            restarts: 1,
            train: TrainConfig {
                epochs: 5,
                ..TrainConfig::default()
            },
            ..FitConfig::default()
        }
    }

    #[test]
    fn topk_droprate_term_vanishes() {
        let ds = small();
        let cfg = quick();
        let parts = objective_parts(&SamplerParams::default(), &ds, &cfg).unwrap();
        assert_eq!(parts.droprate, 0.0);
        let no_drop = FitConfig { lambda_drop: 0.0, ..cfg };
        assert_eq!(objective(&SamplerParams::default(), &ds, &no_drop).unwrap(), parts.task);
        let heavy = FitConfig { lambda_drop: 50.0, ..cfg };
        assert_eq!(objective(&SamplerParams::default(), &ds, &heavy).unwrap(), parts.task);
    }

    #[test]
    fn bernoulli_with_saturated_heatmap() {
        // gamma dominates and P saturates at 1 everywhere, so every sample is kept
        let ds = small();
        let cfg = FitConfig {
            rate_range: (0.25, 0.25),
            selection: Selection::Bernoulli,
            ..quick()
        };
        let parts = objective_parts(&SamplerParams::new(0.0, 0.0, 1e9), &ds, &cfg).unwrap();
        assert!((parts.droprate - 0.75).abs() < 1e-12, "{parts:?}");
        assert!((parts.total - parts.task - 0.75 * cfg.lambda_drop).abs() < 1e-12);
    }

    #[test]
    fn objective_is_deterministic_and_monotone_in_lambda() {
        let ds = small();
        let cfg = FitConfig {
            selection: Selection::Bernoulli,
            ..quick()
        };
        let p = SamplerParams::new(0.2, 3.0, 0.1);
        let a = objective_parts(&p, &ds, &cfg).unwrap();
        assert_eq!(a, objective_parts(&p, &ds, &cfg).unwrap());
        assert!(a.droprate > 0.0);
        let more = objective(&p, &ds, &FitConfig { lambda_drop: 2.0, ..cfg }).unwrap();
        assert!(more > a.total);
    }

    #[test]
    fn invalid_configs() {
        let ds = small();
        let bad = FitConfig {
            rate_range: (0.5, 0.2),
            ..quick()
        };
        assert!(objective(&SamplerParams::default(), &ds, &bad).is_err());
        let empty = LabeledDataset::new(Vec::new(), 10).unwrap();
        assert!(matches!(objective(&SamplerParams::default(), &empty, &quick()), Err(Error::Empty(_))));
    }

    #[test]
    fn fit_is_deterministic_and_never_worse_than_init() {
        let ds = small();
        let a = fit_params(&ds, &quick()).unwrap();
        let b = fit_params(&ds, &quick()).unwrap();
        assert_eq!(a, b);
        assert!(a.validation_objective <= a.init_validation_objective);
        assert!(a.objective.is_finite());
    }

    #[test]
    fn sweep_shape_and_identity_row() {
        let ds = small();
        let (train, test) = ds.split(0.7, 1);
        let samplers = vec![Sampler::sauce(SamplerParams::default()), Sampler::Uniform, Sampler::Random];
        let rates = [0.2, 0.5, 1.0];
        let cfg = SweepConfig {
            train: TrainConfig { epochs: 5, ..TrainConfig::default() },
            ..SweepConfig::default()
        };
        let curve = sweep(&train, &test, &rates, &samplers, &cfg).unwrap();
        assert_eq!(curve.points.len(), rates.len() * samplers.len() + 1);
        let full = curve.get(FULL_REFERENCE, 1.0).unwrap().metric;
        for s in &samplers {
            assert_eq!(curve.get(&s.name(), 1.0).unwrap().metric, full);
        }
        assert!(curve.points.windows(2).all(|w| w[0].rate <= w[1].rate));
        let mut csv = Vec::new();
        curve.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 1 + curve.points.len());
        assert!(text.lines().nth(1).unwrap().starts_with("random,0.200000,"));
    }

    #[test]
    fn report_rejects_full_rate() {
        assert!(achieved_rate_report(&small(), &SamplerParams::default(), &[1.0], 0).is_err());
        let r = achieved_rate_report(&small(), &SamplerParams::default(), &[0.5], 0).unwrap();
        assert_eq!(r.len(), 1);
    }
}
