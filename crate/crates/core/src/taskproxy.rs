//! Linear softmax classifier standing in for the downstream task network.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{dimension, domain, Error, Result};
use crate::image::Image;
use crate::mask::SampleMask;
use crate::pipeline::Pipeline;

/// `|n/N - (1/N)·Σ keep|`.
pub fn droprate_loss(mask: &SampleMask, n: usize, total: usize) -> f64 {
    let total = total.max(1) as f64;
    (n as f64 / total - mask.kept() as f64 / total).abs()
}

/// Images with class labels; all images share dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    items: Vec<(Image, usize)>,
    class_count: usize,
}

impl LabeledDataset {
    pub fn new(items: Vec<(Image, usize)>, class_count: usize) -> Result<Self> {
        if class_count < 2 {
            return Err(domain("a classification task needs at least two classes"));
        }
        if let Some((_, l)) = items.iter().find(|(_, l)| *l >= class_count) {
            return Err(domain(format!("label {l} >= class count {class_count}")));
        }
        if let Some((first, _)) = items.first() {
            let shape = (first.width(), first.height(), first.channels());
            if items
                .iter()
                .any(|(img, _)| (img.width(), img.height(), img.channels()) != shape)
            {
                return Err(dimension("dataset images differ in shape"));
            }
        }
        Ok(Self { items, class_count })
    }

    pub fn items(&self) -> &[(Image, usize)] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_len(&self) -> usize {
        self.items
            .first()
            .map(|(img, _)| img.data().len())
            .unwrap_or(0)
    }

    /// Deterministic shuffle-and-split; the first part holds `fraction` of the items.
    pub fn split(&self, fraction: f64, seed: u64) -> (Self, Self) {
        let mut items = self.items.clone();
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cut = ((items.len() as f64) * fraction).round() as usize;
        let rest = items.split_off(cut.min(items.len()));
        (
            Self {
                items,
                class_count: self.class_count,
            },
            Self {
                items: rest,
                class_count: self.class_count,
            },
        )
    }

    pub fn take(&self, count: usize) -> Self {
        Self {
            items: self.items.iter().take(count).cloned().collect(),
            class_count: self.class_count,
        }
    }

    /// Same labels, images replaced through `f`.
    pub fn map_images(&self, f: impl Fn(usize, &Image) -> Result<Image> + Sync) -> Result<Self> {
        let items = self
            .items
            .par_iter()
            .enumerate()
            .map(|(k, (img, label))| Ok((f(k, img)?, *label)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(items, self.class_count)
    }

    /// Loads `root/<class>/<image>` (PGM or PNG). Classes are the sorted
    /// subdirectory names; items are shuffled with `seed`.
    pub fn load_dir(root: impl AsRef<Path>, seed: u64) -> Result<(Self, Vec<String>)> {
        let root = root.as_ref();
        let mut classes: Vec<String> = std::fs::read_dir(root)?
            .filter_map(|e| e.ok())
            .filter(|e| e.path().is_dir())
            .map(|e| e.file_name().to_string_lossy().into_owned())
            .collect();
        classes.sort();
        if classes.len() < 2 {
            return Err(Error::Empty("dataset needs at least two class directories"));
        }
        let mut items = Vec::new();
        for (label, class) in classes.iter().enumerate() {
            let mut files: Vec<_> = std::fs::read_dir(root.join(class))?
                .filter_map(|e| e.ok())
                .map(|e| e.path())
                .filter(|p| {
                    matches!(
                        p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
                        Some("pgm" | "png")
                    )
                })
                .collect();
            if files.is_empty() {
                return Err(Error::Empty("class directory without images"));
            }
            files.sort();
            for f in files {
                items.push((Image::open(&f)?, label));
            }
        }
        items.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        Ok((Self::new(items, classes.len())?, classes))
    }

    /// Writes the dataset as `root/<class index>/<item>.pgm`.
    pub fn save_dir(&self, root: impl AsRef<Path>) -> Result<()> {
        let root = root.as_ref();
        let width = self.class_count.to_string().len();
        for class in 0..self.class_count {
            std::fs::create_dir_all(root.join(format!("{class:0width$}")))?;
        }
        for (k, (img, label)) in self.items.iter().enumerate() {
            img.save(root.join(format!("{label:0width$}")).join(format!("{k:05}.pgm")))?;
        }
        Ok(())
    }
}

/// Mini-batch gradient descent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of the `½·‖W‖²` penalty.
    pub l2: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            learning_rate: 0.5,
            batch_size: 16,
            l2: 1e-3,
            seed: 0,
        }
    }
}

/// Multinomial logistic regression over flattened pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearClassifier {
    classes: usize,
    features: usize,
    /// Row-major `classes x features`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            classes,
            features,
            weights: vec![0.0; classes * features],
            bias: vec![0.0; classes],
        }
    }

    pub fn from_parts(classes: usize, features: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if classes < 2 || weights.len() != classes * features || bias.len() != classes {
            return Err(dimension("classifier parameter shapes disagree"));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite classifier parameter".into()));
        }
        Ok(Self {
            classes,
            features,
            weights,
            bias,
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks(self.features)
            .zip(&self.bias)
            .map(|(w, b)| w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b)
            .collect()
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        softmax(&self.logits(x))
    }

    /// Most likely class, lowest index on ties.
    pub fn predict(&self, x: &[f64]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (k, z) in logits.iter().enumerate() {
            if *z > logits[best] {
                best = k;
            }
        }
        best
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.features {
            return Err(dimension(format!(
                "classifier expects {} features, image has {}",
                self.features,
                x.len()
            )));
        }
        Ok(())
    }

    /// Cross-entropy of one example.
    pub fn cross_entropy(&self, x: &[f64], label: usize) -> f64 {
        let logits = self.logits(x);
        log_sum_exp(&logits) - logits[label]
    }

    /// Mean cross-entropy plus `½·l2·‖W‖²`, and its gradient `(dW, db)`.
    pub fn loss_and_gradient(&self, batch: &[(&[f64], usize)], l2: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let mut gw = vec![0.0; self.weights.len()];
        let mut gb = vec![0.0; self.classes];
        let mut loss = 0.0;
        let scale = 1.0 / batch.len().max(1) as f64;
        for (x, label) in batch {
            let logits = self.logits(x);
            let lse = log_sum_exp(&logits);
            loss += lse - logits[*label];
            for (k, z) in logits.iter().enumerate() {
                let err = ((z - lse).exp() - if k == *label { 1.0 } else { 0.0 }) * scale;
                gb[k] += err;
                for (g, xi) in gw[k * self.features..(k + 1) * self.features].iter_mut().zip(x.iter()) {
                    *g += err * xi;
                }
            }
        }
        let penalty: f64 = self.weights.iter().map(|w| w * w).sum::<f64>() * 0.5 * l2;
        for (g, w) in gw.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        (loss * scale + penalty, gw, gb)
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|v| (v - lse).exp()).collect()
}

/// Trains a classifier by mini-batch gradient descent on softmax cross-entropy.
pub fn train_classifier(train: &LabeledDataset, config: &TrainConfig) -> Result<LinearClassifier> {
    if train.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let mut model = LinearClassifier::zeros(train.class_count(), train.feature_len());
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let batch_size = config.batch_size.max(1);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(batch_size) {
            let batch: Vec<(&[f64], usize)> = chunk
                .iter()
                .map(|&i| (train.items[i].0.data(), train.items[i].1))
                .collect();
            let (_, gw, gb) = model.loss_and_gradient(&batch, config.l2);
            for (w, g) in model.weights.iter_mut().zip(&gw) {
                *w -= config.learning_rate * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= config.learning_rate * g;
            }
        }
    }
    if model.weights.iter().chain(&model.bias).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("classifier training diverged".into()));
    }
    Ok(model)
}

/// Fraction of items the classifier labels correctly, as given.
pub fn accuracy(classifier: &LinearClassifier, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let correct = data
        .items
        .iter()
        .map(|(img, label)| {
            classifier.check(img.data())?;
            Ok(usize::from(classifier.predict(img.data()) == *label))
        })
        .sum::<Result<usize>>()?;
    Ok(correct as f64 / data.len() as f64)
}

/// Mean cross-entropy over a dataset.
pub fn mean_cross_entropy(classifier: &LinearClassifier, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("evaluation set"));
    }
    let mut total = 0.0;
    for (img, label) in &data.items {
        classifier.check(img.data())?;
        total += classifier.cross_entropy(img.data(), *label);
    }
    Ok(total / data.len() as f64)
}

/// Accuracy on test images after they pass through `pipeline`.
pub fn evaluate(classifier: &LinearClassifier, test: &LabeledDataset, pipeline: &Pipeline) -> Result<f64> {
    let sampled = test.map_images(|k, img| Ok(pipeline.run(img, k as u64)?.image))?;
    accuracy(classifier, &sampled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::unstructured;
    use crate::pipeline::Sampler;
    use rand::Rng;

    fn toy_separable() -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let items = (0..40)
            .map(|k| {
                let label = k % 2;
                let img = Image::from_fn(2, 2, |r, _| {
                    let base = if (r == 0) == (label == 0) { 0.8 } else { 0.2 };
                    base + rng.random_range(-0.1..0.1)
                })
                .unwrap();
                (img, label)
            })
            .collect();
        LabeledDataset::new(items, 2).unwrap()
    }

    #[test]
    fn droprate_examples() {
        let m = SampleMask::from_indices(8, [1, 4]).unwrap();
        assert_eq!(droprate_loss(&m, 2, 8), 0.0);
        assert!((droprate_loss(&SampleMask::full(100), 25, 100) - 0.75).abs() < 1e-15);
        assert!((droprate_loss(&SampleMask::empty(10), 3, 10) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn separable_toy_set_is_learned() {
        let ds = toy_separable();
        let model = train_classifier(&ds, &TrainConfig::default()).unwrap();
        assert_eq!(accuracy(&model, &ds).unwrap(), 1.0);
    }

    #[test]
    fn training_is_deterministic() {
        let ds = toy_separable();
        let cfg = TrainConfig {
            seed: 5,
            ..TrainConfig::default()
        };
        assert_eq!(train_classifier(&ds, &cfg).unwrap(), train_classifier(&ds, &cfg).unwrap());
    }

    #[test]
    fn empty_training_set_is_rejected() {
        let ds = LabeledDataset::new(Vec::new(), 3).unwrap();
        assert!(matches!(train_classifier(&ds, &TrainConfig::default()), Err(Error::Empty(_))));
    }

    #[test]
    fn shuffled_labels_give_chance_accuracy() {
        // 10 classes of pure noise: 2000 test items keep the binomial spread near 0.7 points
        let train = unstructured(20, 10, 6, 1);
        let test = unstructured(200, 10, 6, 2);
        let model = train_classifier(&train, &TrainConfig::default()).unwrap();
        let acc = accuracy(&model, &test).unwrap();
        assert!((acc - 0.1).abs() <= 0.03, "accuracy {acc}");
    }

    #[test]
    fn full_rate_pipeline_matches_raw_accuracy() {
        let ds = toy_separable();
        let model = train_classifier(&ds, &TrainConfig::default()).unwrap();
        let raw = accuracy(&model, &ds).unwrap();
        let piped = evaluate(&model, &ds, &Pipeline::new(Sampler::Uniform, 1.0)).unwrap();
        assert_eq!(raw, piped);
        assert!(evaluate(&model, &ds, &Pipeline::new(Sampler::Uniform, 0.0)).is_err());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let model = LinearClassifier::zeros(2, 3);
        assert!(matches!(accuracy(&model, &toy_separable()), Err(Error::Dimension(_))));
    }

    #[test]
    fn dataset_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let ds = toy_separable().map_images(|_, img| {
            Image::new(2, 2, 1, img.data().iter().map(|v| (v * 255.0).round() / 255.0).collect())
        }).unwrap();
        ds.save_dir(dir.path()).unwrap();
        let (back, classes) = LabeledDataset::load_dir(dir.path(), 0).unwrap();
        assert_eq!(classes, vec!["0", "1"]);
        assert_eq!(back.len(), ds.len());
        let mut a: Vec<_> = ds.items().iter().map(|(i, l)| (format!("{:?}", i.data()), *l)).collect();
        let mut b: Vec<_> = back.items().iter().map(|(i, l)| (format!("{:?}", i.data()), *l)).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
    }
}
