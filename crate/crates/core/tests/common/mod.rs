//! Strategies and oracles shared by the integration tests.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sauce::image::Image;
use sauce::sauce::{distance, probability, probability_gradient, Heatmap, SamplerParams};
use sauce::scanner::{footprints, ScanConfig, ScanDelta};
use sauce::taskproxy::LinearClassifier;

pub fn probs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..=1.0, 1..=max_len)
}

/// Probabilities from a five-value alphabet, so ties are common.
pub fn tied_probs(max_len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec((0u8..5).prop_map(|k| k as f64 / 4.0), 1..=max_len)
}

pub fn image(max_side: usize) -> impl Strategy<Value = Image> {
    (1..=max_side, 1..=max_side)
        .prop_flat_map(|(w, h)| (Just(w), Just(h), prop::collection::vec(0.0f64..=1.0, w * h)))
        .prop_map(|(w, h, data)| Image::new(w, h, 1, data).unwrap())
}

pub fn map(p: Vec<f64>) -> Heatmap {
    let n = p.len();
    Heatmap::from_probabilities(n, 1, p).unwrap()
}

/// Exactly one `n`-subset is "top-n with lower index first on ties"; find it
/// by checking every subset.
pub fn brute_force_top(p: &[f64], n: usize) -> Vec<usize> {
    let total = p.len();
    let mut found = Vec::new();
    for bits in 0u32..(1 << total) {
        if bits.count_ones() as usize != n {
            continue;
        }
        let kept = |i: usize| bits >> i & 1 == 1;
        let ok = (0..total).filter(|&i| kept(i)).all(|i| {
            (0..total)
                .filter(|&j| !kept(j))
                .all(|j| p[i] > p[j] || (p[i] == p[j] && i < j))
        });
        if ok {
            found.push((0..total).filter(|&i| kept(i)).collect::<Vec<_>>());
        }
    }
    assert_eq!(found.len(), 1, "{p:?} n={n}");
    found.pop().unwrap()
}

/// How many footprints cover each pixel.
pub fn coverage(w: usize, h: usize, config: &ScanConfig) -> Vec<usize> {
    let mut counts = vec![0; w * h];
    for fp in footprints(config).unwrap() {
        for r in fp.rows.clone() {
            for c in fp.cols.clone() {
                counts[r * w + c] += 1;
            }
        }
    }
    counts
}

pub const STEP: f64 = 1e-5;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn central(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    (f(x + STEP) - f(x - STEP)) / (2.0 * STEP)
}

/// Largest relative error of `∂P/∂(α, β, γ)` over 100 random instances.
pub fn probability_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 100 {
        let delta = ScanDelta {
            theta_dot: rng.random_range(0.0..2.0),
            delta_i: rng.random_range(0.0..1.0),
        };
        let params = SamplerParams::new(
            rng.random_range(-1.0..3.0),
            rng.random_range(-1.0..3.0),
            rng.random_range(-0.5..1.0),
        );
        let sigma_sq = rng.random_range(0.2..3.0);
        let d = distance(delta.theta_dot, delta.delta_i, &params);
        // the clamp at D = 0 has no derivative
        if d < 10.0 * STEP * (1.0 + delta.theta_dot + delta.delta_i) {
            continue;
        }
        let analytic = probability_gradient(delta, &params, sigma_sq);
        let p = |params: SamplerParams| {
            probability(distance(delta.theta_dot, delta.delta_i, &params), sigma_sq).unwrap()
        };
        let numeric = [
            central(|a| p(SamplerParams { alpha: a, ..params }), params.alpha),
            central(|b| p(SamplerParams { beta: b, ..params }), params.beta),
            central(|g| p(SamplerParams { gamma: g, ..params }), params.gamma),
        ];
        for (a, n) in analytic.iter().zip(numeric) {
            worst = worst.max(relative_error(*a, n));
        }
        checked += 1;
    }
    worst
}

/// Largest relative error of the classifier's loss gradient over 100 random instances.
pub fn classifier_gradient_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let classes = rng.random_range(2..5);
        let features = rng.random_range(1..6);
        let weights: Vec<f64> = (0..classes * features).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bias: Vec<f64> = (0..classes).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xs: Vec<Vec<f64>> = (0..rng.random_range(1..5))
            .map(|_| (0..features).map(|_| rng.random_range(0.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = xs.iter().map(|_| rng.random_range(0..classes)).collect();
        let batch: Vec<(&[f64], usize)> = xs.iter().map(|x| x.as_slice()).zip(labels).collect();
        let l2 = rng.random_range(0.0..0.1);
        let model = |w: &[f64], b: &[f64]| LinearClassifier::from_parts(classes, features, w.to_vec(), b.to_vec()).unwrap();
        let (_, gw, gb) = model(&weights, &bias).loss_and_gradient(&batch, l2);

        for k in 0..weights.len() {
            let numeric = central(
                |v| {
                    let mut w = weights.clone();
                    w[k] = v;
                    model(&w, &bias).loss_and_gradient(&batch, l2).0
                },
                weights[k],
            );
            worst = worst.max(relative_error(gw[k], numeric));
        }
        for k in 0..bias.len() {
            let numeric = central(
                |v| {
                    let mut b = bias.clone();
                    b[k] = v;
                    model(&weights, &b).loss_and_gradient(&batch, l2).0
                },
                bias[k],
            );
            worst = worst.max(relative_error(gb[k], numeric));
        }
    }
    worst
}

