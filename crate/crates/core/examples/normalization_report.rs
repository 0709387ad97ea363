//! Achieved samplerate with and without heatmap normalization under
//! Bernoulli selection.
//!
//! Normalization shifts every probability's odds so the expected kept count
//! matches the budget. It cannot narrow the heatmap's spread, so the weights
//! are fitted first with a heavy droprate penalty.

use sauce::corpus::{digits, DigitStyle};
use sauce::fit::{achieved_rate_report, fit_params, FitConfig};
use sauce::sauce::{SamplerParams, Selection};

fn report(label: &str, params: &SamplerParams) {
    let corpus = digits(10, &DigitStyle::default(), 2);
    let targets: Vec<f64> = (1..=9).map(|k| k as f64 / 10.0).collect();
    println!("{label} {params:?}");
    println!("  {:>6} {:>11} {:>13}", "target", "normalized", "unnormalized");
    for r in achieved_rate_report(&corpus, params, &targets, 0).unwrap() {
        println!("  {:>6.1} {:>11.3} {:>13.3}", r.target, r.normalized, r.unnormalized);
    }
}

fn main() {
    report("default weights", &SamplerParams::default());

    let config = FitConfig {
        selection: Selection::Bernoulli,
        lambda_drop: 10.0,
        ..FitConfig::default()
    };
    let fit = fit_params(&digits(10, &DigitStyle::default(), 1), &config).unwrap();
    report("\nweights fitted for Bernoulli selection", &fit.params);
}
