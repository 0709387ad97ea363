use sauce::corpus::{edge_coded, unstructured};
use sauce::fit::{fit_params, sweep, validation_objective, FitConfig, SweepConfig, FIT_INIT};
use sauce::pipeline::Sampler;
use sauce::sauce::SamplerParams;

#[test]
fn fitted_beta_is_positive_when_labels_live_in_edges() {
    for seed in 0..3 {
        let data = edge_coded(40, 16, seed);
        let fit = fit_params(&data, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        let p = fit.params;
        assert!(p.beta > 0.1, "seed {seed}: {p:?}");
        assert!(fit.validation_objective <= fit.init_validation_objective);
    }
}

fn reseeded(params: &SamplerParams, data: &sauce::taskproxy::LabeledDataset, base: &FitConfig) -> Vec<f64> {
    (0..6)
        .map(|s| {
            let config = FitConfig { seed: 100 + s, ..*base };
            let (train, val) = data.split(config.train_fraction, config.seed);
            validation_objective(params, &train, &val, &config).unwrap()
        })
        .collect()
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, var.sqrt())
}

#[test]
fn control_fit_stays_within_noise_of_init() {
    for seed in 0..3 {
        let data = unstructured(20, 2, 16, seed);
        let config = FitConfig { seed, ..FitConfig::default() };
        let fit = fit_params(&data, &config).unwrap();
        let (init_mean, init_sd) = mean_sd(&reseeded(&FIT_INIT, &data, &config));
        let (fit_mean, _) = mean_sd(&reseeded(&fit.params, &data, &config));
        assert!(
            (fit.init_validation_objective - fit.validation_objective) <= 2.0 * init_sd,
            "seed {seed}: fitted {} init {} sd {init_sd}",
            fit.validation_objective,
            fit.init_validation_objective
        );
        assert!((fit_mean - init_mean).abs() <= init_sd, "seed {seed}: {fit_mean} vs {init_mean} ± {init_sd}");
    }
}

#[test]
fn fitted_sampler_beats_random_at_low_rates_on_edge_coded_data() {
    let rates = [0.05, 0.1, 0.2, 0.3];
    let mut sauce = [0.0; 4];
    let mut random = [0.0; 4];
    let seeds = 3;
    for seed in 0..seeds {
        let data = edge_coded(40, 16, seed);
        let (train, test) = data.split(0.7, seed);
        let fit = fit_params(&train, &FitConfig { seed, ..FitConfig::default() }).unwrap();
        let samplers = [Sampler::sauce(fit.params), Sampler::Random];
        let curve = sweep(&train, &test, &rates, &samplers, &SweepConfig { seed, ..SweepConfig::default() }).unwrap();
        for (k, &r) in rates.iter().enumerate() {
            sauce[k] += curve.get("sauce", r).unwrap().metric / seeds as f64;
            random[k] += curve.get("random", r).unwrap().metric / seeds as f64;
        }
    }
    for k in 0..rates.len() {
        assert!(sauce[k] >= random[k], "rate {}: sauce {} random {}", rates[k], sauce[k], random[k]);
    }
}
