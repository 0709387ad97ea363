//! Fits the sampler weights on a synthetic digit corpus, then compares the
//! fitted sampler against the baselines across samplerates.
//!
//! Runs in well under a minute in release mode: `cargo run --release --example fit_and_sweep`.

use sauce::corpus::{digits, DigitStyle};
use sauce::fit::{fit_params, sweep, FitConfig, SweepConfig, FIT_INIT};
use sauce::pipeline::{Fill, Sampler};

fn main() {
    let style = DigitStyle::default();
    let train = digits(20, &style, 1);
    let test = digits(10, &style, 2);

    let config = FitConfig {
        fill: Fill::Zero,
        ..FitConfig::default()
    };
    let fit = fit_params(&train, &config).unwrap();
    println!(
        "init {:?}: validation objective {:.4}",
        FIT_INIT, fit.init_validation_objective
    );
    println!("fitted {:?}: validation objective {:.4}", fit.params, fit.validation_objective);
    println!("objective log: {} entries, final training objective {:.4}\n", fit.log.len(), fit.objective);

    let samplers = [
        Sampler::sauce(fit.params),
        Sampler::Uniform,
        Sampler::Random,
        Sampler::LevelCrossing,
        Sampler::Mar { rho: 0.5 },
    ];
    let rates = [0.05, 0.1, 0.2, 0.4];
    let curve = sweep(&train, &test, &rates, &samplers, &SweepConfig { fill: Fill::Zero, ..SweepConfig::default() }).unwrap();

    print!("{:<8}", "rate");
    for s in &samplers {
        print!("{:>9}", s.name());
    }
    println!();
    for r in rates {
        print!("{r:<8}");
        for s in &samplers {
            print!("{:>9.3}", curve.get(&s.name(), r).unwrap().metric);
        }
        println!();
    }
    println!("full image accuracy {:.3}", curve.get("full", 1.0).unwrap().metric);
}
