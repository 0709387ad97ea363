//! Every sampler at the same budget on one image, with reconstruction quality.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sauce::corpus::{render_digit, DigitStyle};
use sauce::pipeline::{budget, sample_image, Fill, Sampler};
use sauce::reconstruct::psnr;
use sauce::sauce::SamplerParams;

fn main() {
    let img = render_digit(8, &DigitStyle::default(), &mut ChaCha8Rng::seed_from_u64(3));
    let samplers = [
        Sampler::sauce(SamplerParams::new(0.0, 1.0, 0.0)),
        Sampler::Uniform,
        Sampler::Random,
        Sampler::LevelCrossing,
        Sampler::Mar { rho: 0.5 },
        Sampler::two_stage(2, SamplerParams::new(0.0, 1.0, 0.0)),
    ];
    println!("{:<14} {:>5} {:>6} {:>9} {:>9}", "sampler", "rate", "kept", "achieved", "psnr dB");
    for rate in [0.1, 0.3, 0.5] {
        let n = budget(rate, img.len()).unwrap();
        for sampler in &samplers {
            let out = sample_image(&img, sampler, rate, Fill::Nearest, 11).unwrap();
            println!(
                "{:<14} {:>5.2} {:>6} {:>9.4} {:>9.2}",
                sampler.name(),
                rate,
                out.mask.kept(),
                out.achieved_rate,
                psnr(&img, &out.image).unwrap()
            );
            if !matches!(sampler, Sampler::TwoStage { .. }) {
                assert_eq!(out.mask.kept(), n);
            }
        }
        println!();
    }
}
