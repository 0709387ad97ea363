//! Coarse scan first, then spend the remaining budget where the upsampled
//! coarse heatmap is highest.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sauce::corpus::{render_digit, DigitStyle};
use sauce::pipeline::{budget, sample_image, Fill, Sampler};
use sauce::reconstruct::psnr;
use sauce::sauce::SamplerParams;
use sauce::twostage::{low_res_count, two_stage_sample, TwoStageConfig};

fn main() {
    let img = render_digit(2, &DigitStyle { size: 32, ..DigitStyle::default() }, &mut ChaCha8Rng::seed_from_u64(5));
    let total = img.len();
    let params = SamplerParams::new(0.0, 1.0, 0.0);

    for factor in [2, 4] {
        let low = low_res_count(img.width(), img.height(), factor);
        let rate = 0.35;
        let n2 = budget(rate, total).unwrap().saturating_sub(low);
        let out = two_stage_sample(&img, &TwoStageConfig::new(factor, n2, params)).unwrap();
        println!(
            "factor {factor}: {low} coarse + {} fine samples = effective rate {:.4} (target {rate})",
            out.mask.kept(),
            out.effective_rate
        );
        println!("  coarse heatmap {}x{}, upsampled to {}x{}", out.low_heatmap.width(), out.low_heatmap.height(), out.upsampled.width(), out.upsampled.height());
    }

    println!();
    for sampler in [Sampler::sauce(params), Sampler::two_stage(2, params), Sampler::Random] {
        let out = sample_image(&img, &sampler, 0.35, Fill::Nearest, 0).unwrap();
        println!("{:<14} rate {:.4} psnr {:.2} dB", sampler.name(), out.achieved_rate, psnr(&img, &out.image).unwrap());
    }
}
