//! Builds the keep-probability heatmap of a digit and shows how the three
//! weights shape it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sauce::corpus::{render_digit, DigitStyle};
use sauce::sauce::{heatmap, select, SamplerParams, Selection, VarianceMode};
use sauce::scanner::{scan, ScanConfig};

fn ascii(values: &[f64], width: usize) {
    const SHADES: &[u8] = b" .:-=+*#%@";
    for row in values.chunks(width) {
        let line: String = row
            .iter()
            .map(|v| SHADES[((v.clamp(0.0, 1.0) * 9.0).round()) as usize] as char)
            .collect();
        println!("  |{line}|");
    }
}

fn main() {
    let style = DigitStyle::default();
    let img = render_digit(4, &style, &mut ChaCha8Rng::seed_from_u64(7));
    let stream = scan(&img, &ScanConfig::identity(img.width(), img.height())).unwrap();
    println!("digit 4, {}x{}", img.width(), img.height());
    ascii(img.data(), img.width());

    for (label, params) in [
        ("intensity only (alpha 0, beta 1)", SamplerParams::new(0.0, 1.0, 0.0)),
        ("default weights (1, 1, 0)", SamplerParams::default()),
        ("motion only (alpha 1, beta 0)", SamplerParams::new(1.0, 0.0, 0.0)),
    ] {
        let h = heatmap(&stream, &params, VarianceMode::TwoPass).unwrap();
        println!("\n{label}: sigma^2 {:.4}, mean P {:.3}", h.sigma_sq(), h.mean());
        ascii(h.p(), h.width());
    }

    let h = heatmap(&stream, &SamplerParams::new(0.0, 1.0, 0.0), VarianceMode::TwoPass).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let n = stream.len() / 5;
    for selection in [Selection::TopK, Selection::Bernoulli] {
        let mask = select(&h, n, selection, &mut rng).unwrap();
        println!("\n{selection:?} at budget {n}: kept {}", mask.kept());
        let keep: Vec<f64> = mask.as_slice().iter().map(|k| if *k { 1.0 } else { 0.0 }).collect();
        ascii(&keep, h.width());
    }
}
