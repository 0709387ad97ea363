//! Sparse samples back to a dense image: nearest fill against zero fill.

use sauce::baselines::random_mask;
use sauce::image::Image;
use sauce::reconstruct::{mse, nearest_fill, zero_fill};
use sauce::sauce::apply_mask;
use sauce::scanner::{scan, ScanConfig};

fn main() {
    let (w, h) = (32, 32);
    let img = Image::from_fn(w, h, |r, c| {
        let (x, y) = (c as f64 / w as f64 - 0.5, r as f64 / h as f64 - 0.5);
        0.5 + 0.5 * (8.0 * (x * x + y * y).sqrt()).cos()
    })
    .unwrap();
    let stream = scan(&img, &ScanConfig::identity(w, h)).unwrap();

    println!("{:>5} {:>12} {:>12}", "rate", "nearest mse", "zero mse");
    for rate in [0.05, 0.1, 0.25, 0.5, 0.9] {
        let n = (rate * stream.len() as f64).round() as usize;
        let sparse = apply_mask(&stream, &random_mask(stream.len(), n, 1).unwrap()).unwrap();
        let near = nearest_fill(&sparse).unwrap();
        let zero = zero_fill(&sparse).unwrap();
        println!("{rate:>5.2} {:>12.5} {:>12.5}", mse(&img, &near).unwrap(), mse(&img, &zero).unwrap());
    }

    let out = std::env::temp_dir().join("sauce_reconstruct_example.pgm");
    let sparse = apply_mask(&stream, &random_mask(stream.len(), stream.len() / 10, 1).unwrap()).unwrap();
    nearest_fill(&sparse).unwrap().save(&out).unwrap();
    println!("\n10% nearest-fill reconstruction written to {}", out.display());
}
