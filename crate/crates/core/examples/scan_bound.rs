//! How footprint size and samplerate decide which pixels a raster scan sees.
//!
//! At the bound (samplerate = angular velocity / acceptance angle) footprints
//! tile the image exactly; doubling the rate makes them overlap.

use sauce::image::Image;
use sauce::scanner::{footprints, max_samplerate, scan, ScanConfig};

fn coverage(config: &ScanConfig) -> Vec<usize> {
    let mut counts = vec![0; config.width * config.height];
    for fp in footprints(config).unwrap() {
        for r in fp.rows.clone() {
            for c in fp.cols.clone() {
                counts[r * config.width + c] += 1;
            }
        }
    }
    counts
}

fn show(title: &str, config: &ScanConfig) {
    println!("{title} ({} footprints)", footprints(config).unwrap().len());
    for row in coverage(config).chunks(config.width) {
        println!("  {}", row.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(""));
    }
}

fn main() {
    let bound = max_samplerate(90.0, 1.5).unwrap();
    println!("90 deg/s with a 1.5 deg acceptance angle: at most {bound} Hz\n");

    let (w, h) = (12, 6);
    show("footprint 2 at the bound", &ScanConfig::with_footprint(w, h, 2));
    show("footprint 2 at twice the bound", &ScanConfig::with_footprint(w, h, 2).oversampled(2.0));
    show("footprint 3 at the bound", &ScanConfig::with_footprint(w, h, 3));

    // a stream at the bound carries the block means of the image
    let img = Image::from_fn(w, h, |r, c| (r * w + c) as f64 / (w * h) as f64).unwrap();
    let stream = scan(&img, &ScanConfig::with_footprint(w, h, 3)).unwrap();
    println!("\nfootprint 3 stream: {} samples on a {}x{} grid", stream.len(), stream.grid_width(), stream.grid_height());
    for i in 0..stream.len() {
        let p = stream.position(i);
        println!("  #{i} row {:.1} col {:.1} theta {:.1} value {:.3}", p.row, p.col, p.theta, stream.value(i)[0]);
    }
}
