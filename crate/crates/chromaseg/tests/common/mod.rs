//! Shared fixtures for the integration tests.

use chromaseg::colorspace::ColorSpaceTag;
use chromaseg::image::{RasterImage, SampleRange};
use chromaseg::Raster;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Deterministic synthetic "peppers-class" test image: three overlapping,
/// glossily shaded vegetables (red, yellow, teal) on a dark table, plus mild
/// per-pixel noise. All samples are integers in [0, 255], so the raster
/// equals its own PPM encoding sample-for-sample.
pub fn peppers(width: usize, height: usize) -> Raster {
    // (center, radii, body color) in unit coordinates, painted in order.
    // The glossy shading swings each body color across a wide lightness
    // range while leaving its hue alone.
    let blobs: &[(f64, f64, f64, f64, [f64; 3])] = &[
        (0.30, 0.36, 0.27, 0.31, [204.0, 36.0, 30.0]),
        (0.66, 0.30, 0.24, 0.27, [226.0, 188.0, 42.0]),
        (0.62, 0.70, 0.28, 0.26, [30.0, 130.0, 140.0]),
    ];
    let npx = width * height;
    let mut samples = vec![0.0f64; 3 * npx];
    for y in 0..height {
        for x in 0..width {
            let u = x as f64 / (width - 1).max(1) as f64;
            let v = y as f64 / (height - 1).max(1) as f64;
            let shade = 0.85 + 0.30 * (0.6 * u + 0.4 * v);
            let mut color = [52.0 * shade, 44.0 * shade, 34.0 * shade];
            for &(cx, cy, rx, ry, body) in blobs {
                let dx = (u - cx) / rx;
                let dy = (v - cy) / ry;
                let d = (dx * dx + dy * dy).sqrt();
                if d < 1.0 {
                    let s = 0.45 + 0.55 * (1.0 - d);
                    let glint = 42.0 * (1.0 - d).powi(3);
                    for c in 0..3 {
                        color[c] = (body[c] * s + glint).min(255.0);
                    }
                }
            }
            let i = y * width + x;
            for c in 0..3 {
                samples[c * npx + i] = color[c];
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for value in samples.iter_mut() {
        let noise = (rng.next_u32() % 7) as f64 - 3.0;
        *value = (*value + noise).clamp(0.0, 255.0).round();
    }
    RasterImage::new(
        width,
        height,
        3,
        SampleRange::byte(),
        ColorSpaceTag::Rgb,
        samples,
    )
    .expect("fixture samples are valid bytes")
}

#[allow(dead_code)]
pub fn write_ppm(img: &Raster, path: &std::path::Path) {
    let bytes = chromaseg::image::save_ppm(img).expect("fixture encodes");
    std::fs::write(path, bytes).expect("fixture file writes");
}
