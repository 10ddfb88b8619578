//! Deterministic synthetic scenes for tests, benchmarks and the bundled
//! fixture.

use crate::cube::SpectralCube;

/// Smooth spectral profile in `[0.2, 1.0]`.
fn profile(l: usize, bands: usize, freq: f64, phase: f64) -> f64 {
    let t = if bands > 1 { l as f64 / (bands - 1) as f64 } else { 0.0 };
    0.6 + 0.4 * (2.0 * std::f64::consts::PI * (freq * t + phase)).cos()
}

/// Piecewise-constant objects over a background, each with its own smooth
/// spectrum, plus a sinusoidal texture whose strength varies smoothly across
/// bands. Max-normalized to 1 with all samples non-negative.
pub fn textured_scene(width: usize, height: usize, bands: usize) -> SpectralCube {
    let (w, h) = (width as f64, height as f64);
    // (level, spectral frequency, spectral phase) for background and objects
    let materials = [
        (0.30, 0.35, 0.00),
        (0.70, 0.50, 0.25),
        (0.50, 0.80, 0.60),
        (0.85, 0.30, 0.45),
    ];
    let label = |x: f64, y: f64| -> usize {
        let (u, v) = (x / w, y / h);
        let (dx, dy) = (u - 0.68, v - 0.34);
        if (0.12..0.44).contains(&u) && (0.15..0.62).contains(&v) {
            1
        } else if dx * dx + dy * dy < 0.19 * 0.19 {
            2
        } else if (0.47..0.90).contains(&u) && (0.62..0.90).contains(&v) {
            3
        } else {
            0
        }
    };
    let mut data = Vec::with_capacity(width * height * bands);
    for l in 0..bands {
        let t = if bands > 1 { l as f64 / (bands - 1) as f64 } else { 0.0 };
        let texture_gain = 0.5 + 0.5 * t;
        for y in 0..height {
            for x in 0..width {
                let (xf, yf) = (x as f64, y as f64);
                let (level, freq, phase) = materials[label(xf, yf)];
                let texture = 0.08
                    * (2.0 * std::f64::consts::PI * xf / 9.0).sin()
                    * (2.0 * std::f64::consts::PI * yf / 13.0).sin();
                data.push((level * profile(l, bands, freq, phase) + texture_gain * texture).max(0.0));
            }
        }
    }
    let cube = SpectralCube::new(width, height, bands, data).expect("finite synthetic data");
    crate::cube::normalize_cube(&cube).expect("synthetic scene is nonzero")
}
