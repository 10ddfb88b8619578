use super::fft::{Fft2, FftScratch};
use crate::cube::Image2D;
use crate::error::{Error, Result};

/// Splits `image` into a smooth part and the remainder.
///
/// The smooth part minimizes `0.5 * ||l - image||^2 + (lambda / 2) * ||grad l||^2`
/// with circular forward differences, i.e. each DFT coefficient is divided by
/// `1 + lambda * (4 sin^2(wx / 2) + 4 sin^2(wy / 2))`.
pub fn lowpass_split(image: &Image2D, lambda: f64) -> Result<(Image2D, Image2D)> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::Parameter(format!("low-pass weight must be >= 0, got {lambda}")));
    }
    let (w, h) = (image.width(), image.height());
    if lambda == 0.0 {
        return Ok((image.clone(), Image2D::zeros(w, h)));
    }
    let fft = Fft2::new(w, h);
    let mut scratch = FftScratch::default();
    let mut spec = fft.forward_real(image.data(), &mut scratch);
    let response = |k: usize, n: usize| {
        let s = (std::f64::consts::PI * k as f64 / n as f64).sin();
        4.0 * s * s
    };
    let rx: Vec<f64> = (0..w).map(|k| response(k, w)).collect();
    let ry: Vec<f64> = (0..h).map(|k| response(k, h)).collect();
    for (ky, row) in spec.chunks_exact_mut(w).enumerate() {
        for (kx, c) in row.iter_mut().enumerate() {
            *c /= 1.0 + lambda * (rx[kx] + ry[ky]);
        }
    }
    let low = fft.inverse_real(&mut spec, &mut scratch);
    let high = image.data().iter().zip(&low).map(|(a, b)| a - b).collect();
    Ok((Image2D::from_raw(w, h, low), Image2D::from_raw(w, h, high)))
}
