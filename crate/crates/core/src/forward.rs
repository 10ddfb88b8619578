//! The coded-aperture observation operator.
//!
//! Every band is multiplied elementwise by its own mask plane and the masked
//! bands are summed onto one detector plane:
//!
//! ```text
//! y(p) = sum_l h_l(p) * I_l(p)
//! ```
//!
//! Because each band operator is diagonal, `H H^T` is diagonal too, with
//! entries `sum_l h_l(p)^2` (see [`gram_diagonal`]).

use std::ops::Deref;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cube::{Image2D, SpectralCube};
use crate::error::{Error, Result};

/// A 2-D coded observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Measurement(Image2D);

impl Measurement {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        Image2D::new(width, height, data).map(Self)
    }

    pub fn as_image(&self) -> &Image2D {
        &self.0
    }

    pub fn into_image(self) -> Image2D {
        self.0
    }
}

impl From<Image2D> for Measurement {
    fn from(img: Image2D) -> Self {
        Self(img)
    }
}

impl Deref for Measurement {
    type Target = Image2D;

    fn deref(&self) -> &Image2D {
        &self.0
    }
}

/// Per-band mask planes `h_1..h_L`, stored band-major like a cube.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemMasks {
    width: usize,
    height: usize,
    bands: usize,
    masks: Vec<f64>,
}

impl SystemMasks {
    /// Wraps explicit mask planes. Weights must lie in `[0, 1]`.
    pub fn new(width: usize, height: usize, bands: usize, masks: Vec<f64>) -> Result<Self> {
        let cube = SpectralCube::new(width, height, bands, masks)?;
        if let Some(i) = cube.data().iter().position(|&w| !(0.0..=1.0).contains(&w)) {
            return Err(Error::Data(format!(
                "mask weight {} at index {i} outside [0, 1]",
                cube.data()[i]
            )));
        }
        Ok(Self {
            width,
            height,
            bands,
            masks: cube.into_data(),
        })
    }

    pub fn from_planes(planes: &[Image2D]) -> Result<Self> {
        let cube = SpectralCube::from_bands(planes)?;
        Self::new(cube.width(), cube.height(), cube.bands(), cube.into_data())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn data(&self) -> &[f64] {
        &self.masks
    }

    pub fn plane(&self, l: usize) -> &[f64] {
        let n = self.width * self.height;
        &self.masks[l * n..(l + 1) * n]
    }

    pub fn plane_image(&self, l: usize) -> Result<Image2D> {
        if l >= self.bands {
            return Err(Error::Index {
                index: l,
                len: self.bands,
            });
        }
        Ok(Image2D::from_raw(self.width, self.height, self.plane(l).to_vec()))
    }

    fn check_cube(&self, cube: &SpectralCube) -> Result<()> {
        if cube.width() != self.width || cube.height() != self.height || cube.bands() != self.bands {
            return Err(Error::Shape(format!(
                "cube {}x{}x{} does not match system {}x{}x{}",
                cube.width(),
                cube.height(),
                cube.bands(),
                self.width,
                self.height,
                self.bands
            )));
        }
        Ok(())
    }

    fn check_plane(&self, img: &Image2D) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::Shape(format!(
                "measurement {}x{} does not match system {}x{}",
                img.width(),
                img.height(),
                self.width,
                self.height
            )));
        }
        Ok(())
    }
}

/// Random binary mask with each pixel open with probability `density`.
///
/// The generator is ChaCha8 seeded from `seed`, so masks are reproducible
/// across platforms.
pub fn generate_mask(width: usize, height: usize, seed: u64, density: f64) -> Result<Image2D> {
    if !(density > 0.0 && density < 1.0) {
        return Err(Error::Parameter(format!("density must be in (0, 1), got {density}")));
    }
    if width == 0 || height == 0 {
        return Err(Error::Shape(format!("mask dims must be nonzero, got {width}x{height}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..width * height)
        .map(|_| if rng.gen::<f64>() < density { 1.0 } else { 0.0 })
        .collect();
    Ok(Image2D::from_raw(width, height, data))
}

/// Builds `bands` mask planes by circularly shifting `mask` right by
/// `l * shear_step` columns for band `l`.
pub fn build_system(mask: &Image2D, bands: usize, shear_step: i64) -> Result<SystemMasks> {
    if bands == 0 {
        return Err(Error::Parameter("bands must be >= 1".into()));
    }
    let (w, h) = (mask.width(), mask.height());
    if shear_step.unsigned_abs() >= w as u64 {
        return Err(Error::Parameter(format!(
            "|shear_step| must be < width {w}, got {shear_step}"
        )));
    }
    if let Some(v) = mask.data().iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::Data(format!("mask weight {v} outside [0, 1]")));
    }
    let mut masks = Vec::with_capacity(w * h * bands);
    for l in 0..bands {
        let shift = (l as i64 * shear_step).rem_euclid(w as i64) as usize;
        for y in 0..h {
            let row = &mask.data()[y * w..(y + 1) * w];
            masks.extend((0..w).map(|x| row[(x + w - shift) % w]));
        }
    }
    Ok(SystemMasks {
        width: w,
        height: h,
        bands,
        masks,
    })
}

/// `y = H I`, summing bands in ascending order.
pub fn forward(system: &SystemMasks, cube: &SpectralCube) -> Result<Measurement> {
    system.check_cube(cube)?;
    let mut y = vec![0.0; system.width * system.height];
    for l in 0..system.bands {
        for ((acc, &h), &v) in y.iter_mut().zip(system.plane(l)).zip(cube.band(l)) {
            *acc += h * v;
        }
    }
    Ok(Measurement(Image2D::from_raw(system.width, system.height, y)))
}

/// `H^T y`: band `l` is `h_l * y`.
pub fn adjoint(system: &SystemMasks, y: &Image2D) -> Result<SpectralCube> {
    system.check_plane(y)?;
    let mut data = Vec::with_capacity(system.masks.len());
    for l in 0..system.bands {
        data.extend(system.plane(l).iter().zip(y.data()).map(|(h, v)| h * v));
    }
    Ok(SpectralCube::from_raw(system.width, system.height, system.bands, data))
}

/// Diagonal of `H H^T`: `sum_l h_l(p)^2` per pixel.
pub fn gram_diagonal(system: &SystemMasks) -> Image2D {
    let mut g = vec![0.0; system.width * system.height];
    for l in 0..system.bands {
        for (acc, &h) in g.iter_mut().zip(system.plane(l)) {
            *acc += h * h;
        }
    }
    Image2D::from_raw(system.width, system.height, g)
}

/// Pairs of independent standard normals via Box-Muller over a ChaCha8
/// stream. Uniforms are drawn in `(0, 1]` so the logarithm stays finite.
pub struct BoxMuller {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Adds i.i.d. `N(0, sigma^2)` noise. `sigma == 0` returns the input unchanged.
pub fn add_noise(y: &Measurement, sigma: f64, seed: u64) -> Result<Measurement> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Parameter(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(y.clone());
    }
    let mut normal = BoxMuller::new(seed);
    let data = y.data().iter().map(|v| v + sigma * normal.next()).collect();
    Ok(Measurement(Image2D::from_raw(y.width(), y.height(), data)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ones_system(w: usize, h: usize, bands: usize) -> SystemMasks {
        SystemMasks::new(w, h, bands, vec![1.0; w * h * bands]).unwrap()
    }

    #[test]
    fn mask_is_deterministic_and_binary() {
        let a = generate_mask(32, 16, 7, 0.5).unwrap();
        let b = generate_mask(32, 16, 7, 0.5).unwrap();
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_ne!(a, generate_mask(32, 16, 8, 0.5).unwrap());
    }

    #[test]
    fn mask_density_within_binomial_bound() {
        let m = generate_mask(64, 64, 3, 0.5).unwrap();
        let frac = m.data().iter().sum::<f64>() / 4096.0;
        assert!((0.47..=0.53).contains(&frac), "{frac}");
    }

    #[test]
    fn mask_density_bounds() {
        assert!(generate_mask(8, 8, 0, 0.0).is_err());
        assert!(generate_mask(8, 8, 0, 1.0).is_err());
        assert!(generate_mask(8, 8, 0, 0.99999).is_ok());
        assert!(generate_mask(8, 8, 0, 0.5).is_ok());
    }

    #[test]
    fn zero_shear_repeats_mask() {
        let m = generate_mask(8, 4, 1, 0.5).unwrap();
        let s = build_system(&m, 3, 0).unwrap();
        for l in 0..3 {
            assert_eq!(s.plane(l), m.data());
        }
    }

    #[test]
    fn shear_shifts_right() {
        let m = Image2D::new(4, 1, vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let s = build_system(&m, 3, 1).unwrap();
        assert_eq!(s.plane(1), &[0.0, 1.0, 0.0, 0.0]);
        assert_eq!(s.plane(2), &[0.0, 0.0, 1.0, 0.0]);
        let s = build_system(&m, 2, -1).unwrap();
        assert_eq!(s.plane(1), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn shear_must_be_smaller_than_width() {
        let m = Image2D::zeros(4, 2);
        assert!(build_system(&m, 2, 4).is_err());
        assert!(build_system(&m, 2, -4).is_err());
        assert!(build_system(&m, 0, 1).is_err());
    }

    #[test]
    fn forward_identity_mask() {
        let c = SpectralCube::new(2, 2, 1, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let y = forward(&ones_system(2, 2, 1), &c).unwrap();
        assert_eq!(y.data(), c.data());
    }

    #[test]
    fn forward_and_adjoint_by_hand() {
        let s = SystemMasks::new(1, 1, 2, vec![0.5, 1.0]).unwrap();
        let c = SpectralCube::new(1, 1, 2, vec![2.0, 3.0]).unwrap();
        assert_eq!(forward(&s, &c).unwrap().data(), &[4.0]);
        let y = Image2D::new(1, 1, vec![4.0]).unwrap();
        assert_eq!(adjoint(&s, &y).unwrap().data(), &[2.0, 4.0]);
    }

    #[test]
    fn forward_zero_cube() {
        let s = ones_system(3, 3, 2);
        let y = forward(&s, &SpectralCube::zeros(3, 3, 2)).unwrap();
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn adjoint_all_ones_copies_measurement() {
        let y = Image2D::new(2, 1, vec![0.3, 0.9]).unwrap();
        let c = adjoint(&ones_system(2, 1, 3), &y).unwrap();
        for l in 0..3 {
            assert_eq!(c.band(l), y.data());
        }
    }

    #[test]
    fn dimension_mismatch() {
        let s = ones_system(2, 2, 2);
        assert!(matches!(forward(&s, &SpectralCube::zeros(2, 2, 3)), Err(Error::Shape(_))));
        assert!(matches!(adjoint(&s, &Image2D::zeros(3, 2)), Err(Error::Shape(_))));
    }

    #[test]
    fn gram_examples() {
        let g = gram_diagonal(&ones_system(3, 2, 4));
        assert!(g.data().iter().all(|&v| v == 4.0));
        let g = gram_diagonal(&SystemMasks::new(2, 1, 2, vec![0.0; 4]).unwrap());
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gram_counts_open_pixels() {
        let m = generate_mask(8, 8, 11, 0.5).unwrap();
        let s = build_system(&m, 5, 2).unwrap();
        let g = gram_diagonal(&s);
        for p in 0..64 {
            let count = (0..5).filter(|&l| s.plane(l)[p] == 1.0).count() as f64;
            assert_eq!(g.data()[p], count);
        }
    }

    #[test]
    fn gram_matches_impulse_response() {
        let m = generate_mask(8, 8, 5, 0.5).unwrap();
        let s = build_system(&m, 3, 1).unwrap();
        let g = gram_diagonal(&s);
        for p in 0..64 {
            let mut delta = vec![0.0; 64];
            delta[p] = 1.0;
            let impulse = Image2D::new(8, 8, delta).unwrap();
            let back = forward(&s, &adjoint(&s, &impulse).unwrap()).unwrap();
            assert_eq!(back.data()[p], g.data()[p]);
        }
    }

    #[test]
    fn noise_zero_sigma_is_identity() {
        let y = Measurement::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(add_noise(&y, 0.0, 9).unwrap(), y);
        assert!(add_noise(&y, -0.1, 9).is_err());
    }

    #[test]
    fn noise_is_seeded() {
        let y = Measurement::new(4, 4, vec![0.5; 16]).unwrap();
        assert_eq!(add_noise(&y, 0.1, 3).unwrap(), add_noise(&y, 0.1, 3).unwrap());
        assert_ne!(add_noise(&y, 0.1, 3).unwrap(), add_noise(&y, 0.1, 4).unwrap());
    }

    #[test]
    fn noise_sample_std_within_chi_square_bound() {
        let y = Measurement::new(128, 128, vec![0.0; 128 * 128]).unwrap();
        let out = add_noise(&y, 0.01, 42).unwrap();
        let n = out.len() as f64;
        let mean = out.data().iter().sum::<f64>() / n;
        let var = out.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sd = var.sqrt();
        assert!((0.008..=0.012).contains(&sd), "{sd}");
    }
}
