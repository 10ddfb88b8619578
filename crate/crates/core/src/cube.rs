//! Value types shared by every stage: spectral cubes, single planes and
//! rectangular regions.
//!
//! Cubes are stored band-major: sample `(x, y)` of band `l` lives at
//! `l * width * height + y * width + x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_finite(data: &[f64], what: &str) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(Error::Data(format!("{what}: non-finite sample at index {i}"))),
        None => Ok(()),
    }
}

/// A single 2-D plane of real samples, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Shape(format!("image dims must be nonzero, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::Shape(format!(
                "image {width}x{height} needs {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        check_finite(&data, "image")?;
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dims must be nonzero");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dims must be nonzero");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    /// Wraps data known to be finite and correctly sized.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn same_dims(&self, other: &Image2D) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }
}

/// A spectral data cube: `bands` planes of `width x height` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralCube {
    width: usize,
    height: usize,
    bands: usize,
    data: Vec<f64>,
    band_wavelengths: Option<Vec<f64>>,
}

impl SpectralCube {
    pub fn new(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || bands == 0 {
            return Err(Error::Shape(format!(
                "cube dims must be nonzero, got {width}x{height}x{bands}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(bands))
            .ok_or_else(|| Error::Shape("cube dims overflow".into()))?;
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "cube {width}x{height}x{bands} needs {expected} samples, got {}",
                data.len()
            )));
        }
        check_finite(&data, "cube")?;
        Ok(Self {
            width,
            height,
            bands,
            data,
            band_wavelengths: None,
        })
    }

    pub fn zeros(width: usize, height: usize, bands: usize) -> Self {
        assert!(width > 0 && height > 0 && bands > 0, "cube dims must be nonzero");
        Self {
            width,
            height,
            bands,
            data: vec![0.0; width * height * bands],
            band_wavelengths: None,
        }
    }

    /// Stacks equally sized planes as bands, in order.
    pub fn from_bands(planes: &[Image2D]) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| Error::Empty("no bands to stack".into()))?;
        let mut data = Vec::with_capacity(first.len() * planes.len());
        for (l, p) in planes.iter().enumerate() {
            if !p.same_dims(first) {
                return Err(Error::Shape(format!(
                    "band {l} is {}x{}, expected {}x{}",
                    p.width(),
                    p.height(),
                    first.width(),
                    first.height()
                )));
            }
            data.extend_from_slice(p.data());
        }
        Ok(Self {
            width: first.width(),
            height: first.height(),
            bands: planes.len(),
            data,
            band_wavelengths: None,
        })
    }

    pub(crate) fn from_raw(width: usize, height: usize, bands: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * bands);
        Self {
            width,
            height,
            bands,
            data,
            band_wavelengths: None,
        }
    }

    pub fn with_wavelengths(mut self, nm: Vec<f64>) -> Result<Self> {
        if nm.len() != self.bands {
            return Err(Error::Shape(format!(
                "{} wavelengths for {} bands",
                nm.len(),
                self.bands
            )));
        }
        self.band_wavelengths = Some(nm);
        Ok(self)
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

    pub fn band_wavelengths(&self) -> Option<&[f64]> {
        self.band_wavelengths.as_deref()
    }

    pub fn plane_len(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn band(&self, l: usize) -> &[f64] {
        let n = self.plane_len();
        &self.data[l * n..(l + 1) * n]
    }

    pub(crate) fn band_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.plane_len();
        &mut self.data[l * n..(l + 1) * n]
    }

    pub(crate) fn bands_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let n = self.plane_len();
        self.data.chunks_exact_mut(n)
    }

    pub fn get(&self, x: usize, y: usize, l: usize) -> f64 {
        self.data[l * self.plane_len() + y * self.width + x]
    }

    pub fn same_dims(&self, other: &SpectralCube) -> bool {
        self.width == other.width && self.height == other.height && self.bands == other.bands
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Returns band `l` as an image.
    pub fn extract_band(&self, l: usize) -> Result<Image2D> {
        if l >= self.bands {
            return Err(Error::Index {
                index: l,
                len: self.bands,
            });
        }
        Ok(Image2D::from_raw(self.width, self.height, self.band(l).to_vec()))
    }

    /// Replaces band `l` with `plane`.
    pub fn set_band(&mut self, l: usize, plane: &Image2D) -> Result<()> {
        if l >= self.bands {
            return Err(Error::Index {
                index: l,
                len: self.bands,
            });
        }
        if plane.width() != self.width || plane.height() != self.height {
            return Err(Error::Shape(format!(
                "plane {}x{} does not fit cube {}x{}",
                plane.width(),
                plane.height(),
                self.width,
                self.height
            )));
        }
        self.band_mut(l).copy_from_slice(plane.data());
        Ok(())
    }

    /// Spectrum (one sample per band) at pixel `(x, y)`.
    pub fn spectrum_at(&self, x: usize, y: usize) -> Vec<f64> {
        let n = self.plane_len();
        let p = y * self.width + x;
        (0..self.bands).map(|l| self.data[l * n + p]).collect()
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> SpectralCube {
        SpectralCube {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// Scales the cube so that its maximum sample is exactly 1.
///
/// Samples are expected to be non-negative radiances; a cube whose maximum is
/// not positive cannot be normalized.
pub fn normalize_cube(cube: &SpectralCube) -> Result<SpectralCube> {
    let max = cube.max();
    if !(max > 0.0) {
        return Err(Error::Degenerate(format!(
            "maximum sample is {max}, cannot normalize"
        )));
    }
    if max == 1.0 {
        return Ok(cube.clone());
    }
    Ok(cube.map(|v| v / max))
}

/// Axis-aligned pixel rectangle.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl Region {
    pub fn new(x0: usize, y0: usize, w: usize, h: usize) -> Self {
        Self { x0, y0, w, h }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self::new(0, 0, width, height)
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    /// Checks the region is non-empty and lies inside a `width x height` grid.
    pub fn validate(&self, width: usize, height: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::Empty(format!("region {self:?} has no pixels")));
        }
        let inside = self.x0.checked_add(self.w).is_some_and(|r| r <= width)
            && self.y0.checked_add(self.h).is_some_and(|b| b <= height);
        if !inside {
            return Err(Error::Shape(format!(
                "region {self:?} exceeds {width}x{height} image"
            )));
        }
        Ok(())
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.h).flat_map(move |y| (self.x0..self.x0 + self.w).map(move |x| (x, y)))
    }
}

/// Mean spectrum over `region`, max-normalized to `[0, 1]`.
///
/// A region whose mean spectrum is identically zero is returned unscaled.
pub fn mean_spectrum(cube: &SpectralCube, region: &Region) -> Result<Vec<f64>> {
    region.validate(cube.width(), cube.height())?;
    let count = (region.w * region.h) as f64;
    let mut spectrum: Vec<f64> = (0..cube.bands())
        .map(|l| {
            let band = cube.band(l);
            region
                .pixels()
                .map(|(x, y)| band[y * cube.width() + x])
                .sum::<f64>()
                / count
        })
        .collect();
    let peak = spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak > 0.0 {
        for v in spectrum.iter_mut() {
            *v /= peak;
        }
    }
    Ok(spectrum)
}
