use rustfft::num_complex::Complex64;

use super::fft::{Fft2, FftScratch};
use crate::error::{Error, Result};

/// A bank of square convolution kernels, each normalized to unit Euclidean
/// norm. Kernels are stored row-major, one after another.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvDictionary {
    kernel_size: usize,
    num_kernels: usize,
    kernels: Vec<f64>,
}

impl ConvDictionary {
    /// Normalizes each `kernel_size x kernel_size` kernel in `kernels`.
    pub fn new(kernel_size: usize, num_kernels: usize, mut kernels: Vec<f64>) -> Result<Self> {
        if kernel_size == 0 || num_kernels == 0 {
            return Err(Error::Shape(format!(
                "dictionary needs nonzero dims, got k={kernel_size}, M={num_kernels}"
            )));
        }
        let area = kernel_size * kernel_size;
        if kernels.len() != area * num_kernels {
            return Err(Error::Shape(format!(
                "{num_kernels} kernels of {kernel_size}x{kernel_size} need {} values, got {}",
                area * num_kernels,
                kernels.len()
            )));
        }
        for (m, kernel) in kernels.chunks_exact_mut(area).enumerate() {
            if kernel.iter().any(|v| !v.is_finite()) {
                return Err(Error::Data(format!("kernel {m} has non-finite values")));
            }
            let norm = kernel.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return Err(Error::Data(format!("kernel {m} is all zeros, cannot normalize")));
            }
            for v in kernel.iter_mut() {
                *v /= norm;
            }
        }
        Ok(Self {
            kernel_size,
            num_kernels,
            kernels,
        })
    }

    /// Separable 2-D DCT-II basis of size `k`: `k * k` orthonormal atoms.
    pub fn dct(k: usize) -> Self {
        assert!(k > 0, "kernel size must be nonzero");
        let basis = |u: usize, i: usize| {
            let c = if u == 0 { (1.0 / k as f64).sqrt() } else { (2.0 / k as f64).sqrt() };
            c * (std::f64::consts::PI * (2 * i + 1) as f64 * u as f64 / (2 * k) as f64).cos()
        };
        let mut kernels = Vec::with_capacity(k * k * k * k);
        for v in 0..k {
            for u in 0..k {
                for j in 0..k {
                    for i in 0..k {
                        kernels.push(basis(u, i) * basis(v, j));
                    }
                }
            }
        }
        Self::new(k, k * k, kernels).expect("DCT atoms are nonzero")
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn num_kernels(&self) -> usize {
        self.num_kernels
    }

    pub fn kernel(&self, m: usize) -> &[f64] {
        let area = self.kernel_size * self.kernel_size;
        &self.kernels[m * area..(m + 1) * area]
    }

    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }
}

/// Transforms of every kernel zero-padded to a `width x height` grid, with
/// the kernel's top-left sample at the origin.
///
/// Convolution is circular: `(d * x)(p) = sum_q d(q) x(p - q)`, so the
/// transform of `d * x` is `D(w) X(w)` under the unnormalized DFT.
#[derive(Clone, Debug)]
pub struct DictSpectrum {
    width: usize,
    height: usize,
    kernel_size: usize,
    spectra: Vec<Vec<Complex64>>,
    energy: Vec<f64>,
    fft: Fft2,
    // the same data in the transposed layout of `Fft2::forward_transposed`
    pub(crate) spectra_t: Vec<Vec<Complex64>>,
    pub(crate) energy_t: Vec<f64>,
    pub(crate) neg_t: Vec<usize>,
}

impl DictSpectrum {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_kernels(&self) -> usize {
        self.spectra.len()
    }

    pub fn kernel_size(&self) -> usize {
        self.kernel_size
    }

    pub fn spectrum(&self, m: usize) -> &[Complex64] {
        &self.spectra[m]
    }

    /// `sum_m |D_m(w)|^2` per frequency.
    pub fn energy(&self) -> &[f64] {
        &self.energy
    }

    pub fn fft(&self) -> &Fft2 {
        &self.fft
    }

    /// Recovers kernel `m` by inverse transform and cropping.
    pub fn kernel_from_spectrum(&self, m: usize) -> Vec<f64> {
        let mut buf = self.spectra[m].clone();
        let mut scratch = FftScratch::default();
        let full = self.fft.inverse_real(&mut buf, &mut scratch);
        let k = self.kernel_size;
        (0..k)
            .flat_map(|j| full[j * self.width..j * self.width + k].to_vec())
            .collect()
    }
}

pub fn dict_fft(dict: &ConvDictionary, width: usize, height: usize) -> Result<DictSpectrum> {
    let k = dict.kernel_size();
    if k > width || k > height {
        return Err(Error::Shape(format!(
            "kernel size {k} exceeds image {width}x{height}"
        )));
    }
    let fft = Fft2::new(width, height);
    let mut scratch = FftScratch::default();
    let n = width * height;
    let mut energy = vec![0.0; n];
    let spectra: Vec<Vec<Complex64>> = (0..dict.num_kernels())
        .map(|m| {
            let mut buf = vec![Complex64::default(); n];
            for (j, row) in dict.kernel(m).chunks_exact(k).enumerate() {
                for (i, &v) in row.iter().enumerate() {
                    buf[j * width + i] = Complex64::new(v, 0.0);
                }
            }
            fft.forward_in_place(&mut buf, &mut scratch);
            for (e, c) in energy.iter_mut().zip(&buf) {
                *e += c.norm_sqr();
            }
            buf
        })
        .collect();
    let to_t = |v: &[Complex64]| -> Vec<Complex64> {
        let mut t = vec![Complex64::default(); n];
        for (ky, row) in v.chunks_exact(width).enumerate() {
            for (kx, c) in row.iter().enumerate() {
                t[kx * height + ky] = *c;
            }
        }
        t
    };
    let spectra_t: Vec<Vec<Complex64>> = spectra.iter().map(|s: &Vec<Complex64>| to_t(s)).collect();
    let mut energy_t = vec![0.0; n];
    for (ky, row) in energy.chunks_exact(width).enumerate() {
        for (kx, e) in row.iter().enumerate() {
            energy_t[kx * height + ky] = *e;
        }
    }
    let neg_t = fft.negated_transposed();
    Ok(DictSpectrum {
        width,
        height,
        kernel_size: k,
        spectra,
        energy,
        fft,
        spectra_t,
        energy_t,
        neg_t,
    })
}
