//! Frequency-domain coefficient update.
//!
//! For one band with target `s`, the update minimizes
//!
//! ```text
//! 0.5 * || sum_m d_m * x_m - s ||^2 + (rho / 2) * sum_m || x_m - z_m ||^2
//! ```
//!
//! with `z_m = delta_m - u_m`. In the DFT domain this decouples into one
//! `M x M` system per frequency, `(conj(a) a^T + rho I) x = b`, which the
//! Sherman-Morrison identity solves in `O(M)`.

use rustfft::num_complex::Complex64;

use super::dictionary::DictSpectrum;
use super::fft::FftScratch;
use crate::cube::Image2D;
use crate::error::{Error, Result};

/// Solves `(conj(d) d^T + rho I) x = b` for a single frequency.
pub fn solve_rank1_system(dhat: &[Complex64], b: &[Complex64], rho: f64) -> Result<Vec<Complex64>> {
    if !(rho > 0.0) {
        return Err(Error::Parameter(format!("rho must be > 0, got {rho}")));
    }
    if dhat.len() != b.len() {
        return Err(Error::Shape(format!(
            "dictionary vector has {} entries, right-hand side {}",
            dhat.len(),
            b.len()
        )));
    }
    let energy: f64 = dhat.iter().map(|d| d.norm_sqr()).sum();
    let dtb: Complex64 = dhat.iter().zip(b).map(|(d, v)| d * v).sum();
    let c = dtb / (rho + energy);
    Ok(dhat.iter().zip(b).map(|(d, v)| (v - d.conj() * c) / rho).collect())
}

fn check_band(spec: &DictSpectrum, planes: &[f64], what: &str) -> Result<()> {
    let expected = spec.num_kernels() * spec.width() * spec.height();
    if planes.len() != expected {
        return Err(Error::Shape(format!(
            "{what}: expected {} planes of {}x{} ({expected} values), got {}",
            spec.num_kernels(),
            spec.width(),
            spec.height(),
            planes.len()
        )));
    }
    Ok(())
}

fn check_target(spec: &DictSpectrum, target: &Image2D) -> Result<()> {
    if target.width() != spec.width() || target.height() != spec.height() {
        return Err(Error::Shape(format!(
            "target {}x{} vs dictionary spectrum {}x{}",
            target.width(),
            target.height(),
            spec.width(),
            spec.height()
        )));
    }
    Ok(())
}

/// Per-thread buffers for the coefficient update.
#[derive(Default)]
pub(crate) struct UpdateScratch {
    pub(crate) fft: FftScratch,
    q: Vec<Complex64>,
    buf: Vec<Complex64>,
    spec: Vec<Complex64>,
}

/// Transposed-layout spectrum of a real target plane, as consumed by
/// [`x_update_into`].
pub(crate) fn target_spectrum(spec: &DictSpectrum, target: &[f64], scratch: &mut UpdateScratch) -> Vec<Complex64> {
    let n = target.len();
    scratch.buf.clear();
    scratch.buf.extend(target.iter().map(|&v| Complex64::new(v, 0.0)));
    let mut out = vec![Complex64::default(); n];
    spec.fft().forward_transposed(&mut scratch.buf, &mut out, &mut scratch.fft);
    out
}

/// Same as [`x_update`] with a pre-transformed target, writing into `out`.
///
/// Per frequency the Sherman-Morrison solution of
/// `(conj(a) a^T + rho I) x = conj(a) s + rho z` can be written
/// `x = z + conj(a) q` with `q = (s - a^T z) / (rho + |a|^2)`. The first
/// pass accumulates `q` over kernels, the second adds the inverse
/// transform of `conj(a_m) q` to `z_m`. Kernels go through the FFT in pairs
/// packed as real and imaginary parts.
pub(crate) fn x_update_into(
    spec: &DictSpectrum,
    target_hat: &[Complex64],
    delta: &[f64],
    u: &[f64],
    rho: f64,
    out: &mut [f64],
    scratch: &mut UpdateScratch,
) {
    let n = spec.width() * spec.height();
    let kernels = spec.num_kernels();
    let fft = spec.fft();
    let neg = &spec.neg_t;
    scratch.buf.resize(n, Complex64::default());
    scratch.spec.resize(n, Complex64::default());
    scratch.q.clear();
    scratch.q.extend_from_slice(target_hat);

    // pass 1: z into `out`, q = s - sum_m a_m z_m
    let mut m = 0;
    while m < kernels {
        let pair = m + 1 < kernels;
        for p in 0..n {
            let za = delta[m * n + p] - u[m * n + p];
            out[m * n + p] = za;
            let zb = if pair {
                let zb = delta[(m + 1) * n + p] - u[(m + 1) * n + p];
                out[(m + 1) * n + p] = zb;
                zb
            } else {
                0.0
            };
            scratch.buf[p] = Complex64::new(za, zb);
        }
        fft.forward_transposed(&mut scratch.buf, &mut scratch.spec, &mut scratch.fft);
        let da = &spec.spectra_t[m];
        if pair {
            let db = &spec.spectra_t[m + 1];
            for k in 0..n {
                let zk = scratch.spec[k];
                let zn = scratch.spec[neg[k]].conj();
                let a = (zk + zn) * 0.5;
                let d = (zk - zn) * 0.5;
                let b = Complex64::new(d.im, -d.re);
                scratch.q[k] -= da[k] * a + db[k] * b;
            }
        } else {
            for k in 0..n {
                scratch.q[k] -= da[k] * scratch.spec[k];
            }
        }
        m += if pair { 2 } else { 1 };
    }
    for (qv, e) in scratch.q.iter_mut().zip(&spec.energy_t) {
        *qv /= rho + e;
    }

    // pass 2: x_m = z_m + F^-1(conj(a_m) q)
    let mut m = 0;
    while m < kernels {
        let pair = m + 1 < kernels;
        let da = &spec.spectra_t[m];
        if pair {
            let db = &spec.spectra_t[m + 1];
            for k in 0..n {
                let q = scratch.q[k];
                let cb = db[k].conj() * q;
                scratch.spec[k] = da[k].conj() * q + Complex64::new(-cb.im, cb.re);
            }
        } else {
            for k in 0..n {
                scratch.spec[k] = da[k].conj() * scratch.q[k];
            }
        }
        fft.inverse_transposed(&mut scratch.spec, &mut scratch.buf, &mut scratch.fft);
        for p in 0..n {
            out[m * n + p] += scratch.buf[p].re;
        }
        if pair {
            for p in 0..n {
                out[(m + 1) * n + p] += scratch.buf[p].im;
            }
        }
        m += if pair { 2 } else { 1 };
    }
}

/// Exact minimizer of the band coefficient subproblem.
///
/// `delta` and `u` hold `M` planes of the image size back to back
/// (kernel-major); the result has the same layout.
pub fn x_update(
    spec: &DictSpectrum,
    target: &Image2D,
    delta: &[f64],
    u: &[f64],
    rho: f64,
) -> Result<Vec<f64>> {
    if !(rho > 0.0) {
        return Err(Error::Parameter(format!("rho must be > 0, got {rho}")));
    }
    check_target(spec, target)?;
    check_band(spec, delta, "delta")?;
    check_band(spec, u, "u")?;
    let mut scratch = UpdateScratch::default();
    let target_hat = target_spectrum(spec, target.data(), &mut scratch);
    let mut out = vec![0.0; delta.len()];
    x_update_into(spec, &target_hat, delta, u, rho, &mut out, &mut scratch);
    Ok(out)
}

/// `sum_m d_m * x_m` with circular convolution.
pub fn reconstruct_from_coeffs(spec: &DictSpectrum, coeffs: &[f64]) -> Result<Image2D> {
    check_band(spec, coeffs, "coefficients")?;
    let mut scratch = FftScratch::default();
    Ok(synthesize(spec, coeffs, &mut scratch))
}

pub(crate) fn synthesize(spec: &DictSpectrum, coeffs: &[f64], scratch: &mut FftScratch) -> Image2D {
    let n = spec.width() * spec.height();
    let fft = spec.fft();
    let mut acc = vec![Complex64::default(); n];
    for (m, plane) in coeffs.chunks_exact(n).enumerate() {
        if plane.iter().all(|&v| v == 0.0) {
            continue;
        }
        let x_hat = fft.forward_real(plane, scratch);
        for ((a, d), x) in acc.iter_mut().zip(spec.spectrum(m)).zip(&x_hat) {
            *a += d * x;
        }
    }
    let data = fft.inverse_real(&mut acc, scratch);
    Image2D::from_raw(spec.width(), spec.height(), data)
}
