//! Unnormalized 2-D DFT on row-major planes.
//!
//! The forward transform carries no scaling; the inverse divides by
//! `width * height`, so `inverse(forward(x)) == x`.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Fft2({}x{})", self.width, self.height)
    }
}

/// Reusable buffers for [`Fft2`]; one per thread.
#[derive(Default)]
pub struct FftScratch {
    transposed: Vec<Complex64>,
    inner: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        let row_fwd = planner.plan_fft_forward(width);
        let row_inv = planner.plan_fft_inverse(width);
        let col_fwd = planner.plan_fft_forward(height);
        let col_inv = planner.plan_fft_inverse(height);
        let scratch_len = [&row_fwd, &row_inv, &col_fwd, &col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0);
        Self {
            width,
            height,
            row_fwd,
            row_inv,
            col_fwd,
            col_inv,
            scratch_len,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn transform(&self, data: &mut [Complex64], scratch: &mut FftScratch, inverse: bool) {
        let (w, h) = (self.width, self.height);
        assert_eq!(data.len(), w * h);
        let (rows, cols) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        scratch.inner.resize(self.scratch_len, Complex64::default());
        rows.process_with_scratch(data, &mut scratch.inner);
        if h > 1 {
            let t = &mut scratch.transposed;
            t.resize(w * h, Complex64::default());
            transpose(data, t, w, h);
            cols.process_with_scratch(t, &mut scratch.inner);
            transpose(t, data, h, w);
        }
    }

    /// Forward transform of `data` (row-major, overwritten) into `out` in
    /// transposed layout: frequency `(kx, ky)` lands at `kx * height + ky`.
    pub(crate) fn forward_transposed(&self, data: &mut [Complex64], out: &mut [Complex64], scratch: &mut FftScratch) {
        let (w, h) = (self.width, self.height);
        scratch.inner.resize(self.scratch_len, Complex64::default());
        self.row_fwd.process_with_scratch(data, &mut scratch.inner);
        transpose(data, out, w, h);
        self.col_fwd.process_with_scratch(out, &mut scratch.inner);
    }

    /// Inverse of [`Fft2::forward_transposed`]: `spectrum` is consumed as a
    /// work buffer and the row-major result goes to `out`.
    pub(crate) fn inverse_transposed(&self, spectrum: &mut [Complex64], out: &mut [Complex64], scratch: &mut FftScratch) {
        let (w, h) = (self.width, self.height);
        scratch.inner.resize(self.scratch_len, Complex64::default());
        self.col_inv.process_with_scratch(spectrum, &mut scratch.inner);
        transpose(spectrum, out, h, w);
        self.row_inv.process_with_scratch(out, &mut scratch.inner);
        let scale = 1.0 / (w * h) as f64;
        for v in out.iter_mut() {
            *v *= scale;
        }
    }

    /// For each slot of the transposed layout, the slot holding the negated
    /// frequency.
    pub(crate) fn negated_transposed(&self) -> Vec<usize> {
        let (w, h) = (self.width, self.height);
        let mut neg = vec![0; w * h];
        for kx in 0..w {
            for ky in 0..h {
                neg[kx * h + ky] = ((w - kx) % w) * h + (h - ky) % h;
            }
        }
        neg
    }

    pub fn forward_in_place(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.transform(data, scratch, false);
    }

    /// Inverse transform including the `1 / (width * height)` factor.
    pub fn inverse_in_place(&self, data: &mut [Complex64], scratch: &mut FftScratch) {
        self.transform(data, scratch, true);
        let scale = 1.0 / (self.width * self.height) as f64;
        for v in data.iter_mut() {
            *v *= scale;
        }
    }

    pub fn forward_real(&self, real: &[f64], scratch: &mut FftScratch) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = real.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward_in_place(&mut buf, scratch);
        buf
    }

    /// Transforms two real planes with one complex transform.
    pub fn forward_real_pair(
        &self,
        a: &[f64],
        b: &[f64],
        out_a: &mut [Complex64],
        out_b: &mut [Complex64],
        scratch: &mut FftScratch,
    ) {
        let (w, h) = (self.width, self.height);
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.forward_in_place(&mut z, scratch);
        // A(k) = (Z(k) + conj Z(-k)) / 2, B(k) = (Z(k) - conj Z(-k)) / 2i
        for ky in 0..h {
            let ny = (h - ky) % h;
            for kx in 0..w {
                let nx = (w - kx) % w;
                let zk = z[ky * w + kx];
                let zn = z[ny * w + nx].conj();
                out_a[ky * w + kx] = (zk + zn) * 0.5;
                let d = (zk - zn) * 0.5;
                out_b[ky * w + kx] = Complex64::new(d.im, -d.re);
            }
        }
    }

    /// Inverse transform keeping only the real part.
    pub fn inverse_real(&self, spectrum: &mut [Complex64], scratch: &mut FftScratch) -> Vec<f64> {
        self.inverse_in_place(spectrum, scratch);
        spectrum.iter().map(|c| c.re).collect()
    }

    /// Inverts two spectra of real planes with one complex transform.
    /// `spec_a` is used as the work buffer.
    pub fn inverse_real_pair(
        &self,
        spec_a: &mut [Complex64],
        spec_b: &[Complex64],
        out_a: &mut [f64],
        out_b: &mut [f64],
        scratch: &mut FftScratch,
    ) {
        for (a, b) in spec_a.iter_mut().zip(spec_b) {
            *a += Complex64::new(-b.im, b.re);
        }
        self.inverse_in_place(spec_a, scratch);
        for ((v, xa), xb) in spec_a.iter().zip(out_a.iter_mut()).zip(out_b.iter_mut()) {
            *xa = v.re;
            *xb = v.im;
        }
    }
}

/// `src` is `rows` rows of `cols` values; `dst` gets `cols` rows of `rows`.
fn transpose(src: &[Complex64], dst: &mut [Complex64], cols: usize, rows: usize) {
    debug_assert_eq!(src.len(), cols * rows);
    for (y, row) in src.chunks_exact(cols).enumerate() {
        for (x, v) in row.iter().enumerate() {
            dst[x * rows + y] = *v;
        }
    }
}
