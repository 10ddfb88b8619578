//! Reconstruction quality metrics: PSNR, SSIM and the spectral angle mapper.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::cube::{Image2D, Region, SpectralCube};
use crate::error::{Error, Result};

/// Returned by [`psnr`] when the inputs are identical, and the ceiling for
/// every other result.
pub const PSNR_CAP_DB: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn check_cubes(a: &SpectralCube, b: &SpectralCube) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::Shape(format!(
            "cubes differ: {}x{}x{} vs {}x{}x{}",
            a.width(),
            a.height(),
            a.bands(),
            b.width(),
            b.height(),
            b.bands()
        )));
    }
    Ok(())
}

/// `10 log10(peak^2 / MSE)` with the MSE taken over every voxel, capped at
/// [`PSNR_CAP_DB`].
pub fn psnr(a: &SpectralCube, b: &SpectralCube, peak: f64) -> Result<f64> {
    check_cubes(a, b)?;
    if !(peak > 0.0) {
        return Err(Error::Parameter(format!("peak must be > 0, got {peak}")));
    }
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = w.iter().sum();
    for v in w.iter_mut() {
        *v /= sum;
    }
    w
}

/// Separable Gaussian filter evaluated only where the window fits.
fn filter_valid(data: &[f64], width: usize, height: usize, win: &[f64]) -> Vec<f64> {
    let k = win.len();
    let (ow, oh) = (width - k + 1, height - k + 1);
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let src = &data[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = win.iter().zip(&src[x..x + k]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = win
                .iter()
                .enumerate()
                .map(|(j, wv)| wv * rows[(y + j) * ow + x])
                .sum();
        }
    }
    out
}

fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> f64 {
    let win = gaussian_window();
    let c1 = (SSIM_K1 * 1.0).powi(2);
    let c2 = (SSIM_K2 * 1.0).powi(2);
    let aa: Vec<f64> = a.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = b.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    let mu_a = filter_valid(a, width, height, &win);
    let mu_b = filter_valid(b, width, height, &win);
    let e_aa = filter_valid(&aa, width, height, &win);
    let e_bb = filter_valid(&bb, width, height, &win);
    let e_ab = filter_valid(&ab, width, height, &win);
    let n = mu_a.len();
    let mut total = 0.0;
    for i in 0..n {
        let (ma, mb) = (mu_a[i], mu_b[i]);
        let var_a = e_aa[i] - ma * ma;
        let var_b = e_bb[i] - mb * mb;
        let cov = e_ab[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        total += num / den;
    }
    total / n as f64
}

/// Mean SSIM over all 11x11 Gaussian windows (sigma 1.5) that fit inside
/// the image, with `K1 = 0.01`, `K2 = 0.03` and unit dynamic range.
pub fn ssim(a: &Image2D, b: &Image2D) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "image {}x{} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window",
            a.width(),
            a.height()
        )));
    }
    Ok(ssim_plane(a.data(), b.data(), a.width(), a.height()))
}

/// Mean of per-band SSIM.
pub fn ssim_cube(a: &SpectralCube, b: &SpectralCube) -> Result<f64> {
    check_cubes(a, b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "bands {}x{} smaller than the SSIM window",
            a.width(),
            a.height()
        )));
    }
    let total: f64 = (0..a.bands())
        .map(|l| ssim_plane(a.band(l), b.band(l), a.width(), a.height()))
        .sum();
    Ok(total / a.bands() as f64)
}

/// Angle between two spectra, `2 atan2(|a^ - b^|, |a^ + b^|)` on the unit
/// vectors. Equals `acos(<a, b> / (|a| |b|))` but stays accurate near 0.
/// `None` if either spectrum has zero norm.
pub fn spectral_angle(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (ux, uy) = (x / na, y / nb);
        diff += (ux - uy) * (ux - uy);
        sum += (ux + uy) * (ux + uy);
    }
    Some(2.0 * diff.sqrt().atan2(sum.sqrt()))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamStats {
    pub mean_rad: f64,
    pub pixels: usize,
    /// Pixels skipped because either spectrum was all zeros.
    pub skipped: usize,
}

pub fn sam_region_stats(a: &SpectralCube, b: &SpectralCube, region: &Region) -> Result<SamStats> {
    check_cubes(a, b)?;
    region.validate(a.width(), a.height())?;
    let (mut total, mut pixels, mut skipped) = (0.0, 0usize, 0usize);
    for (x, y) in region.pixels() {
        match spectral_angle(&a.spectrum_at(x, y), &b.spectrum_at(x, y)) {
            Some(angle) => {
                total += angle;
                pixels += 1;
            }
            None => skipped += 1,
        }
    }
    if pixels == 0 {
        return Err(Error::Data(format!(
            "every pixel in region {region:?} has a zero spectrum"
        )));
    }
    Ok(SamStats {
        mean_rad: total / pixels as f64,
        pixels,
        skipped,
    })
}

/// Mean per-pixel spectral angle over `region`, in radians.
pub fn sam_region(a: &SpectralCube, b: &SpectralCube, region: &Region) -> Result<f64> {
    sam_region_stats(a, b, region).map(|s| s.mean_rad)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub sam_rad: f64,
}

impl MetricsReport {
    /// PSNR (peak 1) and SSIM over the whole cube, SAM over `region`.
    pub fn compute(truth: &SpectralCube, estimate: &SpectralCube, region: &Region) -> Result<Self> {
        Ok(Self {
            psnr_db: psnr(truth, estimate, 1.0)?,
            ssim: ssim_cube(truth, estimate)?,
            sam_rad: sam_region(truth, estimate, region)?,
        })
    }
}

/// Writes `scope,psnr_db,ssim,sam_rad` rows.
pub fn write_metrics_csv<W: Write>(mut out: W, rows: &[(String, MetricsReport)]) -> std::io::Result<()> {
    writeln!(out, "scope,psnr_db,ssim,sam_rad")?;
    for (scope, r) in rows {
        writeln!(out, "{scope},{:.6},{:.6},{:.6}", r.psnr_db, r.ssim, r.sam_rad)?;
    }
    Ok(())
}
