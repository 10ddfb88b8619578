//! Convolutional sparse coding of spectral cubes.
//!
//! Every band is modeled as `sum_m d_m * x[l][m]` with a shared kernel bank.
//! Coefficients are estimated by ADMM: a per-band quadratic update solved
//! exactly in the DFT domain ([`x_update`]), a group soft-threshold that
//! couples the same kernel and pixel across all bands ([`group_shrink`]),
//! and a scaled dual update ([`dual_update`]).
//!
//! Only the high-pass part of each band is coded; see [`lowpass_split`].

mod coeffs;
mod dictionary;
pub mod fft;
mod lowpass;
mod solve;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;

pub use coeffs::{dual_update, group_shrink, AdmmState, CoeffStack};
pub use dictionary::{dict_fft, ConvDictionary, DictSpectrum};
pub use lowpass::lowpass_split;
pub use solve::{reconstruct_from_coeffs, solve_rank1_system, x_update};

use crate::cube::{Image2D, SpectralCube};
use crate::error::{Error, Result};
use crate::params::SolverParams;

/// Diagnostics of one [`csc_denoise`] call.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CscTrace {
    /// `||x - delta||` after each inner iteration.
    pub primal_residuals: Vec<f64>,
}

/// Sparse-coding denoiser with a precomputed dictionary spectrum.
///
/// Each band is split into low- and high-pass parts. The high-pass parts of
/// all bands are coded jointly with `params.inner_iters` ADMM rounds started
/// from zero, and each band is returned as its low-pass part plus the
/// synthesis of the final coefficients `x`.
pub fn csc_denoise_with(
    cube: &SpectralCube,
    spec: &DictSpectrum,
    params: &SolverParams,
) -> Result<(SpectralCube, CscTrace)> {
    params.validate()?;
    let (w, h, bands) = (cube.width(), cube.height(), cube.bands());
    if spec.width() != w || spec.height() != h {
        return Err(Error::Shape(format!(
            "dictionary spectrum is {}x{}, cube is {w}x{h}",
            spec.width(),
            spec.height()
        )));
    }
    let mut lows = Vec::with_capacity(bands);
    let mut target_hats: Vec<Vec<Complex64>> = Vec::with_capacity(bands);
    let mut scratch = solve::UpdateScratch::default();
    for l in 0..bands {
        let band = Image2D::from_raw(w, h, cube.band(l).to_vec());
        let (low, high) = lowpass_split(&band, params.lowpass_weight)?;
        target_hats.push(solve::target_spectrum(spec, high.data(), &mut scratch));
        lows.push(low);
    }

    let mut state = AdmmState::zeros(bands, spec.num_kernels(), w, h);
    for _ in 0..params.inner_iters {
        let delta = &state.delta;
        let u = &state.u;
        state
            .x
            .bands_mut()
            .collect::<Vec<_>>()
            .into_par_iter()
            .enumerate()
            .for_each_init(solve::UpdateScratch::default, |scratch, (l, x_band)| {
                solve::x_update_into(
                    spec,
                    &target_hats[l],
                    delta.band(l),
                    u.band(l),
                    params.rho,
                    x_band,
                    scratch,
                );
            });
        coeffs::shrink_and_dual(&mut state, params.kappa);
    }

    let mut out = cube.clone();
    let planes: Vec<Image2D> = (0..bands)
        .into_par_iter()
        .map_init(fft::FftScratch::default, |scratch, l| solve::synthesize(spec, state.x.band(l), scratch))
        .collect();
    for ((dst, low), high) in out.bands_mut().zip(&lows).zip(&planes) {
        for ((d, a), b) in dst.iter_mut().zip(low.data()).zip(high.data()) {
            *d = a + b;
        }
    }
    Ok((
        out,
        CscTrace {
            primal_residuals: state.primal_residuals,
        },
    ))
}

/// [`csc_denoise_with`] for a dictionary not yet transformed.
pub fn csc_denoise(
    cube: &SpectralCube,
    dict: &ConvDictionary,
    params: &SolverParams,
) -> Result<SpectralCube> {
    let spec = dict_fft(dict, cube.width(), cube.height())?;
    Ok(csc_denoise_with(cube, &spec, params)?.0)
}
