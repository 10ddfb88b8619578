//! C interface to `specrec`.
//!
//! Objects live behind opaque handles created by `sr_*_new`/`sr_*_load`
//! style functions and released with the matching `sr_*_free`. Every
//! fallible function returns an [`SrStatus`]; on failure a description is
//! kept per thread and can be fetched with [`sr_last_error_message`].
//! Output handles are only written on success.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use specrec::csc::ConvDictionary;
use specrec::forward::{add_noise, build_system, forward, generate_mask, SystemMasks};
use specrec::metrics::MetricsReport;
use specrec::pipeline::{reconstruct, Method};
use specrec::{Error, Image2D, Region, SolverParams, SpectralCube};

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrStatus {
    Ok = 0,
    NullPointer = 1,
    Shape = 2,
    Parameter = 3,
    Index = 4,
    Degenerate = 5,
    Data = 6,
    Empty = 7,
    Format = 8,
    Io = 9,
    InvalidUtf8 = 10,
    Panic = 11,
}

/// Reconstruction methods accepted by [`sr_reconstruct`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SrMethod {
    GapTv = 0,
    CscNoTv = 1,
    CscTv = 2,
}

/// Solver settings; start from [`sr_params_default`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SrParams {
    pub beta: f64,
    pub rho: f64,
    pub kappa: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub tv_iters: usize,
    pub lowpass_weight: f64,
    pub gram_epsilon: f64,
    pub noise_sigma: f64,
}

impl From<SolverParams> for SrParams {
    fn from(p: SolverParams) -> Self {
        Self {
            beta: p.beta,
            rho: p.rho,
            kappa: p.kappa,
            outer_iters: p.outer_iters,
            inner_iters: p.inner_iters,
            tv_iters: p.tv_iters,
            lowpass_weight: p.lowpass_weight,
            gram_epsilon: p.gram_epsilon,
            noise_sigma: p.noise_sigma,
        }
    }
}

impl From<SrParams> for SolverParams {
    fn from(p: SrParams) -> Self {
        Self {
            beta: p.beta,
            rho: p.rho,
            kappa: p.kappa,
            outer_iters: p.outer_iters,
            inner_iters: p.inner_iters,
            tv_iters: p.tv_iters,
            lowpass_weight: p.lowpass_weight,
            gram_epsilon: p.gram_epsilon,
            noise_sigma: p.noise_sigma,
        }
    }
}

/// Reconstruction quality figures.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SrMetrics {
    pub psnr_db: f64,
    pub ssim: f64,
    pub sam_rad: f64,
}

/// A spectral cube, band-major.
pub struct SrCube(SpectralCube);
/// A single plane: a measurement or a coded aperture.
pub struct SrImage(Image2D);
/// Per-band coding masks.
pub struct SrSystem(SystemMasks);
/// A bank of convolution kernels.
pub struct SrDictionary(ConvDictionary);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> SrStatus {
    match e {
        Error::Shape(_) => SrStatus::Shape,
        Error::Parameter(_) => SrStatus::Parameter,
        Error::Index { .. } => SrStatus::Index,
        Error::Degenerate(_) => SrStatus::Degenerate,
        Error::Data(_) => SrStatus::Data,
        Error::Empty(_) => SrStatus::Empty,
        Error::Format { .. } => SrStatus::Format,
        Error::Io { .. } => SrStatus::Io,
    }
}

/// Failure inside the shim itself, before reaching the library.
struct Fail(SrStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> SrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            SrStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SrStatus::Panic
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(SrStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SrStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn check_out<T>(out: *mut *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(SrStatus::NullPointer, "output pointer is null".into()));
    }
    Ok(())
}

unsafe fn path<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(SrStatus::NullPointer, "path is null".into()));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(SrStatus::InvalidUtf8, "path is not valid UTF-8".into()))
}

unsafe fn values<'a>(data: *const f64, len: usize) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return Err(Fail(SrStatus::NullPointer, "data is null".into()));
    }
    Ok(std::slice::from_raw_parts(data, len))
}

unsafe fn copy_out(src: &[f64], out: *mut f64, len: usize) -> Result<(), Fail> {
    if len != src.len() {
        return Err(Fail(
            SrStatus::Shape,
            format!("buffer holds {len} values, object has {}", src.len()),
        ));
    }
    if len > 0 {
        if out.is_null() {
            return Err(Fail(SrStatus::NullPointer, "output buffer is null".into()));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), out, len);
    }
    Ok(())
}

fn dim_product(dims: &[usize]) -> Result<usize, Fail> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Fail(SrStatus::Shape, "dimensions overflow".into()))
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len` bytes) and returns the full message
/// length plus one. Passing a null `buf` just reports the length.
#[no_mangle]
pub unsafe extern "C" fn sr_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        msg.len() + 1
    })
}

#[no_mangle]
pub extern "C" fn sr_params_default() -> SrParams {
    SolverParams::default().into()
}

/// Copies `width * height * bands` values (band-major) into a new cube.
#[no_mangle]
pub unsafe extern "C" fn sr_cube_new(
    width: usize,
    height: usize,
    bands: usize,
    data: *const f64,
    out: *mut *mut SrCube,
) -> SrStatus {
    guard(|| {
        check_out(out)?;
        let n = dim_product(&[width, height, bands])?;
        let cube = SpectralCube::new(width, height, bands, values(data, n)?.to_vec())?;
        put(out, SrCube(cube))
    })
}

/// The bundled synthetic test scene.
#[no_mangle]
pub unsafe extern "C" fn sr_cube_synthetic(width: usize, height: usize, bands: usize, out: *mut *mut SrCube) -> SrStatus {
    guard(|| {
        check_out(out)?;
        if width == 0 || height == 0 || bands == 0 {
            return Err(Fail(SrStatus::Shape, "dimensions must be nonzero".into()));
        }
        put(out, SrCube(specrec::synthetic::textured_scene(width, height, bands)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_cube_dims(
    cube: *const SrCube,
    width: *mut usize,
    height: *mut usize,
    bands: *mut usize,
) -> SrStatus {
    guard(|| {
        let c = &get(cube, "cube")?.0;
        for (p, v) in [(width, c.width()), (height, c.height()), (bands, c.bands())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Copies the cube's values into `out`, which must hold exactly `len`
/// values.
#[no_mangle]
pub unsafe extern "C" fn sr_cube_copy_data(cube: *const SrCube, out: *mut f64, len: usize) -> SrStatus {
    guard(|| copy_out(get(cube, "cube")?.0.data(), out, len))
}

#[no_mangle]
pub unsafe extern "C" fn sr_cube_load(path_utf8: *const c_char, out: *mut *mut SrCube) -> SrStatus {
    guard(|| {
        check_out(out)?;
        put(out, SrCube(specrec::io::load_cube(path(path_utf8)?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_cube_save(cube: *const SrCube, path_utf8: *const c_char) -> SrStatus {
    guard(|| Ok(specrec::io::save_cube(&get(cube, "cube")?.0, path(path_utf8)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn sr_cube_free(cube: *mut SrCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Copies `width * height` row-major values into a new image.
#[no_mangle]
pub unsafe extern "C" fn sr_image_new(width: usize, height: usize, data: *const f64, out: *mut *mut SrImage) -> SrStatus {
    guard(|| {
        check_out(out)?;
        let n = dim_product(&[width, height])?;
        put(out, SrImage(Image2D::new(width, height, values(data, n)?.to_vec())?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_image_dims(image: *const SrImage, width: *mut usize, height: *mut usize) -> SrStatus {
    guard(|| {
        let img = &get(image, "image")?.0;
        for (p, v) in [(width, img.width()), (height, img.height())] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_image_copy_data(image: *const SrImage, out: *mut f64, len: usize) -> SrStatus {
    guard(|| copy_out(get(image, "image")?.0.data(), out, len))
}

#[no_mangle]
pub unsafe extern "C" fn sr_image_load(path_utf8: *const c_char, out: *mut *mut SrImage) -> SrStatus {
    guard(|| {
        check_out(out)?;
        put(out, SrImage(specrec::io::load_image(path(path_utf8)?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_image_save(image: *const SrImage, path_utf8: *const c_char) -> SrStatus {
    guard(|| Ok(specrec::io::save_image(&get(image, "image")?.0, path(path_utf8)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn sr_image_free(image: *mut SrImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Random binary aperture with roughly `density` open pixels.
#[no_mangle]
pub unsafe extern "C" fn sr_mask_generate(
    width: usize,
    height: usize,
    seed: u64,
    density: f64,
    out: *mut *mut SrImage,
) -> SrStatus {
    guard(|| {
        check_out(out)?;
        put(out, SrImage(generate_mask(width, height, seed, density)?))
    })
}

/// Shears `mask` by `shear_step` pixels per band.
#[no_mangle]
pub unsafe extern "C" fn sr_system_build(
    mask: *const SrImage,
    bands: usize,
    shear_step: i64,
    out: *mut *mut SrSystem,
) -> SrStatus {
    guard(|| {
        check_out(out)?;
        put(out, SrSystem(build_system(&get(mask, "mask")?.0, bands, shear_step)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_system_free(system: *mut SrSystem) {
    if !system.is_null() {
        drop(Box::from_raw(system));
    }
}

/// Snapshot of `cube` through `system`.
#[no_mangle]
pub unsafe extern "C" fn sr_forward(system: *const SrSystem, cube: *const SrCube, out: *mut *mut SrImage) -> SrStatus {
    guard(|| {
        check_out(out)?;
        let y = forward(&get(system, "system")?.0, &get(cube, "cube")?.0)?;
        put(out, SrImage(y.into_image()))
    })
}

/// Adds seeded Gaussian noise with standard deviation `sigma`.
#[no_mangle]
pub unsafe extern "C" fn sr_add_noise(image: *const SrImage, sigma: f64, seed: u64, out: *mut *mut SrImage) -> SrStatus {
    guard(|| {
        check_out(out)?;
        let y = get(image, "image")?.0.clone().into();
        put(out, SrImage(add_noise(&y, sigma, seed)?.into_image()))
    })
}

/// Orthonormal 2-D DCT atoms of size `kernel_size`.
#[no_mangle]
pub unsafe extern "C" fn sr_dictionary_dct(kernel_size: usize, out: *mut *mut SrDictionary) -> SrStatus {
    guard(|| {
        check_out(out)?;
        if kernel_size == 0 {
            return Err(Fail(SrStatus::Parameter, "kernel size must be nonzero".into()));
        }
        put(out, SrDictionary(ConvDictionary::dct(kernel_size)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_dictionary_load(path_utf8: *const c_char, out: *mut *mut SrDictionary) -> SrStatus {
    guard(|| {
        check_out(out)?;
        put(out, SrDictionary(specrec::io::load_dictionary(path(path_utf8)?)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn sr_dictionary_save(dict: *const SrDictionary, path_utf8: *const c_char) -> SrStatus {
    guard(|| Ok(specrec::io::save_dictionary(&get(dict, "dictionary")?.0, path(path_utf8)?)?))
}

#[no_mangle]
pub unsafe extern "C" fn sr_dictionary_free(dict: *mut SrDictionary) {
    if !dict.is_null() {
        drop(Box::from_raw(dict));
    }
}

/// Reconstructs a cube from `y`. `method` is an [`SrMethod`] value; `dict`
/// may be null for `GapTv`, `params` may be null for the defaults.
#[no_mangle]
pub unsafe extern "C" fn sr_reconstruct(
    system: *const SrSystem,
    y: *const SrImage,
    dict: *const SrDictionary,
    params: *const SrParams,
    method: u32,
    out: *mut *mut SrCube,
) -> SrStatus {
    guard(|| {
        check_out(out)?;
        let method = match method {
            0 => Method::GapTvOnly,
            1 => Method::CscWithoutTv,
            2 => Method::CscWithTv,
            other => return Err(Fail(SrStatus::Parameter, format!("unknown method {other}"))),
        };
        let params = params.as_ref().map(|p| SolverParams::from(*p)).unwrap_or_default();
        let dict = dict.as_ref().map(|d| &d.0);
        let (cube, _) = reconstruct(&get(system, "system")?.0, &get(y, "measurement")?.0, dict, &params, method, None)?;
        put(out, SrCube(cube))
    })
}

/// PSNR and SSIM of `estimate` against `truth`, with SAM averaged over the
/// whole image.
#[no_mangle]
pub unsafe extern "C" fn sr_metrics(truth: *const SrCube, estimate: *const SrCube, out: *mut SrMetrics) -> SrStatus {
    guard(|| {
        if out.is_null() {
            return Err(Fail(SrStatus::NullPointer, "output pointer is null".into()));
        }
        let t = &get(truth, "truth")?.0;
        let r = MetricsReport::compute(t, &get(estimate, "estimate")?.0, &Region::full(t.width(), t.height()))?;
        *out = SrMetrics {
            psnr_db: r.psnr_db,
            ssim: r.ssim,
            sam_rad: r.sam_rad,
        };
        Ok(())
    })
}
