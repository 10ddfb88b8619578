//! End-to-end reconstruction: alternating measurement projection, TV
//! denoising and cross-band sparse coding, plus the ablation variants and a
//! method comparison harness.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use crate::csc::{csc_denoise_with, dict_fft, ConvDictionary};
use crate::cube::{Image2D, Region, SpectralCube};
use crate::error::{Error, Result};
use crate::forward::{add_noise, build_system, forward, generate_mask, Measurement, SystemMasks};
use crate::gap::{gap_tv_solve, initial_estimate, measurement_residual, Projector};
use crate::metrics::{psnr, sam_region, ssim_cube, SSIM_WINDOW};
use crate::params::SolverParams;
use crate::tv::tv_chambolle_cube;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    /// Projection and TV only.
    GapTvOnly,
    /// Projection followed directly by sparse coding, no TV.
    CscWithoutTv,
    /// Projection, TV, then sparse coding every outer iteration.
    CscWithTv,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::GapTvOnly, Method::CscWithoutTv, Method::CscWithTv];

    pub fn name(self) -> &'static str {
        match self {
            Method::GapTvOnly => "gaptv",
            Method::CscWithoutTv => "csc-notv",
            Method::CscWithTv => "csc-tv",
        }
    }

    pub fn needs_dictionary(self) -> bool {
        !matches!(self, Method::GapTvOnly)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaptv" | "gap-tv" => Ok(Method::GapTvOnly),
            "csc-notv" | "csc-without-tv" => Ok(Method::CscWithoutTv),
            "csc-tv" | "csc-with-tv" => Ok(Method::CscWithTv),
            other => Err(Error::Parameter(format!(
                "unknown method {other:?} (expected gaptv, csc-notv or csc-tv)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub iteration: usize,
    /// `||y - H I||` of the estimate entering the projection.
    pub fidelity_before: f64,
    /// Same, right after the projection, over pixels with usable Gram entries.
    pub fidelity_projected: f64,
    /// Residual of the estimate leaving this iteration.
    pub fidelity: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
    /// Primal residuals of the inner sparse-coding loop (empty for GAP-TV).
    pub inner_residuals: Vec<f64>,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunTrace {
    pub records: Vec<RunRecord>,
}

impl RunTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        self.write_csv_with(out, true)
    }

    /// Like [`RunTrace::write_csv`]; with `timing` false the seconds column
    /// is left empty so the file only depends on the inputs.
    pub fn write_csv_with<W: Write>(&self, mut out: W, timing: bool) -> std::io::Result<()> {
        writeln!(
            out,
            "iteration,fidelity_before,fidelity_projected,fidelity,psnr,ssim,primal_first,primal_last,seconds"
        )?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for r in &self.records {
            writeln!(
                out,
                "{},{:.9e},{:.9e},{:.9e},{},{},{},{},{}",
                r.iteration,
                r.fidelity_before,
                r.fidelity_projected,
                r.fidelity,
                opt(r.psnr),
                opt(r.ssim),
                r.inner_residuals.first().map(|v| format!("{v:.9e}")).unwrap_or_default(),
                r.inner_residuals.last().map(|v| format!("{v:.9e}")).unwrap_or_default(),
                if timing { format!("{:.6}", r.seconds) } else { String::new() }
            )?;
        }
        Ok(())
    }
}

fn quality(gt: Option<&SpectralCube>, estimate: &SpectralCube) -> Result<(Option<f64>, Option<f64>)> {
    let Some(gt) = gt else { return Ok((None, None)) };
    let p = psnr(gt, estimate, 1.0)?;
    let s = if gt.width() >= SSIM_WINDOW && gt.height() >= SSIM_WINDOW {
        Some(ssim_cube(gt, estimate)?)
    } else {
        None
    };
    Ok((Some(p), s))
}

/// Reconstructs a cube from `y` with the chosen method.
///
/// Every method starts from `H^T y / gram` and runs `params.outer_iters`
/// outer rounds; the sparse-coding methods need `dict`. Each round's output
/// seeds the next projection.
pub fn reconstruct(
    system: &SystemMasks,
    y: &Image2D,
    dict: Option<&ConvDictionary>,
    params: &SolverParams,
    method: Method,
    ground_truth: Option<&SpectralCube>,
) -> Result<(SpectralCube, RunTrace)> {
    params.validate()?;
    if y.width() != system.width() || y.height() != system.height() {
        return Err(Error::Shape(format!(
            "measurement {}x{} does not match system {}x{}",
            y.width(),
            y.height(),
            system.width(),
            system.height()
        )));
    }
    if let Some(gt) = ground_truth {
        if gt.width() != system.width() || gt.height() != system.height() || gt.bands() != system.bands() {
            return Err(Error::Shape("ground truth does not match system".into()));
        }
    }

    if method == Method::GapTvOnly {
        return reconstruct_gap_tv(system, y, params, ground_truth);
    }

    let dict = dict.ok_or_else(|| {
        Error::Parameter(format!("method {method} requires a convolution dictionary"))
    })?;
    let spec = dict_fft(dict, system.width(), system.height())?;
    let projector = Projector::new(system, params.gram_epsilon);
    let mut estimate = initial_estimate(system, y, params.gram_epsilon)?;
    let mut trace = RunTrace::default();
    for t in 0..params.outer_iters {
        let start = Instant::now();
        let fidelity_before = measurement_residual(system, &estimate, y)?;
        let v = projector.project(&estimate, y)?;
        let fidelity_projected = projector.safe_residual(&v, y)?;
        let prior = match method {
            Method::CscWithTv => tv_chambolle_cube(&v, params.beta, params.tv_iters)?,
            _ => v,
        };
        let (next, csc_trace) = csc_denoise_with(&prior, &spec, params)?;
        estimate = next;
        let (p, s) = quality(ground_truth, &estimate)?;
        trace.records.push(RunRecord {
            iteration: t + 1,
            fidelity_before,
            fidelity_projected,
            fidelity: measurement_residual(system, &estimate, y)?,
            psnr: p,
            ssim: s,
            inner_residuals: csc_trace.primal_residuals,
            seconds: start.elapsed().as_secs_f64(),
        });
    }
    Ok((estimate, trace))
}

fn reconstruct_gap_tv(
    system: &SystemMasks,
    y: &Image2D,
    params: &SolverParams,
    ground_truth: Option<&SpectralCube>,
) -> Result<(SpectralCube, RunTrace)> {
    let start = Instant::now();
    let init = initial_estimate(system, y, params.gram_epsilon)?;
    let before = measurement_residual(system, &init, y)?;
    let (estimate, gap_trace) = gap_tv_solve(system, y, params, Some(&init), ground_truth)?;
    let elapsed = start.elapsed().as_secs_f64() / params.outer_iters as f64;
    let mut records = Vec::with_capacity(gap_trace.len());
    let mut fidelity_before = before;
    for (i, r) in gap_trace.records.iter().enumerate() {
        // the solver only exposes the final cube, so SSIM is reported once
        let s = if i + 1 == gap_trace.len() {
            quality(ground_truth, &estimate)?.1
        } else {
            None
        };
        records.push(RunRecord {
            iteration: r.iteration,
            fidelity_before,
            fidelity_projected: r.projected_fidelity,
            fidelity: r.fidelity,
            psnr: r.psnr,
            ssim: s,
            inner_residuals: Vec::new(),
            seconds: elapsed,
        });
        fidelity_before = r.fidelity;
    }
    Ok((estimate, RunTrace { records }))
}

/// How a comparison scene is measured.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Acquisition {
    pub mask_seed: u64,
    pub density: f64,
    pub shear_step: i64,
    pub noise_sigma: f64,
    pub noise_seed: u64,
}

impl Default for Acquisition {
    fn default() -> Self {
        Self {
            mask_seed: 1,
            density: 0.5,
            shear_step: 1,
            noise_sigma: 0.0,
            noise_seed: 2,
        }
    }
}

impl Acquisition {
    /// Builds the system for `truth` and simulates its measurement.
    pub fn simulate(&self, truth: &SpectralCube) -> Result<(SystemMasks, Measurement)> {
        let mask = generate_mask(truth.width(), truth.height(), self.mask_seed, self.density)?;
        let system = build_system(&mask, truth.bands(), self.shear_step)?;
        let y = forward(&system, truth)?;
        let y = add_noise(&y, self.noise_sigma, self.noise_seed)?;
        Ok((system, y))
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub name: String,
    pub truth: SpectralCube,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompareRow {
    pub scene: String,
    pub method: Method,
    pub psnr_db: f64,
    pub ssim: f64,
    pub sam_rad: f64,
    /// Wall time, when requested.
    pub seconds: Option<f64>,
}

/// Outcome of one (scene, method) run.
#[derive(Clone, Debug)]
pub struct CompareRun {
    pub row: CompareRow,
    pub estimate: SpectralCube,
    pub trace: RunTrace,
}

/// Runs every method on every scene and scores the reconstructions.
///
/// SAM is averaged over the whole image. With `timing` false the seconds
/// cell is left empty so repeated runs produce identical tables.
pub fn compare_methods(
    scenes: &[Scene],
    methods: &[Method],
    acquisition: &Acquisition,
    dict: Option<&ConvDictionary>,
    params: &SolverParams,
    timing: bool,
) -> Result<Vec<CompareRun>> {
    let mut runs = Vec::with_capacity(scenes.len() * methods.len());
    for scene in scenes {
        let (system, y) = acquisition.simulate(&scene.truth)?;
        for &method in methods {
            let start = Instant::now();
            let (estimate, trace) = reconstruct(&system, &y, dict, params, method, None)?;
            let seconds = start.elapsed().as_secs_f64();
            let truth = &scene.truth;
            let row = CompareRow {
                scene: scene.name.clone(),
                method,
                psnr_db: psnr(truth, &estimate, 1.0)?,
                ssim: ssim_cube(truth, &estimate)?,
                sam_rad: sam_region(truth, &estimate, &Region::full(truth.width(), truth.height()))?,
                seconds: timing.then_some(seconds),
            };
            runs.push(CompareRun { row, estimate, trace });
        }
    }
    Ok(runs)
}

pub const COMPARE_HEADER: &str = "scene,method,psnr_db,ssim,sam_rad,seconds";

pub fn write_compare_csv<'a, W: Write>(
    mut out: W,
    rows: impl IntoIterator<Item = &'a CompareRow>,
) -> std::io::Result<()> {
    writeln!(out, "{COMPARE_HEADER}")?;
    for r in rows {
        let seconds = r.seconds.map(|s| format!("{s:.3}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{}",
            r.scene, r.method, r.psnr_db, r.ssim, r.sam_rad, seconds
        )?;
    }
    Ok(())
}
