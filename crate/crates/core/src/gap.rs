//! Generalized alternating projection with a total-variation prior.
//!
//! Each round projects the current estimate onto the set of cubes consistent
//! with the measurement, `v = I + H^T (H H^T)^{-1} (y - H I)`, and then
//! denoises every band of `v` with [`tv_chambolle`](crate::tv::tv_chambolle).

use std::io::Write;

use crate::cube::{Image2D, SpectralCube};
use crate::error::{Error, Result};
use crate::forward::{adjoint, forward, gram_diagonal, SystemMasks};
use crate::metrics::psnr;
use crate::params::SolverParams;
use crate::tv::{total_variation_cube, tv_chambolle_cube};

/// One row of a [`GapTrace`].
#[derive(Clone, Debug, PartialEq)]
pub struct GapRecord {
    pub iteration: usize,
    /// `||y - H I||_2` after the TV step.
    pub fidelity: f64,
    /// `||y - H v||_2` right after the projection, restricted to pixels with
    /// usable Gram entries.
    pub projected_fidelity: f64,
    /// Summed per-band total variation of the estimate.
    pub tv: f64,
    pub psnr: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct GapTrace {
    pub records: Vec<GapRecord>,
}

impl GapTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes `iteration,fidelity,tv,psnr`; the psnr cell is empty when no
    /// ground truth was supplied.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,fidelity,tv,psnr")?;
        for r in &self.records {
            let psnr = r.psnr.map(|v| format!("{v:.6}")).unwrap_or_default();
            writeln!(out, "{},{:.9e},{:.9e},{}", r.iteration, r.fidelity, r.tv, psnr)?;
        }
        Ok(())
    }
}

fn check_dims(system: &SystemMasks, cube: &SpectralCube, y: &Image2D) -> Result<()> {
    if cube.width() != system.width()
        || cube.height() != system.height()
        || cube.bands() != system.bands()
    {
        return Err(Error::Shape(format!(
            "estimate {}x{}x{} does not match system {}x{}x{}",
            cube.width(),
            cube.height(),
            cube.bands(),
            system.width(),
            system.height(),
            system.bands()
        )));
    }
    if y.width() != system.width() || y.height() != system.height() {
        return Err(Error::Shape(format!(
            "measurement {}x{} does not match system {}x{}",
            y.width(),
            y.height(),
            system.width(),
            system.height()
        )));
    }
    Ok(())
}

/// Per-pixel weight `1 / gram` where `gram >= eps`, else 0.
fn inverse_gram(gram: &Image2D, eps: f64) -> Vec<f64> {
    gram.data()
        .iter()
        .map(|&g| if g >= eps { 1.0 / g } else { 0.0 })
        .collect()
}

/// Euclidean norm of `y - H cube` over all pixels.
pub fn measurement_residual(system: &SystemMasks, cube: &SpectralCube, y: &Image2D) -> Result<f64> {
    let hy = forward(system, cube)?;
    Ok(hy
        .data()
        .iter()
        .zip(y.data())
        .map(|(a, b)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt())
}

fn projection_with(
    system: &SystemMasks,
    estimate: &SpectralCube,
    y: &Image2D,
    inv_gram: &[f64],
) -> Result<SpectralCube> {
    let hy = forward(system, estimate)?;
    let weighted: Vec<f64> = y
        .data()
        .iter()
        .zip(hy.data())
        .zip(inv_gram)
        .map(|((yv, hv), g)| (yv - hv) * g)
        .collect();
    let correction = adjoint(system, &Image2D::from_raw(y.width(), y.height(), weighted))?;
    let data = estimate
        .data()
        .iter()
        .zip(correction.data())
        .map(|(a, b)| a + b)
        .collect();
    Ok(SpectralCube::from_raw(
        estimate.width(),
        estimate.height(),
        estimate.bands(),
        data,
    ))
}

/// Projects `estimate` onto `{I : H I = y}` at every pixel whose Gram entry is
/// at least `eps`; pixels below `eps` are left untouched.
pub fn gap_projection_step(
    system: &SystemMasks,
    estimate: &SpectralCube,
    y: &Image2D,
    eps: f64,
) -> Result<SpectralCube> {
    if !(eps > 0.0) {
        return Err(Error::Parameter(format!("gram epsilon must be > 0, got {eps}")));
    }
    check_dims(system, estimate, y)?;
    let inv = inverse_gram(&gram_diagonal(system), eps);
    projection_with(system, estimate, y, &inv)
}

/// Starting point `H^T y / max(gram, eps)`.
pub fn initial_estimate(system: &SystemMasks, y: &Image2D, eps: f64) -> Result<SpectralCube> {
    let gram = gram_diagonal(system);
    let scaled: Vec<f64> = y
        .data()
        .iter()
        .zip(gram.data())
        .map(|(v, g)| v / g.max(eps))
        .collect();
    adjoint(system, &Image2D::from_raw(y.width(), y.height(), scaled))
}

/// Reusable projection operator for a fixed system.
pub(crate) struct Projector<'a> {
    system: &'a SystemMasks,
    inv_gram: Vec<f64>,
    safe: Vec<bool>,
}

impl<'a> Projector<'a> {
    pub(crate) fn new(system: &'a SystemMasks, eps: f64) -> Self {
        let gram = gram_diagonal(system);
        Self {
            system,
            inv_gram: inverse_gram(&gram, eps),
            safe: gram.data().iter().map(|&g| g >= eps).collect(),
        }
    }

    pub(crate) fn project(&self, estimate: &SpectralCube, y: &Image2D) -> Result<SpectralCube> {
        projection_with(self.system, estimate, y, &self.inv_gram)
    }

    /// Residual norm restricted to pixels the projection can correct.
    pub(crate) fn safe_residual(&self, estimate: &SpectralCube, y: &Image2D) -> Result<f64> {
        let hy = forward(self.system, estimate)?;
        Ok(hy
            .data()
            .iter()
            .zip(y.data())
            .zip(&self.safe)
            .filter(|(_, &s)| s)
            .map(|((a, b), _)| (b - a) * (b - a))
            .sum::<f64>()
            .sqrt())
    }
}

/// Runs `params.outer_iters` rounds of projection followed by per-band TV.
///
/// Without `init` the solver starts from [`initial_estimate`].
pub fn gap_tv_solve(
    system: &SystemMasks,
    y: &Image2D,
    params: &SolverParams,
    init: Option<&SpectralCube>,
    ground_truth: Option<&SpectralCube>,
) -> Result<(SpectralCube, GapTrace)> {
    params.validate()?;
    let mut estimate = match init {
        Some(c) => c.clone(),
        None => initial_estimate(system, y, params.gram_epsilon)?,
    };
    check_dims(system, &estimate, y)?;
    if let Some(gt) = ground_truth {
        if !gt.same_dims(&estimate) {
            return Err(Error::Shape("ground truth does not match estimate".into()));
        }
    }
    let projector = Projector::new(system, params.gram_epsilon);
    let mut trace = GapTrace::default();
    for t in 0..params.outer_iters {
        let v = projector.project(&estimate, y)?;
        let projected_fidelity = projector.safe_residual(&v, y)?;
        estimate = tv_chambolle_cube(&v, params.beta, params.tv_iters)?;
        trace.records.push(GapRecord {
            iteration: t + 1,
            fidelity: measurement_residual(system, &estimate, y)?,
            projected_fidelity,
            tv: total_variation_cube(&estimate),
            psnr: ground_truth.map(|gt| psnr(gt, &estimate, 1.0)).transpose()?,
        });
    }
    Ok((estimate, trace))
}
