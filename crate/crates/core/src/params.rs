use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Weights and iteration counts for the reconstruction solvers.
///
/// `kappa` is the group-shrinkage threshold applied in the coefficient
/// update; the sparsity weight and the ADMM penalty only enter that update
/// through their ratio, so they are not exposed separately.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    /// Total-variation weight.
    pub beta: f64,
    /// ADMM penalty.
    pub rho: f64,
    /// Group soft-threshold applied to coefficient fibers.
    pub kappa: f64,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub tv_iters: usize,
    /// Smoothness weight of the low-pass split ahead of sparse coding.
    pub lowpass_weight: f64,
    /// Pixels whose Gram diagonal falls below this get no projection update.
    pub gram_epsilon: f64,
    /// Standard deviation of simulated measurement noise.
    pub noise_sigma: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            beta: 0.1,
            rho: 1.0,
            kappa: 0.05,
            outer_iters: 30,
            inner_iters: 10,
            tv_iters: 20,
            lowpass_weight: 5.0,
            gram_epsilon: 1e-6,
            noise_sigma: 0.0,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("beta", self.beta),
            ("rho", self.rho),
            ("kappa", self.kappa),
            ("lowpass_weight", self.lowpass_weight),
            ("noise_sigma", self.noise_sigma),
        ];
        for (name, v) in weights {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::Parameter(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.rho > 0.0) {
            return Err(Error::Parameter(format!("rho must be > 0, got {}", self.rho)));
        }
        if !(self.gram_epsilon.is_finite() && self.gram_epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "gram_epsilon must be > 0, got {}",
                self.gram_epsilon
            )));
        }
        let counts = [
            ("outer_iters", self.outer_iters),
            ("inner_iters", self.inner_iters),
            ("tv_iters", self.tv_iters),
        ];
        for (name, n) in counts {
            if n == 0 {
                return Err(Error::Parameter(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}
