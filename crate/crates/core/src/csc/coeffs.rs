use crate::error::{Error, Result};

/// Coefficient maps `x[l][m]`, one full-size plane per (band, kernel) pair.
///
/// Planes are stored band-major, then kernel-major:
/// `maps[((l * num_kernels) + m) * width * height + p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoeffStack {
    bands: usize,
    num_kernels: usize,
    width: usize,
    height: usize,
    maps: Vec<f64>,
}

impl CoeffStack {
    pub fn zeros(bands: usize, num_kernels: usize, width: usize, height: usize) -> Self {
        Self {
            bands,
            num_kernels,
            width,
            height,
            maps: vec![0.0; bands * num_kernels * width * height],
        }
    }

    pub fn from_vec(
        bands: usize,
        num_kernels: usize,
        width: usize,
        height: usize,
        maps: Vec<f64>,
    ) -> Result<Self> {
        if maps.len() != bands * num_kernels * width * height {
            return Err(Error::Shape(format!(
                "coefficient stack {bands}x{num_kernels} of {width}x{height} needs {} values, got {}",
                bands * num_kernels * width * height,
                maps.len()
            )));
        }
        if maps.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("coefficient stack has non-finite values".into()));
        }
        Ok(Self {
            bands,
            num_kernels,
            width,
            height,
            maps,
        })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn num_kernels(&self) -> usize {
        self.num_kernels
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.maps
    }

    fn band_len(&self) -> usize {
        self.num_kernels * self.width * self.height
    }

    /// All kernel planes of band `l`, kernel-major.
    pub fn band(&self, l: usize) -> &[f64] {
        let n = self.band_len();
        &self.maps[l * n..(l + 1) * n]
    }

    pub fn band_mut(&mut self, l: usize) -> &mut [f64] {
        let n = self.band_len();
        &mut self.maps[l * n..(l + 1) * n]
    }

    pub(crate) fn bands_mut(&mut self) -> std::slice::ChunksExactMut<'_, f64> {
        let n = self.band_len();
        self.maps.chunks_exact_mut(n)
    }

    pub fn plane(&self, l: usize, m: usize) -> &[f64] {
        let n = self.width * self.height;
        let start = (l * self.num_kernels + m) * n;
        &self.maps[start..start + n]
    }

    pub fn same_dims(&self, other: &CoeffStack) -> bool {
        self.bands == other.bands
            && self.num_kernels == other.num_kernels
            && self.width == other.width
            && self.height == other.height
    }

    fn check(&self, other: &CoeffStack) -> Result<()> {
        if !self.same_dims(other) {
            return Err(Error::Shape(format!(
                "coefficient stacks differ: {}x{}x{}x{} vs {}x{}x{}x{}",
                self.bands,
                self.num_kernels,
                self.width,
                self.height,
                other.bands,
                other.num_kernels,
                other.width,
                other.height
            )));
        }
        Ok(())
    }

    pub fn norm(&self) -> f64 {
        self.maps.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `||self - other||_2`.
    pub fn distance(&self, other: &CoeffStack) -> Result<f64> {
        self.check(other)?;
        Ok(self
            .maps
            .iter()
            .zip(&other.maps)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    pub fn add(&self, other: &CoeffStack) -> Result<CoeffStack> {
        self.check(other)?;
        Ok(CoeffStack {
            maps: self.maps.iter().zip(&other.maps).map(|(a, b)| a + b).collect(),
            ..self.clone()
        })
    }

    /// Length of a coefficient fiber: one value per band.
    pub fn fiber(&self, m: usize, p: usize) -> Vec<f64> {
        (0..self.bands).map(|l| self.plane(l, m)[p]).collect()
    }
}

/// Group soft-thresholding of `stack` with fibers across bands.
///
/// For each kernel `m` and pixel `p` the fiber `g = (v[0][m][p], ...,
/// v[L-1][m][p])` is scaled by `max(0, 1 - kappa / ||g||)`. This is the
/// proximal operator of `kappa * sum ||g||_2`.
pub fn group_shrink(stack: &CoeffStack, kappa: f64) -> Result<CoeffStack> {
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(Error::Parameter(format!("kappa must be >= 0, got {kappa}")));
    }
    let mut out = stack.clone();
    if kappa == 0.0 {
        return Ok(out);
    }
    let stride = stack.band_len();
    for i in 0..stride {
        let norm = (0..stack.bands)
            .map(|l| stack.maps[l * stride + i].powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = if norm <= kappa { 0.0 } else { 1.0 - kappa / norm };
        for l in 0..stack.bands {
            out.maps[l * stride + i] *= scale;
        }
    }
    Ok(out)
}

/// Iterates of the coefficient ADMM: primal `x`, split variable `delta` and
/// scaled dual `u`, plus the primal residual `||x - delta||` logged at each
/// dual update.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmmState {
    pub x: CoeffStack,
    pub delta: CoeffStack,
    pub u: CoeffStack,
    pub primal_residuals: Vec<f64>,
}

impl AdmmState {
    pub fn zeros(bands: usize, num_kernels: usize, width: usize, height: usize) -> Self {
        let z = CoeffStack::zeros(bands, num_kernels, width, height);
        Self {
            x: z.clone(),
            delta: z.clone(),
            u: z,
            primal_residuals: Vec::new(),
        }
    }
}

/// `u <- u + x - delta`, recording `||x - delta||`.
pub fn dual_update(mut state: AdmmState) -> Result<AdmmState> {
    state.x.check(&state.delta)?;
    state.x.check(&state.u)?;
    let mut residual = 0.0;
    for ((u, x), d) in state.u.maps.iter_mut().zip(&state.x.maps).zip(&state.delta.maps) {
        let r = x - d;
        residual += r * r;
        *u += r;
    }
    state.primal_residuals.push(residual.sqrt());
    Ok(state)
}

/// `group_shrink` of `x + u` into `delta` followed by [`dual_update`], in one
/// pass without temporaries.
pub(crate) fn shrink_and_dual(state: &mut AdmmState, kappa: f64) {
    const CHUNK: usize = 1024;
    let stride = state.x.band_len();
    let bands = state.x.bands;
    let (x, delta, u) = (&state.x.maps, &mut state.delta.maps, &mut state.u.maps);
    let mut residual = 0.0;
    let mut scale = [0.0f64; CHUNK];
    // fibers are strided by a whole band, so work on runs of them at a time
    for start in (0..stride).step_by(CHUNK) {
        let len = CHUNK.min(stride - start);
        let scale = &mut scale[..len];
        scale.fill(0.0);
        for l in 0..bands {
            let j = l * stride + start;
            for ((s, a), b) in scale.iter_mut().zip(&x[j..j + len]).zip(&u[j..j + len]) {
                let v = a + b;
                *s += v * v;
            }
        }
        for s in scale.iter_mut() {
            let norm = s.sqrt();
            *s = if kappa == 0.0 {
                1.0
            } else if norm <= kappa {
                0.0
            } else {
                1.0 - kappa / norm
            };
        }
        for l in 0..bands {
            let j = l * stride + start;
            for k in 0..len {
                let v = x[j + k] + u[j + k];
                let d = scale[k] * v;
                delta[j + k] = d;
                let r = x[j + k] - d;
                residual += r * r;
                u[j + k] = v - d;
            }
        }
    }
    state.primal_residuals.push(residual.sqrt());
}
