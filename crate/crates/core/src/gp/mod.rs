//! Gaussian-process surrogate with an RBF kernel and a pluggable prior mean.
//!
//! ```text
//! k(x, x')   = σ² exp(-‖x - x'‖² / 2ℓ²)
//! mean(x*)   = m(x*) + k*ᵀ (K + σn² I)⁻¹ (y - m)
//! var(x*)    = k(x*, x*) - k*ᵀ (K + σn² I)⁻¹ k*
//! ```

pub mod prior;

use std::fmt;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

pub use prior::{causal_prior_mean, fit_scm, FittedScm, PriorConfig};

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub signal_variance: f64,
    pub lengthscale: f64,
    pub noise_variance: f64,
}

impl Default for Kernel {
    fn default() -> Self {
        Kernel {
            signal_variance: 1.0,
            lengthscale: 1.0,
            noise_variance: 1e-2,
        }
    }
}

impl Kernel {
    pub fn new(signal_variance: f64, lengthscale: f64, noise_variance: f64) -> Result<Kernel> {
        if !(signal_variance > 0.0 && lengthscale > 0.0 && noise_variance >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "kernel needs σ² > 0, ℓ > 0, σn² ≥ 0; got ({signal_variance}, {lengthscale}, {noise_variance})"
            )));
        }
        Ok(Kernel {
            signal_variance,
            lengthscale,
            noise_variance,
        })
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        Ok(self.k(x, y))
    }

    /// Unchecked kernel evaluation; callers guarantee equal lengths.
    #[inline]
    pub fn k(&self, x: &[f64], y: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        self.signal_variance * (-d2 / (2.0 * self.lengthscale * self.lengthscale)).exp()
    }
}

type MeanFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Prior mean `m(x) = f(x) + offset`.
#[derive(Clone, Default)]
pub struct PriorMean {
    func: Option<Arc<MeanFn>>,
    pub offset: f64,
}

impl fmt::Debug for PriorMean {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorMean")
            .field("func", &self.func.as_ref().map(|_| "<fn>"))
            .field("offset", &self.offset)
            .finish()
    }
}

impl PriorMean {
    pub fn zero() -> Self {
        PriorMean::default()
    }

    pub fn constant(c: f64) -> Self {
        PriorMean {
            func: None,
            offset: c,
        }
    }

    pub fn from_fn(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        PriorMean {
            func: Some(Arc::new(f)),
            offset: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.func.as_ref().map_or(0.0, |f| f(x)) + self.offset
    }

    /// Same function with the offset set to the mean residual of `(xs, ys)`.
    pub fn recentered(&self, xs: &[Vec<f64>], ys: &[f64]) -> PriorMean {
        let mut out = self.clone();
        if ys.is_empty() {
            return out;
        }
        let base = |x: &[f64]| self.func.as_ref().map_or(0.0, |f| f(x));
        out.offset = xs.iter().zip(ys).map(|(x, y)| y - base(x)).sum::<f64>() / ys.len() as f64;
        out
    }
}

/// Exact GP posterior over fixed-dimension inputs.
///
/// Values are immutable: adding data returns a new process.
#[derive(Debug, Clone)]
pub struct GaussianProcess {
    kernel: Kernel,
    prior: PriorMean,
    dim: usize,
    xs: Vec<Vec<f64>>,
    ys: Vec<f64>,
    prior_at_train: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    alpha: DVector<f64>,
    jitter: f64,
}

impl GaussianProcess {
    pub fn new(dim: usize, kernel: Kernel, prior: PriorMean) -> Self {
        GaussianProcess {
            kernel,
            prior,
            dim,
            xs: Vec::new(),
            ys: Vec::new(),
            prior_at_train: Vec::new(),
            chol: None,
            alpha: DVector::zeros(0),
            jitter: 0.0,
        }
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn prior(&self) -> &PriorMean {
        &self.prior
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.xs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.xs
    }

    pub fn targets(&self) -> &[f64] {
        &self.ys
    }

    /// Jitter that was added to the diagonal by the last factorisation.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn with_data(&self, xs: Vec<Vec<f64>>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                expected: xs.len(),
                got: ys.len(),
            });
        }
        for x in &xs {
            self.check_dim(x)?;
        }
        let mut gp = self.clone();
        gp.prior_at_train = xs.iter().map(|x| gp.prior.eval(x)).collect();
        gp.xs = xs;
        gp.ys = ys;
        gp.refactor()?;
        Ok(gp)
    }

    pub fn with_point(&self, x: Vec<f64>, y: f64) -> Result<Self> {
        self.check_dim(&x)?;
        let mut gp = self.clone();
        gp.prior_at_train.push(gp.prior.eval(&x));
        gp.xs.push(x);
        gp.ys.push(y);
        gp.refactor()?;
        Ok(gp)
    }

    pub fn with_kernel(&self, kernel: Kernel) -> Result<Self> {
        let mut gp = self.clone();
        gp.kernel = kernel;
        gp.refactor()?;
        Ok(gp)
    }

    pub fn with_prior(&self, prior: PriorMean) -> Result<Self> {
        let mut gp = self.clone();
        gp.prior_at_train = gp.xs.iter().map(|x| prior.eval(x)).collect();
        gp.prior = prior;
        gp.refactor()?;
        Ok(gp)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn refactor(&mut self) -> Result<()> {
        let n = self.xs.len();
        if n == 0 {
            self.chol = None;
            self.alpha = DVector::zeros(0);
            self.jitter = 0.0;
            return Ok(());
        }
        let (chol, jitter) = factor(&self.kernel, &self.xs)?;
        let resid = DVector::from_iterator(
            n,
            self.ys.iter().zip(&self.prior_at_train).map(|(y, m)| y - m),
        );
        self.alpha = chol.solve(&resid);
        self.chol = Some(chol);
        self.jitter = jitter;
        Ok(())
    }

    pub fn prior_mean(&self, x: &[f64]) -> f64 {
        self.prior.eval(x)
    }

    /// Kernel column between `x` and every training input.
    pub fn k_star(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.xs.len(), self.xs.iter().map(|xi| self.kernel.k(xi, x)))
    }

    /// `(K + σn² I)⁻¹ v`.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(v),
            None => DVector::zeros(0),
        }
    }

    /// `(K + σn² I)⁻¹ (y - m)`.
    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn posterior(&self, x: &[f64]) -> Result<(f64, f64)> {
        self.check_dim(x)?;
        let prior = self.prior.eval(x);
        let kxx = self.kernel.signal_variance;
        let Some(chol) = &self.chol else {
            return Ok((prior, kxx));
        };
        let ks = self.k_star(x);
        let mean = prior + ks.dot(&self.alpha);
        let v = chol
            .l()
            .solve_lower_triangular(&ks)
            .expect("L is non-singular");
        let var = (kxx - v.norm_squared()).max(0.0);
        Ok((mean, var))
    }

    /// Posterior covariance between two query points.
    pub fn posterior_cov(&self, a: &[f64], b: &[f64]) -> Result<f64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let kab = self.kernel.k(a, b);
        if self.chol.is_none() {
            return Ok(kab);
        }
        let w = self.solve(&self.k_star(b));
        Ok(kab - self.k_star(a).dot(&w))
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        let Some(chol) = &self.chol else {
            return 0.0;
        };
        let n = self.xs.len() as f64;
        let resid = DVector::from_iterator(
            self.xs.len(),
            self.ys.iter().zip(&self.prior_at_train).map(|(y, m)| y - m),
        );
        let log_det: f64 = chol.l().diagonal().iter().map(|d| d.ln()).sum();
        -0.5 * resid.dot(&self.alpha) - log_det - 0.5 * n * (2.0 * std::f64::consts::PI).ln()
    }
}

/// Cholesky of `K + σn² I`, escalating diagonal jitter on failure.
fn factor(kernel: &Kernel, xs: &[Vec<f64>]) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let n = xs.len();
    let mut k = DMatrix::from_fn(n, n, |i, j| kernel.k(&xs[i], &xs[j]));
    for i in 0..n {
        k[(i, i)] += kernel.noise_variance;
    }
    if let Some(c) = Cholesky::new(k.clone()) {
        return Ok((c, 0.0));
    }
    let mut jitter = JITTER_START;
    while jitter <= JITTER_MAX * (1.0 + 1e-9) {
        let mut kj = k.clone();
        for i in 0..n {
            kj[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(kj) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::SingularMatrix { jitter: JITTER_MAX })
}

/// Bounds and seed for the marginal-likelihood search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSearch {
    pub seed: u64,
    /// Domain diameter used to scale lengthscale bounds; defaults to the
    /// diameter of the training inputs' bounding box.
    pub diameter: Option<f64>,
}

impl Default for HyperSearch {
    fn default() -> Self {
        HyperSearch {
            seed: 0,
            diameter: None,
        }
    }
}

/// Search box in log10 units: (log σ²/s², log ℓ/D, log σn²/s²).
const LOG_BOUNDS: [(f64, f64); 3] = [(-2.0, 2.0), (-2.0, 1.0), (-6.0, 0.0)];
const GRID_SIZES: [usize; 3] = [5, 7, 4];
const ASCENT_STEPS: [f64; 2] = [0.25, 0.0625];
/// Minimum log-likelihood gain for a move; keeps refits of a fitted kernel
/// from drifting on round-off.
const IMPROVE_TOL: f64 = 1e-9;

/// Maximise the log marginal likelihood over (σ², ℓ, σn²).
///
/// Bounds are relative to the residual variance `s²` about the prior mean and
/// the domain diameter `D`. The search evaluates a log-spaced grid, the
/// incoming kernel and one seeded random start, then runs coordinate ascent
/// from the best until no step improves. The result never has lower
/// likelihood than the incoming kernel, and re-fitting a fitted kernel
/// returns it unchanged.
pub fn fit_hyperparameters(gp: &GaussianProcess, search: &HyperSearch) -> Result<Kernel> {
    let n = gp.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "hyperparameter fitting needs at least 2 points, got {n}"
        )));
    }
    let resid: Vec<f64> = gp
        .ys
        .iter()
        .zip(&gp.prior_at_train)
        .map(|(y, m)| y - m)
        .collect();
    let mean = resid.iter().sum::<f64>() / n as f64;
    let s2 = (resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n as f64).max(1e-8);
    let diameter = search
        .diameter
        .unwrap_or_else(|| bbox_diameter(&gp.xs))
        .max(1e-6);

    let to_kernel = |p: [f64; 3]| Kernel {
        signal_variance: s2 * 10f64.powf(p[0]),
        lengthscale: diameter * 10f64.powf(p[1]),
        noise_variance: s2 * 10f64.powf(p[2]),
    };
    let from_kernel = |k: &Kernel| {
        [
            (k.signal_variance / s2).log10(),
            (k.lengthscale / diameter).log10(),
            (k.noise_variance.max(f64::MIN_POSITIVE) / s2).log10(),
        ]
    };
    let score = |k: Kernel| -> f64 {
        match gp.with_kernel(k) {
            Ok(g) => {
                let v = g.log_marginal_likelihood();
                if v.is_finite() {
                    v
                } else {
                    f64::NEG_INFINITY
                }
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };

    // The incoming kernel goes first so ties keep it.
    let incoming = gp.kernel;
    let mut best_k = incoming;
    let mut best_p = from_kernel(&incoming);
    let mut best = score(incoming);
    let consider = |p: [f64; 3], best: &mut f64, best_p: &mut [f64; 3], best_k: &mut Kernel| {
        let k = to_kernel(p);
        let s = score(k);
        if s > *best + IMPROVE_TOL {
            *best = s;
            *best_p = p;
            *best_k = k;
        }
    };
    let axis = |d: usize, i: usize| {
        let (lo, hi) = LOG_BOUNDS[d];
        lo + (hi - lo) * i as f64 / (GRID_SIZES[d] - 1) as f64
    };
    for i in 0..GRID_SIZES[0] {
        for j in 0..GRID_SIZES[1] {
            for l in 0..GRID_SIZES[2] {
                consider(
                    [axis(0, i), axis(1, j), axis(2, l)],
                    &mut best,
                    &mut best_p,
                    &mut best_k,
                );
            }
        }
    }
    let mut rng = RngState::derive(search.seed, &[0x4750]);
    let random: [f64; 3] =
        std::array::from_fn(|d| rng.random_range(LOG_BOUNDS[d].0..=LOG_BOUNDS[d].1));
    consider(random, &mut best, &mut best_p, &mut best_k);

    loop {
        let mut moved = false;
        for step in ASCENT_STEPS {
            loop {
                let mut improved = false;
                for d in 0..3 {
                    for dir in [1.0, -1.0] {
                        let mut p = best_p;
                        let (lo, hi) = LOG_BOUNDS[d];
                        p[d] = (p[d] + dir * step).clamp(lo, hi);
                        if p[d] == best_p[d] {
                            continue;
                        }
                        let k = to_kernel(p);
                        let s = score(k);
                        if s > best + IMPROVE_TOL {
                            best = s;
                            best_p = p;
                            best_k = k;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    Ok(best_k)
}

fn bbox_diameter(xs: &[Vec<f64>]) -> f64 {
    let Some(first) = xs.first() else {
        return 1.0;
    };
    let mut d2 = 0.0;
    for j in 0..first.len() {
        let (lo, hi) = xs
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
                (lo.min(x[j]), hi.max(x[j]))
            });
        d2 += (hi - lo).powi(2);
    }
    if d2 > 0.0 {
        d2.sqrt()
    } else {
        1.0
    }
}
