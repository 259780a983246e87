//! Kriging with a zero prior mean.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{covariance_matrix, Covariance};
use crate::linalg::{jittered_cholesky, CholeskyFactor, PivotedCholesky};

/// Largest jitter tried, relative to the mean Gram diagonal.
pub const MAX_RELATIVE_JITTER: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet<P> {
    pub points: Vec<P>,
    pub values: Vec<f64>,
    /// Added to the Gram diagonal; zero means exact interpolation.
    pub jitter: f64,
}

impl<P> ObservationSet<P> {
    pub fn new(points: Vec<P>, values: Vec<f64>) -> Result<Self> {
        Self::with_jitter(points, values, 0.0)
    }

    pub fn with_jitter(points: Vec<P>, values: Vec<f64>, jitter: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSpec("observation set is empty".into()));
        }
        if points.len() != values.len() {
            return Err(Error::DimensionMismatch { expected: points.len(), got: values.len() });
        }
        if !(jitter >= 0.0 && jitter.is_finite()) {
            return Err(Error::InvalidSpec(format!("jitter must be nonnegative, got {jitter}")));
        }
        Ok(ObservationSet { points, values, jitter })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Posterior<P, K> {
    kernel: K,
    obs: ObservationSet<P>,
    factor: CholeskyFactor,
    alpha: DVector<f64>,
}

/// Factorizes `k(X, X) + jitter I` and caches `alpha = (k(X,X) + jitter I)^-1 y`.
///
/// A zero jitter is tried once; a positive jitter escalates tenfold up to
/// `1e-6 * trace / n` before reporting [`Error::SingularGram`].
pub fn fit_posterior<P, K>(kernel: K, obs: ObservationSet<P>) -> Result<Posterior<P, K>>
where
    P: Sync,
    K: Covariance<P> + Sync,
{
    let gram = covariance_matrix(&kernel, &obs.points);
    let n = gram.nrows();
    let scale = gram.trace() / n as f64;
    let ceiling = obs.jitter.max(MAX_RELATIVE_JITTER * scale);
    let factor = jittered_cholesky(&gram, obs.jitter, ceiling)?;
    let alpha = factor.solve(&DVector::from_column_slice(&obs.values));
    Ok(Posterior { kernel, obs, factor, alpha })
}

impl<P, K> Posterior<P, K>
where
    P: Sync,
    K: Covariance<P> + Sync,
{
    pub fn kernel(&self) -> &K {
        &self.kernel
    }

    pub fn observations(&self) -> &ObservationSet<P> {
        &self.obs
    }

    pub fn factor(&self) -> &CholeskyFactor {
        &self.factor
    }

    /// Cached `k(X,X)^-1 y`; the posterior mean is `Σ_i alpha_i k(·, x_i)`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.alpha
    }

    fn cross(&self, z: &P) -> DVector<f64> {
        DVector::from_iterator(self.obs.len(), self.obs.points.iter().map(|x| self.kernel.covariance(z, x)))
    }

    pub fn mean(&self, z: &P) -> f64 {
        self.obs.points.iter().zip(self.alpha.iter()).map(|(x, a)| a * self.kernel.covariance(z, x)).sum()
    }

    pub fn cov(&self, z: &P, zp: &P) -> f64 {
        let a = self.factor.forward(&self.cross(z));
        let b = self.factor.forward(&self.cross(zp));
        self.kernel.covariance(z, zp) - a.dot(&b)
    }

    pub fn variance(&self, z: &P) -> f64 {
        let a = self.factor.forward(&self.cross(z));
        self.kernel.covariance(z, z) - a.dot(&a)
    }

    pub fn std(&self, z: &P) -> f64 {
        self.variance(z).max(0.0).sqrt()
    }

    /// Mean and standard deviation over many points.
    pub fn predict(&self, points: &[P]) -> Vec<(f64, f64)> {
        points.par_iter().map(|z| (self.mean(z), self.std(z))).collect()
    }
}

pub fn posterior_mean<P: Sync, K: Covariance<P> + Sync>(post: &Posterior<P, K>, z: &P) -> f64 {
    post.mean(z)
}

pub fn posterior_cov<P: Sync, K: Covariance<P> + Sync>(post: &Posterior<P, K>, z: &P, zp: &P) -> f64 {
    post.cov(z, zp)
}

pub fn posterior_std<P: Sync, K: Covariance<P> + Sync>(post: &Posterior<P, K>, z: &P) -> f64 {
    post.std(z)
}

/// Draws from `N(0, k(points, points))` with a pivoted factorization, so
/// semidefinite Gram matrices are fine.
#[derive(Debug, Clone)]
pub struct PriorSampler {
    factor: PivotedCholesky,
    n: usize,
}

impl PriorSampler {
    pub fn new<P: Sync, K: Covariance<P> + Sync + ?Sized>(kernel: &K, points: &[P]) -> Result<Self> {
        let gram = covariance_matrix(kernel, points);
        let n = points.len();
        let factor = PivotedCholesky::of_matrix(&gram, n).map_err(|e| match e {
            Error::CholeskyFailure { required_jitter } => Error::SingularGram { pivot: -required_jitter, jitter: 0.0 },
            other => other,
        })?;
        Ok(PriorSampler { factor, n })
    }

    pub fn rank(&self) -> usize {
        self.factor.rank()
    }

    pub fn draw(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let xi: Vec<f64> = (0..self.factor.rank()).map(|_| StandardNormal.sample(&mut rng)).collect();
        self.factor.combine(&xi, self.n)
    }
}

pub fn sample_prior<P: Sync, K: Covariance<P> + Sync + ?Sized>(
    kernel: &K,
    points: &[P],
    seed: u64,
) -> Result<Vec<f64>> {
    Ok(PriorSampler::new(kernel, points)?.draw(seed))
}
