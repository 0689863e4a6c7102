use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Multivariate normal with a cached lower Cholesky factor.
#[derive(Clone, Debug)]
pub struct GaussianDensity<T> {
    mean: Vec<T>,
    covariance: Matrix<T>,
    chol: Matrix<T>,
    log_norm: T,
}

impl<T: Scalar> GaussianDensity<T> {
    /// Symmetrizes `covariance`; if the Cholesky factorization fails, retries
    /// once with `1e-9·trace/d` added to the diagonal.
    pub fn new(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        let d = mean.len();
        if !covariance.is_square() || covariance.rows() != d {
            return Err(Error::dims(
                "GaussianDensity",
                format!("mean of dim {d} with {}x{} covariance", covariance.rows(), covariance.cols()),
            ));
        }
        let covariance = covariance.symmetrized();
        let chol = match covariance.cholesky() {
            Ok(l) => l,
            Err(_) => {
                let jitter = T::lit(1e-9 * covariance.trace().value().abs() / d as f64);
                let mut c = covariance.clone();
                for i in 0..d {
                    c[(i, i)] = c[(i, i)] + jitter;
                }
                c.cholesky()?
            }
        };
        let log_det_half: T = (0..d).map(|i| chol[(i, i)].ln()).sum();
        let log_norm = -log_det_half - T::lit(0.5 * d as f64 * LN_2PI);
        Ok(GaussianDensity { mean, covariance, chol, log_norm })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn cholesky_factor(&self) -> &Matrix<T> {
        &self.chol
    }

    /// Same covariance, new mean.
    pub fn recentered(&self, mean: Vec<T>) -> Self {
        GaussianDensity { mean, ..self.clone() }
    }

    pub fn log_density(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim() {
            return Err(Error::dims("log_density", format!("{} vs {}", x.len(), self.dim())));
        }
        let r: Vec<T> = x.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.log_density_of_residual(&r))
    }

    /// Log-density of `mean + r`.
    pub fn log_density_of_residual(&self, r: &[T]) -> T {
        let w = self.chol.forward_substitute(r);
        self.log_norm - T::lit(0.5) * w.iter().map(|&v| v * v).sum::<T>()
    }
}

impl GaussianDensity<f64> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let xi: Vec<f64> = (0..self.dim()).map(|_| StandardNormal.sample(rng)).collect();
        let lx = self.chol.mul_vec(&xi).expect("square factor");
        lx.iter().zip(&self.mean).map(|(a, m)| a + m).collect()
    }
}
