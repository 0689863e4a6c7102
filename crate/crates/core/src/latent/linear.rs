use super::gaussian::GaussianDensity;
use crate::diffcore::{Matrix, ParamLayout};
use crate::error::{Error, Result};
use crate::scalar::{softplus, softplus_inv, Scalar};

/// Default stability margin ε in `A = S − (LLᵀ + εI)`.
pub const DEFAULT_MARGIN: f64 = 0.01;

/// Latent `dz = A z dt + K dB` with `A` Hurwitz by construction.
///
/// `A = S − (LLᵀ + εI)` where `S` is skew-symmetric and `L` is lower
/// triangular with a softplus diagonal, so `A + Aᵀ = −2(LLᵀ + εI) ≺ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearSDE<T> {
    dim: usize,
    margin: f64,
    raw_skew: Vec<T>,
    raw_spd: Vec<T>,
    raw_diffusion: Vec<T>,
}

fn n_skew(d: usize) -> usize {
    d * (d - 1) / 2
}

fn n_tri(d: usize) -> usize {
    d * (d + 1) / 2
}

impl<T: Scalar> LinearSDE<T> {
    pub fn num_params_for(dim: usize) -> usize {
        n_skew(dim) + n_tri(dim) + dim * dim
    }

    pub fn from_raw(dim: usize, margin: f64, params: &[T]) -> Result<Self> {
        if dim == 0 || !(margin > 0.0) {
            return Err(Error::InvalidArgument("linear SDE needs dim >= 1 and margin > 0".into()));
        }
        if params.len() != Self::num_params_for(dim) {
            return Err(Error::dims("LinearSDE::from_raw", format!("{} params for dim {dim}", params.len())));
        }
        let (skew, rest) = params.split_at(n_skew(dim));
        let (spd, diff) = rest.split_at(n_tri(dim));
        Ok(LinearSDE { dim, margin, raw_skew: skew.to_vec(), raw_spd: spd.to_vec(), raw_diffusion: diff.to_vec() })
    }

    /// `A = −rate·I`, `K = diffusion·I`. Requires `rate > margin`.
    pub fn isotropic(dim: usize, rate: f64, diffusion: f64, margin: f64) -> Result<Self> {
        if !(rate > margin) {
            return Err(Error::InvalidArgument(format!("decay rate {rate} must exceed the stability margin {margin}")));
        }
        let l = softplus_inv((rate - margin).sqrt());
        let mut p = vec![0.0; Self::num_params_for(dim)];
        let mut idx = n_skew(dim);
        for i in 0..dim {
            for j in 0..=i {
                if i == j {
                    p[idx] = l;
                }
                idx += 1;
            }
        }
        let k0 = n_skew(dim) + n_tri(dim);
        for i in 0..dim {
            p[k0 + i * dim + i] = diffusion;
        }
        Self::from_raw(dim, margin, &p.into_iter().map(T::lit).collect::<Vec<_>>())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn margin(&self) -> f64 {
        self.margin
    }

    pub fn params(&self) -> Vec<T> {
        let mut p = self.raw_skew.clone();
        p.extend_from_slice(&self.raw_spd);
        p.extend_from_slice(&self.raw_diffusion);
        p
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        l.push("skew", n_skew(self.dim));
        l.push("spd", n_tri(self.dim));
        l.push("diffusion", self.dim * self.dim);
        l
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> Result<LinearSDE<U>> {
        LinearSDE::from_raw(self.dim, self.margin, params)
    }

    pub fn skew(&self) -> Matrix<T> {
        let mut s = Matrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                s[(i, j)] = self.raw_skew[k];
                s[(j, i)] = -self.raw_skew[k];
                k += 1;
            }
        }
        s
    }

    pub fn spd_factor(&self) -> Matrix<T> {
        let mut l = Matrix::zeros(self.dim, self.dim);
        let mut k = 0;
        for i in 0..self.dim {
            for j in 0..=i {
                l[(i, j)] = if i == j { softplus(self.raw_spd[k]) } else { self.raw_spd[k] };
                k += 1;
            }
        }
        l
    }

    /// Realized drift matrix `A`.
    pub fn drift_matrix(&self) -> Matrix<T> {
        let l = self.spd_factor();
        let llt = l.matmul(&l.transpose()).expect("square");
        let eps = T::lit(self.margin);
        Matrix::from_fn(self.dim, self.dim, |i, j| {
            let diag = if i == j { eps } else { T::zero() };
            self.skew()[(i, j)] - llt[(i, j)] - diag
        })
    }

    /// Realized diffusion matrix `K` (row-major raw parameters).
    pub fn diffusion(&self) -> Matrix<T> {
        Matrix::new(self.dim, self.dim, self.raw_diffusion.clone()).expect("d*d params")
    }

    /// `F = AΔT + I`, `Σ = KKᵀΔT`.
    pub fn discretize(&self, dt: f64) -> Result<DiscretizedLinear<T>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        let a = self.drift_matrix();
        let f = a.scale(T::lit(dt)).add(&Matrix::identity(self.dim))?;
        let k = self.diffusion();
        let sigma = k.matmul(&k.transpose())?.scale(T::lit(dt));
        DiscretizedLinear::new(f, sigma, dt)
    }
}

impl LinearSDE<f64> {
    /// Parameters realizing a given Hurwitz drift with `−(A+Aᵀ)/2 − εI ≻ 0`.
    pub fn from_matrices(a: &Matrix<f64>, k: &Matrix<f64>, margin: f64) -> Result<Self> {
        let d = a.rows();
        if !a.is_square() || k.rows() != d || k.cols() != d {
            return Err(Error::dims("LinearSDE::from_matrices", "A and K must be d×d"));
        }
        let sym = a.symmetrized();
        let p = Matrix::from_fn(d, d, |i, j| -sym[(i, j)] - if i == j { margin } else { 0.0 });
        let l = p.cholesky().map_err(|_| Error::InvalidArgument("symmetric part of A is not below −εI".into()))?;
        let mut params = Vec::with_capacity(Self::num_params_for(d));
        for i in 0..d {
            for j in i + 1..d {
                params.push((a[(i, j)] - a[(j, i)]) / 2.0);
            }
        }
        for i in 0..d {
            for j in 0..=i {
                params.push(if i == j { softplus_inv(l[(i, j)]) } else { l[(i, j)] });
            }
        }
        params.extend_from_slice(k.as_slice());
        Self::from_raw(d, margin, &params)
    }
}

/// Discrete-time transition `z' = F z + w`, `w ~ 𝒩(0, Σ)`.
#[derive(Clone, Debug)]
pub struct DiscretizedLinear<T> {
    f: Matrix<T>,
    sigma: Matrix<T>,
    dt: f64,
}

impl<T: Scalar> DiscretizedLinear<T> {
    /// Fails if the spectral radius of `F` is not below one.
    pub fn new(f: Matrix<T>, sigma: Matrix<T>, dt: f64) -> Result<Self> {
        if !f.is_square() || f.rows() != sigma.rows() || !sigma.is_square() {
            return Err(Error::dims("DiscretizedLinear", "F and Σ must be d×d"));
        }
        if !f.is_finite() || !sigma.is_finite() {
            return Err(Error::NonFinite("discretized dynamics".into()));
        }
        let spectral_radius = f.values().spectral_radius();
        if !(spectral_radius < 1.0) {
            return Err(Error::UnstableDiscretization { spectral_radius });
        }
        Ok(DiscretizedLinear { f, sigma, dt })
    }

    pub fn dim(&self) -> usize {
        self.f.rows()
    }

    pub fn transition(&self) -> &Matrix<T> {
        &self.f
    }

    pub fn noise_covariance(&self) -> &Matrix<T> {
        &self.sigma
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `Σ∞ = Σᵢ FⁱΣFⁱᵀ`, from `vec(Σ∞) = (I − F⊗F)⁻¹ vec(Σ)`.
    pub fn stationary_covariance(&self) -> Result<Matrix<T>> {
        let d = self.dim();
        let system = Matrix::identity(d * d).sub(&self.f.kron(&self.f))?;
        let rhs = Matrix::column(&self.sigma.vec());
        let sol = system.solve(&rhs)?;
        let cov = Matrix::unvec(sol.as_slice(), d, d)?.symmetrized();
        let residual = self.fixed_point_residual(&cov.values());
        if !(residual <= 1e-8 * cov.values().inf_norm().max(f64::MIN_POSITIVE)) {
            return Err(Error::StationaryResidual { residual });
        }
        Ok(cov)
    }

    /// `‖FCFᵀ + Σ − C‖∞`.
    pub fn fixed_point_residual(&self, cov: &Matrix<f64>) -> f64 {
        let f = self.f.values();
        let lhs = f
            .matmul(cov)
            .and_then(|m| m.matmul(&f.transpose()))
            .and_then(|m| m.add(&self.sigma.values()))
            .and_then(|m| m.sub(cov));
        lhs.map_or(f64::INFINITY, |m| m.inf_norm())
    }

    /// `Σ_s = Σ_{i<s} FⁱΣFⁱᵀ`.
    pub fn step_covariance(&self, steps: usize) -> Result<Matrix<T>> {
        let mut acc = Matrix::zeros(self.dim(), self.dim());
        let mut fi = Matrix::identity(self.dim());
        for _ in 0..steps {
            acc = acc.add(&fi.matmul(&self.sigma)?.matmul(&fi.transpose())?)?;
            fi = fi.matmul(&self.f)?;
        }
        Ok(acc)
    }

    /// Stationary density `𝒩(0, Σ∞)`.
    pub fn stationary_density(&self) -> Result<GaussianDensity<T>> {
        GaussianDensity::new(vec![T::zero(); self.dim()], self.stationary_covariance()?)
    }

    /// The `s`-step backward kernel shared by every pair of a chain.
    pub fn backward_kernel(&self, steps: usize) -> Result<BackwardKernel<T>> {
        if steps == 0 {
            return Err(Error::InvalidArgument("backward conditional needs steps >= 1".into()));
        }
        let fs = self.f.pow(steps)?;
        let g = fs.inverse()?;
        let cov = g.matmul(&self.step_covariance(steps)?)?.matmul(&g.transpose())?;
        let noise = GaussianDensity::new(vec![T::zero(); self.dim()], cov)?;
        Ok(BackwardKernel { inv_transition: g, noise })
    }

    /// `p(z_i | z_{i+s}) = 𝒩(F⁻ˢ z_next, F⁻ˢ Σ_s F⁻ˢᵀ)`.
    pub fn backward_conditional(&self, z_next: &[T], steps: usize) -> Result<GaussianDensity<T>> {
        self.backward_kernel(steps)?.conditional(z_next)
    }
}

/// `z_i | z_{i+s} ~ 𝒩(G z_{i+s}, C)` with `G = F⁻ˢ`.
#[derive(Clone, Debug)]
pub struct BackwardKernel<T> {
    inv_transition: Matrix<T>,
    noise: GaussianDensity<T>,
}

impl<T: Scalar> BackwardKernel<T> {
    pub fn conditional(&self, z_next: &[T]) -> Result<GaussianDensity<T>> {
        Ok(self.noise.recentered(self.inv_transition.mul_vec(z_next)?))
    }

    pub fn log_density(&self, z: &[T], z_next: &[T]) -> Result<T> {
        let mean = self.inv_transition.mul_vec(z_next)?;
        if z.len() != mean.len() {
            return Err(Error::dims("backward conditional", format!("{} vs {}", z.len(), mean.len())));
        }
        let r: Vec<T> = z.iter().zip(&mean).map(|(&a, &m)| a - m).collect();
        Ok(self.noise.log_density_of_residual(&r))
    }
}
