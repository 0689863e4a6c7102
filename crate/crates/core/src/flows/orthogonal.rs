use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::scalar::{dot, Scalar};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// `Q = H(v₁) H(v₂) ⋯ H(v_m)` with `H(v) = I − 2vvᵀ/(vᵀv)`.
///
/// Forward applies `Q`, inverse applies `Qᵀ`; the log-determinant is zero.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalLayer<T> {
    dim: usize,
    vectors: Vec<T>,
}

pub struct OrthogonalCache<T> {
    inputs: Vec<Vec<T>>,
}

fn reflect<T: Scalar>(v: &[T], x: &[T]) -> Result<Vec<T>> {
    let nn = dot(v, v);
    if !(nn.value() > 1e-300) {
        return Err(Error::InvalidArgument("zero Householder vector".into()));
    }
    let c = T::lit(2.0) * dot(v, x) / nn;
    Ok(x.iter().zip(v).map(|(&xi, &vi)| xi - c * vi).collect())
}

impl<T: Scalar> OrthogonalLayer<T> {
    /// `m` random Householder vectors. For even `m` they are drawn in
    /// identical pairs, so the layer starts as the identity.
    pub fn new<R: Rng + ?Sized>(dim: usize, m: usize, rng: &mut R) -> Result<Self> {
        if dim == 0 || m == 0 {
            return Err(Error::InvalidArgument("orthogonal layer needs dim, m >= 1".into()));
        }
        let mut vectors = Vec::with_capacity(m * dim);
        let mut k = 0;
        while k < m {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let copies = if m.is_multiple_of(2) { 2 } else { 1 };
            for _ in 0..copies {
                vectors.extend(v.iter().map(|&x| T::lit(x)));
            }
            k += copies;
        }
        Ok(OrthogonalLayer { dim, vectors })
    }

    pub fn from_vectors(dim: usize, vectors: Vec<T>) -> Result<Self> {
        if dim == 0 || vectors.is_empty() || !vectors.len().is_multiple_of(dim) {
            return Err(Error::InvalidArgument("householder vectors must be d-vectors".into()));
        }
        Ok(OrthogonalLayer { dim, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_reflections(&self) -> usize {
        self.vectors.len() / self.dim
    }

    pub fn params(&self) -> &[T] {
        &self.vectors
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> OrthogonalLayer<U> {
        OrthogonalLayer { dim: self.dim, vectors: params.to_vec() }
    }

    fn vector(&self, k: usize) -> &[T] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn forward(&self, z: &[T]) -> Result<Vec<T>> {
        let mut x = z.to_vec();
        for k in (0..self.num_reflections()).rev() {
            x = reflect(self.vector(k), &x)?;
        }
        Ok(x)
    }

    pub fn inverse(&self, y: &[T]) -> Result<Vec<T>> {
        let mut x = y.to_vec();
        for k in 0..self.num_reflections() {
            x = reflect(self.vector(k), &x)?;
        }
        Ok(x)
    }

    pub fn inverse_cached(&self, y: &[T]) -> Result<(Vec<T>, OrthogonalCache<T>)> {
        let mut inputs = Vec::with_capacity(self.num_reflections());
        let mut x = y.to_vec();
        for k in 0..self.num_reflections() {
            let next = reflect(self.vector(k), &x)?;
            inputs.push(x);
            x = next;
        }
        Ok((x, OrthogonalCache { inputs }))
    }

    /// Accumulate `∂L/∂vectors` into `grad` and return `∂L/∂y`.
    pub fn inverse_backward(&self, cache: &OrthogonalCache<T>, grad_z: &[T], grad: &mut [T]) -> Vec<T> {
        let two = T::lit(2.0);
        let four = T::lit(4.0);
        let mut g = grad_z.to_vec();
        for k in (0..self.num_reflections()).rev() {
            let v = self.vector(k);
            let x = &cache.inputs[k];
            let n = dot(v, v);
            let c = dot(v, x);
            let gv = dot(&g, v);
            for j in 0..self.dim {
                let d = -two * (x[j] * gv + c * g[j]) / n + four * c * gv * v[j] / (n * n);
                grad[k * self.dim + j] = grad[k * self.dim + j] + d;
            }
            // H is symmetric
            let coef = two * gv / n;
            g = g.iter().zip(v).map(|(&gi, &vi)| gi - coef * vi).collect();
        }
        g
    }

    /// The realized `Q`.
    pub fn matrix(&self) -> Result<Matrix<T>> {
        let mut q = Matrix::zeros(self.dim, self.dim);
        for j in 0..self.dim {
            let mut e = vec![T::zero(); self.dim];
            e[j] = T::one();
            let col = self.forward(&e)?;
            for i in 0..self.dim {
                q[(i, j)] = col[i];
            }
        }
        Ok(q)
    }
}
