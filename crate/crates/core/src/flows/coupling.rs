use super::mlp::{Mlp, MlpCache};
use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;

/// Log-scales are squashed into `[-SCALE_BOUND, SCALE_BOUND]` before `exp`.
pub const SCALE_BOUND: f64 = 5.0;

fn squash<T: Scalar>(x: T) -> T {
    let b = T::lit(SCALE_BOUND);
    b * (x / b).tanh()
}

fn squash_slope<T: Scalar>(x: T) -> T {
    let t = (x / T::lit(SCALE_BOUND)).tanh();
    T::one() - t * t
}

/// Affine coupling: `y_A = z_A ⊙ exp(s(z_P)) + t(z_P)`, `y_P = z_P`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingLayer<T> {
    dim: usize,
    active: Vec<usize>,
    passive: Vec<usize>,
    scale_net: Mlp<T>,
    translate_net: Mlp<T>,
}

pub struct CouplingCache<T> {
    s_cache: MlpCache<T>,
    t_cache: MlpCache<T>,
    s: Vec<T>,
    z_active: Vec<T>,
}

fn gather<T: Copy>(x: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| x[i]).collect()
}

impl<T: Scalar> CouplingLayer<T> {
    /// Parity-`parity` mask: active indices are those with `i % 2 == parity`.
    pub fn new<R: Rng + ?Sized>(dim: usize, parity: usize, hidden: &[usize], rng: &mut R) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument(format!("coupling layers need dimension >= 2, got {dim}")));
        }
        let (active, passive): (Vec<usize>, Vec<usize>) = (0..dim).partition(|i| i % 2 == parity % 2);
        let widths = |n_in: usize, n_out: usize| {
            let mut w = vec![n_in];
            w.extend_from_slice(hidden);
            w.push(n_out);
            w
        };
        let scale_net = Mlp::new(&widths(passive.len(), active.len()), rng);
        let translate_net = Mlp::new(&widths(passive.len(), active.len()), rng);
        Self::from_parts(dim, active, passive, scale_net, translate_net)
    }

    pub fn from_parts(
        dim: usize,
        active: Vec<usize>,
        passive: Vec<usize>,
        scale_net: Mlp<T>,
        translate_net: Mlp<T>,
    ) -> Result<Self> {
        let mut seen = vec![false; dim];
        for &i in active.iter().chain(&passive) {
            if i >= dim || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidArgument(format!("bad coupling mask index {i}")));
            }
        }
        if active.is_empty() || passive.is_empty() || seen.iter().any(|s| !s) {
            return Err(Error::InvalidArgument("coupling mask must partition all indices".into()));
        }
        for net in [&scale_net, &translate_net] {
            if net.input_dim() != passive.len() || net.output_dim() != active.len() {
                return Err(Error::InvalidArgument("coupling net shape does not match mask".into()));
            }
        }
        Ok(CouplingLayer { dim, active, passive, scale_net, translate_net })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    pub fn passive(&self) -> &[usize] {
        &self.passive
    }

    pub fn scale_net(&self) -> &Mlp<T> {
        &self.scale_net
    }

    pub fn translate_net(&self) -> &Mlp<T> {
        &self.translate_net
    }

    pub fn num_params(&self) -> usize {
        self.scale_net.params().len() + self.translate_net.params().len()
    }

    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.scale_net.params().iter().chain(self.translate_net.params()).copied()
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> CouplingLayer<U> {
        let ns = self.scale_net.params().len();
        CouplingLayer {
            dim: self.dim,
            active: self.active.clone(),
            passive: self.passive.clone(),
            scale_net: Mlp::from_params(self.scale_net.widths(), params[..ns].to_vec()),
            translate_net: Mlp::from_params(self.translate_net.widths(), params[ns..].to_vec()),
        }
    }

    pub fn forward(&self, z: &[T]) -> (Vec<T>, T) {
        let zp = gather(z, &self.passive);
        let s: Vec<T> = self.scale_net.forward(&zp).into_iter().map(squash).collect();
        let t = self.translate_net.forward(&zp);
        let mut y = z.to_vec();
        for (k, &j) in self.active.iter().enumerate() {
            y[j] = z[j] * s[k].exp() + t[k];
        }
        (y, s.iter().copied().sum())
    }

    pub fn inverse(&self, y: &[T]) -> (Vec<T>, T) {
        let yp = gather(y, &self.passive);
        let s: Vec<T> = self.scale_net.forward(&yp).into_iter().map(squash).collect();
        let t = self.translate_net.forward(&yp);
        let mut z = y.to_vec();
        for (k, &j) in self.active.iter().enumerate() {
            z[j] = (y[j] - t[k]) * (-s[k]).exp();
        }
        (z, -s.iter().copied().sum::<T>())
    }

    pub fn inverse_cached(&self, y: &[T]) -> (Vec<T>, T, CouplingCache<T>) {
        let yp = gather(y, &self.passive);
        let s_cache = self.scale_net.forward_cached(&yp);
        let t_cache = self.translate_net.forward_cached(&yp);
        let s: Vec<T> = s_cache.output().iter().map(|&v| squash(v)).collect();
        let t = t_cache.output();
        let mut z = y.to_vec();
        let mut z_active = Vec::with_capacity(self.active.len());
        for (k, &j) in self.active.iter().enumerate() {
            z[j] = (y[j] - t[k]) * (-s[k]).exp();
            z_active.push(z[j]);
        }
        let ld = -s.iter().copied().sum::<T>();
        (z, ld, CouplingCache { s_cache, t_cache, s, z_active })
    }

    /// Given `∂L/∂z` and `∂L/∂inv_logdet`, accumulate parameter gradients and
    /// return `∂L/∂y`.
    pub fn inverse_backward(&self, cache: &CouplingCache<T>, grad_z: &[T], grad_logdet: T, grad: &mut [T]) -> Vec<T> {
        let na = self.active.len();
        let mut grad_y = grad_z.to_vec();
        let mut g_sraw = Vec::with_capacity(na);
        let mut g_t = Vec::with_capacity(na);
        let s_raw = cache.s_cache.output();
        for (k, &j) in self.active.iter().enumerate() {
            let inv_scale = (-cache.s[k]).exp();
            grad_y[j] = grad_z[j] * inv_scale;
            g_t.push(-grad_z[j] * inv_scale);
            let g_s = -grad_z[j] * cache.z_active[k] - grad_logdet;
            g_sraw.push(g_s * squash_slope(s_raw[k]));
        }
        let ns = self.scale_net.params().len();
        let (gs, gt) = grad.split_at_mut(ns);
        let gin_s = self.scale_net.backward(&cache.s_cache, &g_sraw, gs);
        let gin_t = self.translate_net.backward(&cache.t_cache, &g_t, gt);
        for (k, &p) in self.passive.iter().enumerate() {
            grad_y[p] = grad_y[p] + gin_s[k] + gin_t[k];
        }
        grad_y
    }

    /// `∂y/∂z` at `z`.
    pub fn jacobian(&self, z: &[T]) -> Matrix<T> {
        let zp = gather(z, &self.passive);
        let s_raw = self.scale_net.forward(&zp);
        let js = self.scale_net.input_jacobian(&zp);
        let jt = self.translate_net.input_jacobian(&zp);
        let mut jac = Matrix::identity(self.dim);
        for (k, &a) in self.active.iter().enumerate() {
            let e = squash(s_raw[k]).exp();
            jac[(a, a)] = e;
            let slope = z[a] * e * squash_slope(s_raw[k]);
            for (m, &p) in self.passive.iter().enumerate() {
                jac[(a, p)] = slope * js[(k, m)] + jt[(k, m)];
            }
        }
        jac
    }
}
