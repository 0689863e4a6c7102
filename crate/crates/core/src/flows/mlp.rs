use crate::diffcore::Matrix;
use crate::scalar::Scalar;
use rand::Rng;

/// Fully connected net with `tanh` hidden activations and a linear output.
///
/// Parameters are stored flat, layer by layer: the `out × in` weight block in
/// row-major order followed by the `out` biases.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp<T> {
    widths: Vec<usize>,
    params: Vec<T>,
}

/// Activations recorded by [`Mlp::forward_cached`]: the input, each hidden
/// `tanh` output, and the final output.
pub struct MlpCache<T> {
    acts: Vec<Vec<T>>,
}

impl<T: Scalar> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().expect("cache holds at least the input")
    }
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

impl<T: Scalar> Mlp<T> {
    /// Hidden layers uniform in `±1/√fan_in`; the final layer is zero so the
    /// net starts as the zero map.
    pub fn new<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0), "bad MLP widths {widths:?}");
        let mut params = Vec::with_capacity(param_count(widths));
        let last = widths.len() - 2;
        for (l, w) in widths.windows(2).enumerate() {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for _ in 0..w[0] * w[1] + w[1] {
                let v = if l == last { 0.0 } else { rng.random_range(-bound..bound) };
                params.push(T::lit(v));
            }
        }
        Mlp { widths: widths.to_vec(), params }
    }

    pub fn from_params(widths: &[usize], params: Vec<T>) -> Self {
        assert_eq!(params.len(), param_count(widths), "MLP parameter count");
        Mlp { widths: widths.to_vec(), params }
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().unwrap()
    }

    fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Offsets of the weight block and bias block of layer `l`.
    fn offsets(&self, l: usize) -> (usize, usize) {
        let start: usize = param_count(&self.widths[..=l]);
        (start, start + self.widths[l] * self.widths[l + 1])
    }

    fn affine(&self, l: usize, x: &[T]) -> Vec<T> {
        let (w0, b0) = self.offsets(l);
        let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
        (0..n_out)
            .map(|o| {
                let row = &self.params[w0 + o * n_in..w0 + (o + 1) * n_in];
                row.iter().zip(x).fold(self.params[b0 + o], |acc, (&w, &v)| acc + w * v)
            })
            .collect()
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        let mut h = x.to_vec();
        for l in 0..self.n_layers() {
            h = self.affine(l, &h);
            if l + 1 < self.n_layers() {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
        }
        h
    }

    pub fn forward_cached(&self, x: &[T]) -> MlpCache<T> {
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let mut h = self.affine(l, acts.last().unwrap());
            if l + 1 < self.n_layers() {
                h.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(h);
        }
        MlpCache { acts }
    }

    /// Accumulate `∂L/∂params` into `grad` and return `∂L/∂input`.
    pub fn backward(&self, cache: &MlpCache<T>, grad_out: &[T], grad: &mut [T]) -> Vec<T> {
        debug_assert_eq!(grad.len(), self.params.len());
        let mut g = grad_out.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (w0, b0) = self.offsets(l);
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let input = &cache.acts[l];
            for o in 0..n_out {
                let go = g[o];
                grad[b0 + o] = grad[b0 + o] + go;
                for i in 0..n_in {
                    grad[w0 + o * n_in + i] = grad[w0 + o * n_in + i] + go * input[i];
                }
            }
            let mut gin = vec![T::zero(); n_in];
            for (row, &go) in self.params[w0..w0 + n_out * n_in].chunks_exact(n_in).zip(&g[..n_out]) {
                for (gi, &w) in gin.iter_mut().zip(row) {
                    *gi = *gi + w * go;
                }
            }
            if l > 0 {
                // input of layer l is tanh output of layer l-1
                for (gi, &h) in gin.iter_mut().zip(input) {
                    *gi = *gi * (T::one() - h * h);
                }
            }
            g = gin;
        }
        g
    }

    /// `∂output/∂input`, shape `out × in`.
    pub fn input_jacobian(&self, x: &[T]) -> Matrix<T> {
        let cache = self.forward_cached(x);
        let mut jac = Matrix::identity(self.input_dim());
        for l in 0..self.n_layers() {
            let (w0, _) = self.offsets(l);
            let (n_in, n_out) = (self.widths[l], self.widths[l + 1]);
            let w = Matrix::from_fn(n_out, n_in, |o, i| self.params[w0 + o * n_in + i]);
            jac = w.matmul(&jac).expect("consistent widths");
            if l + 1 < self.n_layers() {
                let h = &cache.acts[l + 1];
                jac = Matrix::from_fn(n_out, jac.cols(), |o, i| jac[(o, i)] * (T::one() - h[o] * h[o]));
            }
        }
        jac
    }
}
