/// Adaptive moment estimation with bias correction.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64, betas: (f64, f64)) -> Self {
        Adam { lr, beta1: betas.0, beta2: betas.1, eps: 1e-8, t: 0, m: vec![0.0; n], v: vec![0.0; n] }
    }

    pub fn steps(&self) -> i32 {
        self.t
    }

    /// One descent step on `theta` along `grad`.
    pub fn step(&mut self, theta: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(theta.len(), grad.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for ((p, g), (m, v)) in theta.iter_mut().zip(grad).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
        }
    }
}

/// Rescales `g` so its Euclidean norm is at most `max_norm`; returns the norm
/// before clipping.
pub fn clip_global_norm(g: &mut [f64], max_norm: f64) -> f64 {
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        g.iter_mut().for_each(|x| *x *= k);
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        // bias correction makes the first step lr·sign(g)
        let mut opt = Adam::new(2, 0.1, (0.9, 0.999));
        let mut theta = [1.0, -1.0];
        opt.step(&mut theta, &[3.0, -0.5]);
        assert!((theta[0] - 0.9).abs() < 1e-7);
        assert!((theta[1] + 0.9).abs() < 1e-7);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adam::new(2, 0.05, (0.9, 0.999));
        let mut theta = [3.0, -2.0];
        for _ in 0..2000 {
            let g = [2.0 * (theta[0] - 1.0), 8.0 * (theta[1] + 0.5)];
            opt.step(&mut theta, &g);
        }
        assert!((theta[0] - 1.0).abs() < 1e-3 && (theta[1] + 0.5).abs() < 1e-3, "{theta:?}");
    }

    proptest! {
        #[test]
        fn clipped_norm_respects_bound(g in prop::collection::vec(-1e3f64..1e3, 1..20), bound in 1e-3f64..1e2) {
            let mut c = g.clone();
            let before = clip_global_norm(&mut c, bound);
            let after = c.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(after <= bound * (1.0 + 1e-12));
            if before <= bound {
                prop_assert_eq!(c, g);
            }
        }
    }
}
