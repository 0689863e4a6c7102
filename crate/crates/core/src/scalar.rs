//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All model math is written against [`Scalar`], so the same code runs in
//! plain `f64`/`f32` and in the recording type [`crate::diffcore::Var`] used
//! for reverse-mode gradients.

use num_traits::{Float, FromPrimitive};
use std::fmt::{Debug, Display};
use std::iter::Sum;

pub trait Scalar: Float + FromPrimitive + Debug + Display + Default + Sum<Self> + Send + Sync + 'static {
    /// Lift an `f64` constant. Never fails for the implemented types.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("scalar conversion from f64")
    }

    /// Primal value as `f64`.
    fn value(self) -> f64 {
        self.to_f64().expect("scalar conversion to f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Scalar>(x: T) -> T {
    if x.value() > 30.0 {
        x
    } else if x.value() < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv(y: f64) -> f64 {
    assert!(y > 0.0, "softplus_inv needs a positive argument");
    if y > 30.0 {
        y
    } else {
        y + (-(-y).exp_m1()).ln()
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

pub fn norm2(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Numerically stable `ln Σ exp(xᵢ)`.
pub fn log_sum_exp<T: Scalar>(xs: &[T]) -> T {
    let m = xs.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return T::lit(m);
    }
    let mt = T::lit(m);
    mt + xs.iter().map(|&x| (x - mt).exp()).sum::<T>().ln()
}
