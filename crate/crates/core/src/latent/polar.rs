use crate::error::{Error, Result};
use crate::scalar::Scalar;
use std::f64::consts::PI;

/// Exclusion radius around the origin for the polar map.
pub const ORIGIN_RADIUS: f64 = 1e-6;

/// `(ρ, ψ, log|det ∂(ρ,ψ)/∂(x,y)|)` with `ψ ∈ (−π, π]`.
pub fn cartesian_to_polar<T: Scalar>(x: T, y: T) -> Result<(T, T, T)> {
    let r2 = x * x + y * y;
    if !(r2.value().sqrt() > ORIGIN_RADIUS) {
        return Err(Error::NearOrigin { point: vec![x.value(), y.value()], radius: ORIGIN_RADIUS });
    }
    let rho = r2.sqrt();
    let psi = y.atan2(x);
    Ok((rho, psi, -T::lit(0.5) * r2.ln()))
}

pub fn polar_to_cartesian<T: Scalar>(rho: T, psi: T) -> (T, T) {
    (rho * psi.cos(), rho * psi.sin())
}

/// Representative of `r` modulo 2π in `(−π, π]`.
pub fn wrap_angle<T: Scalar>(r: T) -> T {
    let two_pi = T::lit(2.0 * PI);
    let mut w = r - two_pi * (r / two_pi).round();
    if w.value() <= -PI {
        w = w + two_pi;
    } else if w.value() > PI {
        w = w - two_pi;
    }
    w
}
