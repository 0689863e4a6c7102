use super::cycle::LimitCycleSDE;
use super::linear::LinearSDE;
use super::polar::{cartesian_to_polar, polar_to_cartesian};
use crate::diffcore::Matrix;
use crate::error::{Error, Result};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use std::f64::consts::PI;

/// `z' = z + f(z)ΔT + g(z)·√ΔT·ξ`, `ξ ~ 𝒩(0, I)`.
pub fn euler_maruyama_step<R: Rng + ?Sized>(
    drift: impl Fn(&[f64]) -> Result<Vec<f64>>,
    diffusion: impl Fn(&[f64]) -> Result<Matrix<f64>>,
    z: &[f64],
    dt: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    let f = drift(z)?;
    let g = diffusion(z)?;
    if f.len() != z.len() || g.rows() != z.len() {
        return Err(Error::dims("euler_maruyama_step", "drift/diffusion shape"));
    }
    if !f.iter().all(|v| v.is_finite()) || !g.is_finite() {
        return Err(Error::NonFinite("drift or diffusion".into()));
    }
    let xi: Vec<f64> = (0..g.cols()).map(|_| StandardNormal.sample(rng)).collect();
    let noise = g.mul_vec(&xi)?;
    let sq = dt.sqrt();
    Ok(z.iter().zip(&f).zip(&noise).map(|((zi, fi), ni)| zi + fi * dt + ni * sq).collect())
}

fn check_rollout(noise_scale: f64, dt: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&noise_scale) {
        return Err(Error::InvalidArgument(format!("noise scale must lie in [0, 1], got {noise_scale}")));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {dt}")));
    }
    Ok(())
}

/// `n_steps + 1` states of `dz = Az dt + noise_scale·K dB`.
pub fn rollout_linear<R: Rng + ?Sized>(
    sde: &LinearSDE<f64>,
    z0: &[f64],
    n_steps: usize,
    dt: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_rollout(noise_scale, dt)?;
    if z0.len() != sde.dim() {
        return Err(Error::dims("rollout", format!("start of dim {} for dim {}", z0.len(), sde.dim())));
    }
    let a = sde.drift_matrix();
    let k = sde.diffusion().scale(noise_scale);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(z0.to_vec());
    for _ in 0..n_steps {
        let z = out.last().expect("non-empty");
        let next = euler_maruyama_step(|z| a.mul_vec(z), |_| Ok(k.clone()), z, dt, rng)?;
        out.push(next);
    }
    Ok(out)
}

/// Cycle rollout stepped in polar coordinates; a negative radius is reflected
/// through the origin.
pub fn rollout_cycle<R: Rng + ?Sized>(
    sde: &LimitCycleSDE<f64>,
    z0: &[f64],
    n_steps: usize,
    dt: f64,
    noise_scale: f64,
    rng: &mut R,
) -> Result<Vec<Vec<f64>>> {
    check_rollout(noise_scale, dt)?;
    let d = sde.dim();
    if z0.len() != d {
        return Err(Error::dims("rollout", format!("start of dim {} for dim {d}", z0.len())));
    }
    let p = sde.realized();
    let (a, k) = match sde.extra() {
        Some(e) => (e.drift_matrix(), e.diffusion()),
        None => (Matrix::zeros(0, 0), Matrix::zeros(0, 0)),
    };
    let mut g = Matrix::zeros(d, d);
    g[(0, 0)] = p.radial_noise * noise_scale;
    g[(1, 1)] = p.phase_noise * noise_scale;
    for i in 2..d {
        for j in 2..d {
            g[(i, j)] = k[(i - 2, j - 2)] * noise_scale;
        }
    }
    let drift = |s: &[f64]| -> Result<Vec<f64>> {
        let mut f = vec![p.rate * (s[0] - p.radius), p.angular_velocity];
        if d > 2 {
            f.extend(a.mul_vec(&s[2..])?);
        }
        Ok(f)
    };
    let (rho, psi, _) = cartesian_to_polar(z0[0], z0[1])?;
    let mut state = vec![rho, psi];
    state.extend_from_slice(&z0[2..]);
    let mut out = Vec::with_capacity(n_steps + 1);
    out.push(z0.to_vec());
    for _ in 0..n_steps {
        state = euler_maruyama_step(drift, |_| Ok(g.clone()), &state, dt, rng)?;
        if state[0] < 0.0 {
            state[0] = -state[0];
            state[1] += PI;
        }
        state[1] = super::polar::wrap_angle(state[1]);
        let (x, y) = polar_to_cartesian(state[0], state[1]);
        let mut z = vec![x, y];
        z.extend_from_slice(&state[2..]);
        out.push(z);
    }
    Ok(out)
}
