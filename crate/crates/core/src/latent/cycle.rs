use super::gaussian::GaussianDensity;
use super::linear::{BackwardKernel, DiscretizedLinear, LinearSDE};
use super::polar::{cartesian_to_polar, wrap_angle};
use crate::diffcore::{Matrix, ParamLayout};
use crate::error::{Error, Result};
use crate::scalar::{log_sum_exp, softplus, softplus_inv, Scalar};
use std::f64::consts::PI;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Polar limit cycle in the first two coordinates:
/// `dρ = a(ρ − ρ*)dt + σ₁dB`, `dψ = b dt + σ₂dB`, with `a < 0`, `ρ*, σ₁, σ₂ > 0`.
/// Coordinates beyond the first two follow an independent [`LinearSDE`].
#[derive(Clone, Debug, PartialEq)]
pub struct LimitCycleSDE<T> {
    raw_rate: T,
    angular_velocity: T,
    raw_radius: T,
    raw_radial_noise: T,
    raw_phase_noise: T,
    extra: Option<LinearSDE<T>>,
}

/// Realized cycle parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CycleParams {
    pub rate: f64,
    pub angular_velocity: f64,
    pub radius: f64,
    pub radial_noise: f64,
    pub phase_noise: f64,
}

impl<T: Scalar> LimitCycleSDE<T> {
    pub fn num_params_for(dim: usize) -> usize {
        5 + if dim > 2 { LinearSDE::<T>::num_params_for(dim - 2) } else { 0 }
    }

    pub fn from_raw(dim: usize, margin: f64, params: &[T]) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidArgument("limit cycle needs dim >= 2".into()));
        }
        if params.len() != Self::num_params_for(dim) {
            return Err(Error::dims("LimitCycleSDE::from_raw", format!("{} params for dim {dim}", params.len())));
        }
        let extra = if dim > 2 { Some(LinearSDE::from_raw(dim - 2, margin, &params[5..])?) } else { None };
        Ok(LimitCycleSDE {
            raw_rate: params[0],
            angular_velocity: params[1],
            raw_radius: params[2],
            raw_radial_noise: params[3],
            raw_phase_noise: params[4],
            extra,
        })
    }

    pub fn dim(&self) -> usize {
        2 + self.extra.as_ref().map_or(0, LinearSDE::dim)
    }

    pub fn margin(&self) -> f64 {
        self.extra.as_ref().map_or(super::linear::DEFAULT_MARGIN, LinearSDE::margin)
    }

    pub fn extra(&self) -> Option<&LinearSDE<T>> {
        self.extra.as_ref()
    }

    pub fn params(&self) -> Vec<T> {
        let mut p =
            vec![self.raw_rate, self.angular_velocity, self.raw_radius, self.raw_radial_noise, self.raw_phase_noise];
        if let Some(e) = &self.extra {
            p.extend(e.params());
        }
        p
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        l.push("radial_rate", 1);
        l.push("angular_velocity", 1);
        l.push("radius", 1);
        l.push("radial_noise", 1);
        l.push("phase_noise", 1);
        if let Some(e) = &self.extra {
            l.extend("extra.", &e.layout());
        }
        l
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> Result<LimitCycleSDE<U>> {
        LimitCycleSDE::from_raw(self.dim(), self.margin(), params)
    }

    /// `a = −softplus(raw)`.
    pub fn rate(&self) -> T {
        -softplus(self.raw_rate)
    }

    pub fn angular_velocity(&self) -> T {
        self.angular_velocity
    }

    pub fn radius(&self) -> T {
        softplus(self.raw_radius)
    }

    pub fn radial_noise(&self) -> T {
        softplus(self.raw_radial_noise)
    }

    pub fn phase_noise(&self) -> T {
        softplus(self.raw_phase_noise)
    }

    pub fn realized(&self) -> CycleParams {
        CycleParams {
            rate: self.rate().value(),
            angular_velocity: self.angular_velocity.value(),
            radius: self.radius().value(),
            radial_noise: self.radial_noise().value(),
            phase_noise: self.phase_noise().value(),
        }
    }

    /// Scalar radial dynamics in `u = ρ − ρ*`: `F = 1 + aΔT`, `Σ = σ₁²ΔT`.
    pub fn radial(&self, dt: f64) -> Result<DiscretizedLinear<T>> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        let d = T::lit(dt);
        let s1 = self.radial_noise();
        DiscretizedLinear::new(
            Matrix::new(1, 1, vec![T::one() + self.rate() * d])?,
            Matrix::new(1, 1, vec![s1 * s1 * d])?,
            dt,
        )
    }

    /// Precompute everything the densities at interval `dt` need.
    pub fn discretize(&self, dt: f64) -> Result<DiscreteCycle<T>> {
        let radial = self.radial(dt)?;
        let radial_stationary = radial.stationary_density()?;
        let extra = match &self.extra {
            Some(e) => {
                let disc = e.discretize(dt)?;
                let st = disc.stationary_density()?;
                Some((disc, st))
            }
            None => None,
        };
        Ok(DiscreteCycle { sde: self.clone(), dt, radial, radial_stationary, extra })
    }

    /// Drift in cartesian coordinates at `z`.
    pub fn cartesian_drift(&self, z: &[f64]) -> Result<Vec<f64>> {
        let p = self.realized();
        let (rho, psi, _) = cartesian_to_polar(z[0], z[1])?;
        let rdot = p.rate * (rho - p.radius);
        let (c, s) = (psi.cos(), psi.sin());
        let mut out = vec![rdot * c - rho * p.angular_velocity * s, rdot * s + rho * p.angular_velocity * c];
        if let Some(e) = &self.extra {
            out.extend(e.drift_matrix().values().mul_vec(&z[2..])?);
        }
        Ok(out)
    }
}

impl LimitCycleSDE<f64> {
    pub fn new(dim: usize, params: CycleParams, extra: Option<LinearSDE<f64>>, margin: f64) -> Result<Self> {
        let CycleParams { rate, angular_velocity, radius, radial_noise, phase_noise } = params;
        if !(rate < 0.0 && radius > 0.0 && radial_noise > 0.0 && phase_noise > 0.0) {
            return Err(Error::InvalidArgument("limit cycle needs a < 0 and positive radius and noise levels".into()));
        }
        let mut raw = vec![
            softplus_inv(-rate),
            angular_velocity,
            softplus_inv(radius),
            softplus_inv(radial_noise),
            softplus_inv(phase_noise),
        ];
        match (dim > 2, extra) {
            (true, Some(e)) if e.dim() == dim - 2 => raw.extend(e.params()),
            (true, None) => raw.extend(LinearSDE::<f64>::isotropic(dim - 2, 1.0, 0.1, margin)?.params()),
            (false, None) => {}
            _ => return Err(Error::dims("LimitCycleSDE::new", "extra dynamics must cover dims 2..d")),
        }
        Self::from_raw(dim, margin, &raw)
    }
}

/// A [`LimitCycleSDE`] at a fixed sampling interval.
#[derive(Clone, Debug)]
pub struct DiscreteCycle<T> {
    sde: LimitCycleSDE<T>,
    dt: f64,
    radial: DiscretizedLinear<T>,
    radial_stationary: GaussianDensity<T>,
    extra: Option<(DiscretizedLinear<T>, GaussianDensity<T>)>,
}

/// Backward `s`-step conditional of the cycle dynamics.
#[derive(Clone, Debug)]
pub struct CycleKernel<T> {
    radius: T,
    radial: BackwardKernel<T>,
    phase_shift: T,
    phase_variance: T,
    extra: Option<BackwardKernel<T>>,
}

fn split<T: Scalar>(z: &[T], dim: usize) -> Result<()> {
    if z.len() != dim {
        return Err(Error::dims("limit cycle", format!("point of dim {} for dim {dim}", z.len())));
    }
    Ok(())
}

impl<T: Scalar> DiscreteCycle<T> {
    pub fn sde(&self) -> &LimitCycleSDE<T> {
        &self.sde
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Stationary radial variance `Σ∞ρ`.
    pub fn radial_variance(&self) -> T {
        self.radial_stationary.covariance()[(0, 0)]
    }

    /// `log 𝒩(ρ; ρ*, Σ∞ρ) − ln 2π − ½ln(x² + y²)` plus the extra-dimension term.
    pub fn stationary_log_density(&self, z: &[T]) -> Result<T> {
        split(z, self.sde.dim())?;
        let (rho, _, logdet) = cartesian_to_polar(z[0], z[1])?;
        let mut lp = self.radial_stationary.log_density(&[rho - self.sde.radius()])? - T::lit(LN_2PI) + logdet;
        if let Some((_, st)) = &self.extra {
            lp = lp + st.log_density(&z[2..])?;
        }
        Ok(lp)
    }

    pub fn kernel(&self, steps: usize) -> Result<CycleKernel<T>> {
        let s = T::lit((steps as f64) * self.dt);
        let sig2 = self.sde.phase_noise();
        Ok(CycleKernel {
            radius: self.sde.radius(),
            radial: self.radial.backward_kernel(steps)?,
            phase_shift: self.sde.angular_velocity() * s,
            phase_variance: sig2 * sig2 * s,
            extra: match &self.extra {
                Some((d, _)) => Some(d.backward_kernel(steps)?),
                None => None,
            },
        })
    }
}

impl<T: Scalar> CycleKernel<T> {
    /// Mean phase of `ψ_i` given `ψ_{i+s}`, wrapped.
    pub fn phase_mean(&self, psi_next: T) -> T {
        wrap_angle(psi_next - self.phase_shift)
    }

    pub fn phase_variance(&self) -> T {
        self.phase_variance
    }

    /// Log-density of the wrapped phase residual, summing wraps `k ∈ {−1, 0, 1}`.
    pub fn phase_log_density(&self, psi: T, psi_next: T) -> T {
        let r = wrap_angle(psi - psi_next + self.phase_shift);
        let v = self.phase_variance;
        let norm = -T::lit(0.5) * (T::lit(2.0 * PI) * v).ln();
        let terms: Vec<T> = [-1.0, 0.0, 1.0]
            .iter()
            .map(|&k| {
                let e = r + T::lit(2.0 * PI * k);
                norm - e * e / (T::lit(2.0) * v)
            })
            .collect();
        log_sum_exp(&terms)
    }

    /// Cartesian log-density of `z` given `z_next`, including the polar Jacobian at `z`.
    pub fn log_density(&self, z: &[T], z_next: &[T]) -> Result<T> {
        if z.len() != z_next.len() || z.len() < 2 {
            return Err(Error::dims("cycle conditional", format!("{} vs {}", z.len(), z_next.len())));
        }
        let (rho, psi, logdet) = cartesian_to_polar(z[0], z[1])?;
        let (rho_n, psi_n, _) = cartesian_to_polar(z_next[0], z_next[1])?;
        let mut lp = self.radial.log_density(&[rho - self.radius], &[rho_n - self.radius])?
            + self.phase_log_density(psi, psi_n)
            + logdet;
        if let Some(k) = &self.extra {
            lp = lp + k.log_density(&z[2..], &z_next[2..])?;
        }
        Ok(lp)
    }
}
