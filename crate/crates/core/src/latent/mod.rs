//! Latent dynamics that are stable by construction.
//!
//! Point-to-point motions use a linear SDE with a Hurwitz drift; periodic
//! motions use a polar limit cycle. Densities are evaluated on the
//! discretized system at the demonstration sampling interval.

mod cycle;
mod gaussian;
mod linear;
mod polar;
mod sde;

pub use cycle::{CycleKernel, CycleParams, DiscreteCycle, LimitCycleSDE};
pub use gaussian::GaussianDensity;
pub use linear::{BackwardKernel, DiscretizedLinear, LinearSDE, DEFAULT_MARGIN};
pub use polar::{cartesian_to_polar, polar_to_cartesian, wrap_angle, ORIGIN_RADIUS};
pub use sde::{euler_maruyama_step, rollout_cycle, rollout_linear};

use crate::diffcore::{Matrix, ParamLayout};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LatentKind {
    Linear,
    Cycle,
}

impl fmt::Display for LatentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LatentKind::Linear => "linear",
            LatentKind::Cycle => "cycle",
        })
    }
}

impl FromStr for LatentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(LatentKind::Linear),
            "cycle" => Ok(LatentKind::Cycle),
            _ => Err(Error::InvalidArgument(format!("unknown latent kind {s:?} (linear | cycle)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Latent<T> {
    Linear(LinearSDE<T>),
    Cycle(LimitCycleSDE<T>),
}

impl<T: Scalar> Latent<T> {
    pub fn from_raw(kind: LatentKind, dim: usize, margin: f64, params: &[T]) -> Result<Self> {
        Ok(match kind {
            LatentKind::Linear => Latent::Linear(LinearSDE::from_raw(dim, margin, params)?),
            LatentKind::Cycle => Latent::Cycle(LimitCycleSDE::from_raw(dim, margin, params)?),
        })
    }

    pub fn num_params_for(kind: LatentKind, dim: usize) -> usize {
        match kind {
            LatentKind::Linear => LinearSDE::<T>::num_params_for(dim),
            LatentKind::Cycle => LimitCycleSDE::<T>::num_params_for(dim),
        }
    }

    pub fn kind(&self) -> LatentKind {
        match self {
            Latent::Linear(_) => LatentKind::Linear,
            Latent::Cycle(_) => LatentKind::Cycle,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Latent::Linear(s) => s.dim(),
            Latent::Cycle(s) => s.dim(),
        }
    }

    pub fn margin(&self) -> f64 {
        match self {
            Latent::Linear(s) => s.margin(),
            Latent::Cycle(s) => s.margin(),
        }
    }

    pub fn params(&self) -> Vec<T> {
        match self {
            Latent::Linear(s) => s.params(),
            Latent::Cycle(s) => s.params(),
        }
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = ParamLayout::new();
        match self {
            Latent::Linear(s) => l.extend("latent.", &s.layout()),
            Latent::Cycle(s) => l.extend("latent.", &s.layout()),
        }
        l
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> Result<Latent<U>> {
        Ok(match self {
            Latent::Linear(s) => Latent::Linear(s.with_params(params)?),
            Latent::Cycle(s) => Latent::Cycle(s.with_params(params)?),
        })
    }

    pub fn discretize(&self, dt: f64) -> Result<DiscreteLatent<T>> {
        Ok(match self {
            Latent::Linear(s) => {
                let disc = s.discretize(dt)?;
                let stationary = disc.stationary_density()?;
                DiscreteLatent::Linear { disc, stationary }
            }
            Latent::Cycle(s) => DiscreteLatent::Cycle(s.discretize(dt)?),
        })
    }
}

impl Latent<f64> {
    /// Deterministic part of the dynamics at `z`, in cartesian latent coordinates.
    pub fn drift(&self, z: &[f64]) -> Result<Vec<f64>> {
        if z.len() != self.dim() {
            return Err(Error::dims("latent drift", format!("{} vs {}", z.len(), self.dim())));
        }
        match self {
            Latent::Linear(s) => s.drift_matrix().mul_vec(z),
            Latent::Cycle(s) => s.cartesian_drift(z),
        }
    }

    /// Diffusion matrix of the linear latent; for a cycle the polar diffusion.
    pub fn diffusion(&self) -> Matrix<f64> {
        match self {
            Latent::Linear(s) => s.diffusion(),
            Latent::Cycle(s) => {
                let p = s.realized();
                let d = s.dim();
                let mut g = Matrix::zeros(d, d);
                g[(0, 0)] = p.radial_noise;
                g[(1, 1)] = p.phase_noise;
                if let Some(e) = s.extra() {
                    let k = e.diffusion();
                    for i in 2..d {
                        for j in 2..d {
                            g[(i, j)] = k[(i - 2, j - 2)];
                        }
                    }
                }
                g
            }
        }
    }

    pub fn rollout<R: Rng + ?Sized>(
        &self,
        z0: &[f64],
        n_steps: usize,
        dt: f64,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<Vec<Vec<f64>>> {
        match self {
            Latent::Linear(s) => rollout_linear(s, z0, n_steps, dt, noise_scale, rng),
            Latent::Cycle(s) => rollout_cycle(s, z0, n_steps, dt, noise_scale, rng),
        }
    }
}

/// A latent model at a fixed sampling interval.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum DiscreteLatent<T> {
    Linear { disc: DiscretizedLinear<T>, stationary: GaussianDensity<T> },
    Cycle(DiscreteCycle<T>),
}

/// Backward conditional `p(z_i | z_{i+s})` for a fixed stride.
#[derive(Clone, Debug)]
pub enum TransitionKernel<T> {
    Linear(BackwardKernel<T>),
    Cycle(CycleKernel<T>),
}

impl<T: Scalar> DiscreteLatent<T> {
    pub fn stationary_log_density(&self, z: &[T]) -> Result<T> {
        match self {
            DiscreteLatent::Linear { stationary, .. } => stationary.log_density(z),
            DiscreteLatent::Cycle(c) => c.stationary_log_density(z),
        }
    }

    pub fn kernel(&self, steps: usize) -> Result<TransitionKernel<T>> {
        Ok(match self {
            DiscreteLatent::Linear { disc, .. } => TransitionKernel::Linear(disc.backward_kernel(steps)?),
            DiscreteLatent::Cycle(c) => TransitionKernel::Cycle(c.kernel(steps)?),
        })
    }
}

impl<T: Scalar> TransitionKernel<T> {
    pub fn log_density(&self, z: &[T], z_next: &[T]) -> Result<T> {
        match self {
            TransitionKernel::Linear(k) => k.log_density(z, z_next),
            TransitionKernel::Cycle(k) => k.log_density(z, z_next),
        }
    }
}
