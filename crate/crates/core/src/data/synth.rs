use super::{Dataset, Trajectory};
use crate::error::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use std::f64::consts::PI;
use std::str::FromStr;

/// Sampling interval of the point-to-point generators.
pub const POINT_DT: f64 = 0.05;
/// Sampling interval of the limit-cycle generators.
pub const CYCLE_DT: f64 = 0.05;

const POINT_LEN: usize = 100;
const DECAY: f64 = 5.0;
/// Angular velocity of every cycle generator (one period = 2 s).
pub const CYCLE_OMEGA: f64 = PI;
const CYCLE_PERIODS: f64 = 2.0;
const CYCLE_CENTER: [f64; 2] = [1.0, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointShape {
    Line,
    Sine,
    SCurve,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleShape {
    Circle,
    Ellipse,
    Lissajous,
}

impl FromStr for PointShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line" => Ok(PointShape::Line),
            "sine" => Ok(PointShape::Sine),
            "s-curve" | "scurve" => Ok(PointShape::SCurve),
            _ => Err(Error::InvalidArgument(format!("unknown point-to-point shape {s:?}"))),
        }
    }
}

impl FromStr for CycleShape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "circle" => Ok(CycleShape::Circle),
            "ellipse" => Ok(CycleShape::Ellipse),
            "lissajous" => Ok(CycleShape::Lissajous),
            _ => Err(Error::InvalidArgument(format!("unknown cycle shape {s:?}"))),
        }
    }
}

impl PointShape {
    /// Path from the goal (`s = 0`, the origin) to the start (`s = 1`).
    fn path(self, s: f64) -> [f64; 2] {
        match self {
            PointShape::Line => [-3.0 * s, 1.5 * s],
            PointShape::Sine => [-3.0 * s, 0.8 * (2.0 * PI * s).sin()],
            PointShape::SCurve => [1.2 * (2.0 * PI * s).sin(), 3.0 * s],
        }
    }
}

impl CycleShape {
    fn orbit(self, phase: f64) -> [f64; 2] {
        let [cx, cy] = CYCLE_CENTER;
        match self {
            CycleShape::Circle => [cx + phase.cos(), cy + phase.sin()],
            CycleShape::Ellipse => {
                // semi-axes 1.5 and 0.6, rotated by 30°
                let (u, v) = (1.5 * phase.cos(), 0.6 * phase.sin());
                let (c, s) = ((PI / 6.0).cos(), (PI / 6.0).sin());
                [cx + c * u - s * v, cy + s * u + c * v]
            }
            CycleShape::Lissajous => [cx + 1.2 * phase.sin(), cy + 0.6 * (2.0 * phase).sin()],
        }
    }
}

/// Goal at the origin; each demo follows the shape's path with a
/// decelerating profile and a smooth per-demo deviation of size `noise`
/// that vanishes at the goal.
pub fn synth_point_to_point(shape: PointShape, n_demos: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_demos == 0 || !(noise >= 0.0) {
        return Err(Error::InvalidArgument("need n_demos >= 1 and noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tail = (-DECAY).exp();
    let trajectories = (0..n_demos)
        .map(|_| {
            let xi: Vec<[f64; 2]> =
                (0..3).map(|_| [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)]).collect();
            let points = (0..POINT_LEN)
                .map(|k| {
                    if k == POINT_LEN - 1 {
                        return vec![0.0, 0.0];
                    }
                    let u = k as f64 / (POINT_LEN - 1) as f64;
                    let s = ((-DECAY * u).exp() - tail) / (1.0 - tail);
                    let p = shape.path(s);
                    let w = [1.0 - u, (PI * u).sin(), (2.0 * PI * u).sin()];
                    (0..2).map(|j| p[j] + noise * (0..3).map(|m| w[m] * xi[m][j]).sum::<f64>()).collect()
                })
                .collect();
            Trajectory::new(points, POINT_DT)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(trajectories)
}

/// Two periods of the orbit at angular velocity [`CYCLE_OMEGA`] from a random
/// phase, with iid Gaussian point noise of standard deviation `noise`.
pub fn synth_limit_cycle(shape: CycleShape, n_demos: usize, noise: f64, seed: u64) -> Result<Dataset> {
    if n_demos == 0 || !(noise >= 0.0) {
        return Err(Error::InvalidArgument("need n_demos >= 1 and noise >= 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let jitter = Normal::new(0.0, noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = (CYCLE_PERIODS * 2.0 * PI / CYCLE_OMEGA / CYCLE_DT).round() as usize + 1;
    let trajectories = (0..n_demos)
        .map(|_| {
            let phase0 = rng.random_range(-PI..PI);
            let points = (0..n)
                .map(|k| {
                    let p = shape.orbit(phase0 + CYCLE_OMEGA * k as f64 * CYCLE_DT);
                    p.iter().map(|v| v + jitter.sample(&mut rng)).collect()
                })
                .collect();
            Trajectory::new(points, CYCLE_DT)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(trajectories)
}
