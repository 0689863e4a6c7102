//! Data-driven starting points for the latent dynamics.

use crate::data::{distance, Trajectory};
use crate::error::{Error, Result};
use crate::latent::{CycleParams, LimitCycleSDE, LinearSDE};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Diffusion scale every initialization starts from.
pub const INIT_NOISE: f64 = 0.1;

fn check_nonempty(trajectories: &[Trajectory]) -> Result<usize> {
    let Some(first) = trajectories.first() else {
        return Err(Error::InvalidArgument("initialization needs at least one trajectory".into()));
    };
    let d = first.dim();
    if trajectories.iter().any(|t| t.dim() != d) {
        return Err(Error::dims("initialization", "trajectories of mixed dimension"));
    }
    Ok(d)
}

/// `A = −(mean speed / mean start distance to the goal)·I`, `K = 0.1·I`.
/// The goal is the mean final point. Speeds come from forward differences.
/// The rate is floored at twice the stability `margin`.
pub fn init_linear_from_mean_velocity(trajectories: &[Trajectory], margin: f64) -> Result<LinearSDE<f64>> {
    let d = check_nonempty(trajectories)?;
    if trajectories.iter().any(|t| t.len() < 2) {
        return Err(Error::InvalidArgument("mean velocity needs trajectories of length >= 2".into()));
    }
    let k = trajectories.len() as f64;
    let mut goal = vec![0.0; d];
    for t in trajectories {
        for (g, v) in goal.iter_mut().zip(t.end()) {
            *g += v / k;
        }
    }
    let mut speed_sum = 0.0;
    let mut speed_count = 0usize;
    for t in trajectories {
        for w in t.points().windows(2) {
            speed_sum += distance(&w[0], &w[1]) / t.dt();
            speed_count += 1;
        }
    }
    let mean_speed = speed_sum / speed_count as f64;
    let mean_dist = trajectories.iter().map(|t| distance(t.start(), &goal)).sum::<f64>() / k;
    if !(mean_dist > 1e-12) {
        return Err(Error::Degenerate("demonstrations start at the goal".into()));
    }
    let rate = (mean_speed / mean_dist).max(2.0 * margin);
    LinearSDE::isotropic(d, rate, INIT_NOISE, margin)
}

/// Mean of all points and the leading principal direction.
fn principal_axis(trajectories: &[Trajectory], d: usize) -> (Vec<f64>, Vec<f64>) {
    let pts: Vec<&Vec<f64>> = trajectories.iter().flat_map(|t| t.points()).collect();
    let n = pts.len() as f64;
    let mut c = vec![0.0; d];
    for p in &pts {
        for (m, v) in c.iter_mut().zip(p.iter()) {
            *m += v / n;
        }
    }
    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for p in &pts {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (p[i] - c[i]) * (p[j] - c[j]) / n;
            }
        }
    }
    let eig = cov.symmetric_eigen();
    let top = eig.eigenvalues.imax();
    (c, eig.eigenvectors.column(top).iter().copied().collect())
}

/// Dominant nonzero frequency (Hz) of a real series, or `None` when the
/// strongest bin is the zero-frequency one.
fn dominant_frequency(series: &[f64], dt: f64) -> Option<f64> {
    let n = series.len();
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mags: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm()).collect();
    let peak = mags.iter().copied().fold(0.0, f64::max);
    let scale = series.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if !(peak > 1e-12 * scale.max(1e-300) * n as f64) {
        return None;
    }
    let k = mags.iter().position(|&m| m == peak)?;
    (k > 0).then(|| k as f64 / (n as f64 * dt))
}

/// Limit cycle seeded from the data: the angular velocity is 2π times the
/// dominant frequency of the projection onto the first principal component
/// (averaged over trajectories, signed by the mean turning direction in the
/// first coordinate plane); the radius is the mean distance of points from
/// their centroid in that plane; `a = −1`; both noise levels 0.1.
pub fn init_cycle_from_pca_fft(trajectories: &[Trajectory], margin: f64) -> Result<LimitCycleSDE<f64>> {
    let d = check_nonempty(trajectories)?;
    if d < 2 {
        return Err(Error::InvalidArgument("limit cycle needs dim >= 2".into()));
    }
    if trajectories.iter().any(|t| t.len() < 8) {
        return Err(Error::InvalidArgument("frequency estimation needs trajectories of length >= 8".into()));
    }
    let (c, axis) = principal_axis(trajectories, d);
    let mut freq = 0.0;
    for t in trajectories {
        let proj: Vec<f64> =
            t.points().iter().map(|p| p.iter().zip(&c).zip(&axis).map(|((x, m), a)| (x - m) * a).sum()).collect();
        freq += dominant_frequency(&proj, t.dt()).ok_or_else(|| Error::Degenerate("no oscillation detected".into()))?;
    }
    freq /= trajectories.len() as f64;

    let mut turning = 0.0;
    let mut radius = 0.0;
    let mut count = 0usize;
    for t in trajectories {
        for (i, p) in t.points().iter().enumerate() {
            let (x, y) = (p[0] - c[0], p[1] - c[1]);
            radius += x.hypot(y);
            count += 1;
            if let Some(q) = t.points().get(i + 1) {
                turning += x * (q[1] - p[1]) - y * (q[0] - p[0]);
            }
        }
    }
    radius /= count as f64;
    if !(radius > 1e-12) {
        return Err(Error::Degenerate("points collapse onto their centroid".into()));
    }
    let omega = 2.0 * std::f64::consts::PI * freq;
    let params = CycleParams {
        rate: -1.0,
        angular_velocity: if turning < 0.0 { -omega } else { omega },
        radius,
        radial_noise: INIT_NOISE,
        phase_noise: INIT_NOISE,
    };
    LimitCycleSDE::new(d, params, None, margin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::DEFAULT_MARGIN;
    use std::f64::consts::PI;

    fn traj(points: Vec<Vec<f64>>, dt: f64) -> Trajectory {
        Trajectory::new(points, dt).unwrap()
    }

    fn circle(omega: f64, dt: f64, n: usize, r: f64, phase: f64) -> Trajectory {
        let pts = (0..n).map(|k| {
            let a = phase + omega * k as f64 * dt;
            vec![r * a.cos(), r * a.sin()]
        });
        traj(pts.collect(), dt)
    }

    #[test]
    fn unit_speed_line_gives_unit_rate() {
        // 11 points from (1, 0) to the origin at speed 1
        let t = traj((0..=10).map(|k| vec![1.0 - 0.1 * k as f64, 0.0]).collect(), 0.1);
        let sde = init_linear_from_mean_velocity(std::slice::from_ref(&t), DEFAULT_MARGIN).unwrap();
        let a = sde.drift_matrix();
        assert!((a[(0, 0)] + 1.0).abs() < 1e-9 && (a[(1, 1)] + 1.0).abs() < 1e-9);
        assert!(a[(0, 1)].abs() < 1e-12 && a[(1, 0)].abs() < 1e-12);
        let k = sde.diffusion();
        assert!((k[(0, 0)] - INIT_NOISE).abs() < 1e-12 && k[(0, 1)].abs() < 1e-12);
        let twice = init_linear_from_mean_velocity(&[t.clone(), t], DEFAULT_MARGIN).unwrap();
        assert_eq!(twice.params(), sde.params());
    }

    #[test]
    fn stationary_demo_is_degenerate() {
        let t = traj(vec![vec![0.5, 0.5]; 5], 0.1);
        assert!(matches!(init_linear_from_mean_velocity(&[t], DEFAULT_MARGIN), Err(Error::Degenerate(_))));
        let single = traj(vec![vec![0.5, 0.5]], 0.1);
        assert!(init_linear_from_mean_velocity(&[single], DEFAULT_MARGIN).is_err());
    }

    /// Direct DFT, the frequency-bin oracle.
    fn dft_peak(series: &[f64], dt: f64) -> f64 {
        let n = series.len();
        let mag = |k: usize| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, x) in series.iter().enumerate() {
                let a = -2.0 * PI * (k * j) as f64 / n as f64;
                re += x * a.cos();
                im += x * a.sin();
            }
            re.hypot(im)
        };
        let k = (1..=n / 2).max_by(|a, b| mag(*a).total_cmp(&mag(*b))).unwrap();
        k as f64 / (n as f64 * dt)
    }

    #[test]
    fn circle_frequency_within_one_bin() {
        for (omega, dt, n) in [(PI, 0.05, 81), (2.5, 0.02, 300), (-4.0, 0.05, 64)] {
            let t = circle(omega, dt, n, 1.0, 0.3);
            let sde = init_cycle_from_pca_fft(std::slice::from_ref(&t), DEFAULT_MARGIN).unwrap();
            let bin = 2.0 * PI / (n as f64 * dt);
            let b = sde.realized().angular_velocity;
            assert!((b - omega).abs() <= bin, "omega {omega}: b {b}, bin {bin}");
            let (c, axis) = principal_axis(std::slice::from_ref(&t), 2);
            let proj: Vec<f64> = t.points().iter().map(|p| (p[0] - c[0]) * axis[0] + (p[1] - c[1]) * axis[1]).collect();
            assert!((b.abs() - 2.0 * PI * dft_peak(&proj, dt)).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_circle_radius_and_defaults() {
        // whole number of periods so the centroid is the center
        let t = circle(PI, 0.05, 80, 1.0, 0.0);
        let p = init_cycle_from_pca_fft(&[t], DEFAULT_MARGIN).unwrap().realized();
        assert!((p.radius - 1.0).abs() < 1e-6, "{}", p.radius);
        assert!((p.rate + 1.0).abs() < 1e-9);
        assert!((p.radial_noise - INIT_NOISE).abs() < 1e-9 && (p.phase_noise - INIT_NOISE).abs() < 1e-9);
    }

    #[test]
    fn constant_or_short_data_is_rejected() {
        let flat = traj(vec![vec![1.0, 2.0]; 20], 0.05);
        assert!(matches!(init_cycle_from_pca_fft(&[flat], DEFAULT_MARGIN), Err(Error::Degenerate(_))));
        let short = circle(PI, 0.05, 5, 1.0, 0.0);
        assert!(init_cycle_from_pca_fft(&[short], DEFAULT_MARGIN).is_err());
    }
}
