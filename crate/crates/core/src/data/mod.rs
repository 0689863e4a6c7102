//! Demonstrations: validated trajectories, the plain-text file format, and
//! synthetic generators.
//!
//! File format: a header line `dim=<d> dt=<ΔT>`, then trajectory blocks
//! separated by blank lines, one whitespace-separated point per line. Lines
//! starting with `#` are ignored.

mod synth;

pub use synth::{synth_limit_cycle, synth_point_to_point, CycleShape, PointShape, CYCLE_DT, CYCLE_OMEGA, POINT_DT};

use crate::error::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    points: Vec<Vec<f64>>,
    dt: f64,
}

impl Trajectory {
    /// At least one point, all finite and of one dimension; `dt > 0`.
    pub fn new(points: Vec<Vec<f64>>, dt: f64) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("trajectory has no points".into()));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        let d = points[0].len();
        if d == 0 {
            return Err(Error::InvalidArgument("points must have dim >= 1".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if p.len() != d {
                return Err(Error::dims("Trajectory", format!("point {i} has dim {} (expected {d})", p.len())));
            }
            if !p.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite(format!("trajectory point {i}")));
            }
        }
        Ok(Trajectory { points, dt })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Vec<f64>> {
        self.points
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start(&self) -> &[f64] {
        &self.points[0]
    }

    pub fn end(&self) -> &[f64] {
        &self.points[self.points.len() - 1]
    }

    pub fn duration(&self) -> f64 {
        (self.len() - 1) as f64 * self.dt
    }

    pub fn arc_length(&self) -> f64 {
        self.points.windows(2).map(|w| distance(&w[0], &w[1])).sum()
    }

    /// Linear interpolation onto a uniform grid. The step is adjusted to
    /// `duration / round(duration / new_dt)` so both endpoints are kept exactly.
    pub fn resample(&self, new_dt: f64) -> Result<Trajectory> {
        if self.len() < 2 {
            return Err(Error::InvalidArgument("resampling needs at least two points".into()));
        }
        if !(new_dt > 0.0) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {new_dt}")));
        }
        let intervals = ((self.duration() / new_dt).round() as usize).max(1);
        if intervals == self.len() - 1 {
            return Ok(self.clone());
        }
        let step = self.duration() / intervals as f64;
        let points = (0..=intervals)
            .map(|k| {
                if k == intervals {
                    return self.end().to_vec();
                }
                let pos = (k * (self.len() - 1)) as f64 / intervals as f64;
                let i = (pos.floor() as usize).min(self.len() - 2);
                let w = pos - i as f64;
                lerp(&self.points[i], &self.points[i + 1], w)
            })
            .collect();
        Trajectory::new(points, step)
    }
}

pub(crate) fn lerp(a: &[f64], b: &[f64], w: f64) -> Vec<f64> {
    if w == 0.0 {
        return a.to_vec();
    }
    a.iter().zip(b).map(|(x, y)| x + w * (y - x)).collect()
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Demonstrations sharing one dimension and sampling interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    trajectories: Vec<Trajectory>,
    dim: usize,
    dt: f64,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        let first = trajectories.first().ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
        let (dim, dt) = (first.dim(), first.dt());
        for (i, t) in trajectories.iter().enumerate() {
            if t.dim() != dim {
                return Err(Error::dims("Dataset", format!("trajectory {i} has dim {} (expected {dim})", t.dim())));
            }
            if (t.dt() - dt).abs() > 1e-12 * dt {
                return Err(Error::InvalidArgument(format!("trajectory {i} has dt {} (expected {dt})", t.dt())));
            }
        }
        Ok(Dataset { trajectories, dim, dt })
    }

    pub fn trajectories(&self) -> &[Trajectory] {
        &self.trajectories
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.trajectories.iter().flat_map(|t| t.points().iter())
    }

    /// Per-dimension `(min, max)`.
    pub fn bounding_box(&self) -> Vec<(f64, f64)> {
        let mut bb = vec![(f64::INFINITY, f64::NEG_INFINITY); self.dim];
        for p in self.points() {
            for (b, &v) in bb.iter_mut().zip(p) {
                b.0 = b.0.min(v);
                b.1 = b.1.max(v);
            }
        }
        bb
    }

    /// Diagonal length of the bounding box.
    pub fn diameter(&self) -> f64 {
        self.bounding_box().iter().map(|(lo, hi)| (hi - lo) * (hi - lo)).sum::<f64>().sqrt()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim_start().starts_with('#'));
        let (hline, header) = lines
            .by_ref()
            .find(|(_, l)| !l.trim().is_empty())
            .ok_or_else(|| Error::InvalidArgument("no trajectories".into()))?;
        let (dim, dt) = parse_header(header).map_err(|message| Error::Parse { line: hline + 1, message })?;
        let mut trajectories = Vec::new();
        let mut block: Vec<Vec<f64>> = Vec::new();
        let mut flush = |block: &mut Vec<Vec<f64>>| -> Result<()> {
            if !block.is_empty() {
                trajectories.push(Trajectory::new(std::mem::take(block), dt)?);
            }
            Ok(())
        };
        for (i, line) in lines {
            if line.trim().is_empty() {
                flush(&mut block)?;
                continue;
            }
            let point = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse { line: i + 1, message: format!("{tok:?}: {e}") })
                })
                .collect::<Result<Vec<f64>>>()?;
            if point.len() != dim {
                return Err(Error::Parse {
                    line: i + 1,
                    message: format!("expected {dim} values, found {}", point.len()),
                });
            }
            if !point.iter().all(|v| v.is_finite()) {
                return Err(Error::Parse { line: i + 1, message: "non-finite value".into() });
            }
            block.push(point);
        }
        flush(&mut block)?;
        Dataset::new(trajectories)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::parse(&std::fs::read_to_string(path)?)
    }

    /// Shortest round-trip float formatting.
    pub fn to_text(&self) -> String {
        let mut s = format!("dim={} dt={}\n", self.dim, self.dt);
        for (k, t) in self.trajectories.iter().enumerate() {
            if k > 0 {
                s.push('\n');
            }
            for p in t.points() {
                let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
                let _ = writeln!(s, "{}", row.join(" "));
            }
        }
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }
}

fn parse_header(line: &str) -> std::result::Result<(usize, f64), String> {
    let mut dim = None;
    let mut dt = None;
    for tok in line.split_whitespace() {
        match tok.split_once('=') {
            Some(("dim", v)) => dim = Some(v.parse::<usize>().map_err(|e| format!("dim: {e}"))?),
            Some(("dt", v)) => dt = Some(v.parse::<f64>().map_err(|e| format!("dt: {e}"))?),
            _ => return Err(format!("unexpected header token {tok:?}")),
        }
    }
    match (dim, dt) {
        (Some(d), Some(t)) if d >= 1 && t > 0.0 && t.is_finite() => Ok((d, t)),
        _ => Err("header must be `dim=<d> dt=<dt>` with d >= 1 and dt > 0".into()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO: &str = "dim=2 dt=0.1\n0 0\n1 0.5\n2 1\n\n-1 3.25\n0.125 -7\n";

    #[test]
    fn parse_and_round_trip() {
        let d = Dataset::parse(TWO).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.trajectories()[1].points()[1], vec![0.125, -7.0]);
        assert_eq!(d.to_text(), TWO);
        assert_eq!(Dataset::parse(&d.to_text()).unwrap(), d);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Dataset::parse(""), Err(Error::InvalidArgument(m)) if m.contains("no trajectories")));
        assert!(
            matches!(Dataset::parse("dim=2 dt=0.1\n"), Err(Error::InvalidArgument(m)) if m.contains("no trajectories"))
        );
        match Dataset::parse("dim=2 dt=0.1\n0 0\n1 2 3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(matches!(Dataset::parse("dim=2 dt=0.1\n0 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Dataset::parse("dim=2 dt=0.1\n0 nan\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(Dataset::parse("dim=2\n0 0\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn mixed_dims_rejected() {
        let a = Trajectory::new(vec![vec![0.0, 0.0]], 0.1).unwrap();
        let b = Trajectory::new(vec![vec![0.0, 0.0, 0.0]], 0.1).unwrap();
        assert!(matches!(Dataset::new(vec![a, b]), Err(Error::DimensionMismatch { .. })));
        assert!(Trajectory::new(vec![vec![0.0], vec![0.0, 1.0]], 0.1).is_err());
    }

    #[test]
    fn resample_identity_and_midpoints() {
        let t = Trajectory::new(vec![vec![0.0, 0.0], vec![1.0, 2.0], vec![2.0, 4.0]], 0.2).unwrap();
        assert_eq!(t.resample(0.2).unwrap(), t);
        let h = t.resample(0.1).unwrap();
        assert_eq!(h.len(), 5);
        assert_eq!(h.points()[1], vec![0.5, 1.0]);
        assert_eq!(h.points()[3], vec![1.5, 3.0]);
        assert_eq!(h.end(), t.end());
        assert!(Trajectory::new(vec![vec![0.0]], 0.1).unwrap().resample(0.05).is_err());
    }

    #[test]
    fn sine_down_up_resampling_error_bound() {
        // linear interpolation error ≤ h²/8·max|f''| per pass
        let dt = 0.01;
        let n = 629;
        let t = Trajectory::new((0..n).map(|k| vec![(k as f64 * dt).sin()]).collect(), dt).unwrap();
        let coarse = t.resample(0.05).unwrap();
        let back = coarse.resample(dt).unwrap();
        assert_eq!(back.len(), t.len());
        let bound = coarse.dt() * coarse.dt() / 8.0 + dt * dt / 8.0;
        for (k, (a, b)) in back.points().iter().zip(t.points()).enumerate() {
            assert!((a[0] - b[0]).abs() <= bound + 1e-12, "k={k}");
        }
    }

    #[test]
    fn geometry() {
        let d = Dataset::parse(TWO).unwrap();
        assert_eq!(d.bounding_box(), vec![(-1.0, 2.0), (-7.0, 3.25)]);
        assert!((d.trajectories()[0].arc_length() - 2.0 * 1.25f64.sqrt()).abs() < 1e-12);
    }
}
