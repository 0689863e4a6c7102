use crate::error::{Error, Result};
use std::io::Write;
use std::str::FromStr;

/// Regular grid, one `(lo, hi, count)` per axis. Points are enumerated with
/// the last axis varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridSpec {
    axes: Vec<(f64, f64, usize)>,
}

impl GridSpec {
    pub fn new(axes: Vec<(f64, f64, usize)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::InvalidArgument("grid needs at least one axis".into()));
        }
        for &(lo, hi, n) in &axes {
            if n == 0 || !lo.is_finite() || !hi.is_finite() || hi < lo {
                return Err(Error::InvalidArgument(format!("bad grid axis {lo}:{hi}:{n}")));
            }
        }
        Ok(GridSpec { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.2).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.2).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coord(&self, axis: usize, k: usize) -> f64 {
        let (lo, hi, n) = self.axes[axis];
        if n == 1 {
            lo
        } else {
            lo + (hi - lo) * k as f64 / (n - 1) as f64
        }
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|mut flat| {
                let mut p = vec![0.0; self.dim()];
                for axis in (0..self.dim()).rev() {
                    let n = self.axes[axis].2;
                    p[axis] = self.coord(axis, flat % n);
                    flat /= n;
                }
                p
            })
            .collect()
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `lo:hi:n` per axis, comma-separated.
    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .split(',')
            .map(|part| {
                let f: Vec<&str> = part.trim().split(':').collect();
                let bad = || Error::InvalidArgument(format!("grid axis {part:?} is not lo:hi:n"));
                if f.len() != 3 {
                    return Err(bad());
                }
                Ok((
                    f[0].parse::<f64>().map_err(|_| bad())?,
                    f[1].parse::<f64>().map_err(|_| bad())?,
                    f[2].parse::<usize>().map_err(|_| bad())?,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        GridSpec::new(axes)
    }
}

/// Header `dim=<d> grid=<n₀>x<n₁>…`, then one `x₀ … x_{d−1} v₀ … v_{d−1}` row per point.
pub fn write_field<W: Write>(mut w: W, grid: &GridSpec, points: &[Vec<f64>], velocities: &[Vec<f64>]) -> Result<()> {
    if points.len() != velocities.len() || points.len() != grid.len() {
        return Err(Error::dims("write_field", "one velocity per grid point"));
    }
    let shape: Vec<String> = grid.shape().iter().map(|n| n.to_string()).collect();
    writeln!(w, "dim={} grid={}", grid.dim(), shape.join("x"))?;
    for (p, v) in points.iter().zip(velocities) {
        let row: Vec<String> = p.iter().chain(v).map(|x| format!("{x}")).collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}
