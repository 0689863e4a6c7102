//! Trajectory similarity: dynamic time warping, discrete Fréchet distance
//! and swept-area error.

mod report;

pub use report::{MetricReport, MetricRow, Summary};

use crate::data::{distance, lerp};
use crate::error::{Error, Result};

fn check_pair(op: &'static str, a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument(format!("{op} of an empty trajectory")));
    }
    let d = a[0].len();
    if a.iter().chain(b).any(|p| p.len() != d) {
        return Err(Error::dims(op, "points of different dimension"));
    }
    Ok(())
}

/// Cost and step count of the cheapest monotone alignment matching both
/// first and both last points; equal costs prefer fewer steps.
pub fn dtw_alignment(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<(f64, usize)> {
    check_pair("dtw", a, b)?;
    let (n, m) = (a.len(), b.len());
    let mut acc = vec![(f64::INFINITY, 0usize); n * m];
    for i in 0..n {
        for j in 0..m {
            let c = distance(&a[i], &b[j]);
            let prev = if i == 0 && j == 0 {
                (0.0, 0)
            } else {
                let mut best = (f64::INFINITY, usize::MAX);
                for (pi, pj) in [(i.wrapping_sub(1), j.wrapping_sub(1)), (i.wrapping_sub(1), j), (i, j.wrapping_sub(1))]
                {
                    if pi < n && pj < m {
                        let cand = acc[pi * m + pj];
                        if cand.0 < best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                            best = cand;
                        }
                    }
                }
                best
            };
            acc[i * m + j] = (prev.0 + c, prev.1 + 1);
        }
    }
    Ok(acc[n * m - 1])
}

/// Alignment cost divided by the number of aligned pairs.
pub fn dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    let (cost, len) = dtw_alignment(a, b)?;
    Ok(cost / len as f64)
}

/// Smallest achievable maximum pointwise distance over monotone couplings.
pub fn discrete_frechet(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<f64> {
    check_pair("discrete_frechet", a, b)?;
    let m = b.len();
    let mut prev = vec![0.0f64; m];
    let mut cur = vec![0.0f64; m];
    for (i, p) in a.iter().enumerate() {
        for j in 0..m {
            let d = distance(p, &b[j]);
            cur[j] = match (i, j) {
                (0, 0) => d,
                (0, _) => cur[j - 1].max(d),
                (_, 0) => prev[0].max(d),
                _ => prev[j].min(prev[j - 1]).min(cur[j - 1]).max(d),
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m - 1])
}

/// `m` points spaced uniformly in arc length along the polyline, endpoints
/// included. A polyline of zero length yields `m` copies of its start.
pub fn resample_by_arc_length(points: &[Vec<f64>], m: usize) -> Result<Vec<Vec<f64>>> {
    if points.is_empty() || m == 0 {
        return Err(Error::InvalidArgument("arc-length resampling needs points and a positive count".into()));
    }
    let mut cum = vec![0.0];
    for w in points.windows(2) {
        cum.push(cum.last().unwrap() + distance(&w[0], &w[1]));
    }
    let total = *cum.last().unwrap();
    if m == 1 || !(total > 0.0) {
        return Ok(vec![points[0].clone(); m]);
    }
    let mut out = Vec::with_capacity(m);
    let mut seg = 0;
    for k in 0..m {
        if k == m - 1 {
            out.push(points[points.len() - 1].clone());
            break;
        }
        let s = total * k as f64 / (m - 1) as f64;
        while seg + 1 < points.len() - 1 && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let w = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        out.push(lerp(&points[seg], &points[seg + 1], w));
    }
    Ok(out)
}

fn triangle_area(p: &[f64], q: &[f64], r: &[f64]) -> f64 {
    0.5 * (p[0] * (q[1] - r[1]) + q[0] * (r[1] - p[1]) + r[0] * (p[1] - q[1])).abs()
}

/// Area between a planar reproduction and a demonstration.
///
/// A reproduction with a different point count is resampled uniformly in arc
/// length to the demo's count. The reproduction is traversed in whichever direction starts nearer the demo's first
/// point. Each index step contributes the quadrilateral
/// `(demo_i, demo_{i+1}, rep_{i+1}, rep_i)` as two shoelace triangles.
pub fn swept_area(reproduced: &[Vec<f64>], demo: &[Vec<f64>]) -> Result<f64> {
    check_pair("swept_area", reproduced, demo)?;
    if demo[0].len() != 2 {
        return Err(Error::dims("swept_area", format!("planar trajectories only, got dim {}", demo[0].len())));
    }
    if demo.len() < 2 || reproduced.len() < 2 {
        return Err(Error::InvalidArgument("swept area needs trajectories of length >= 2".into()));
    }
    let mut rep = if reproduced.len() == demo.len() {
        reproduced.to_vec()
    } else {
        resample_by_arc_length(reproduced, demo.len())?
    };
    if distance(&rep[rep.len() - 1], &demo[0]) < distance(&rep[0], &demo[0]) {
        rep.reverse();
    }
    let mut area = 0.0;
    for i in 0..demo.len() - 1 {
        area += triangle_area(&demo[i], &demo[i + 1], &rep[i + 1]);
        area += triangle_area(&demo[i], &rep[i + 1], &rep[i]);
    }
    Ok(area)
}
