use super::{discrete_frechet, dtw, swept_area};
use crate::data::Trajectory;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub index: usize,
    pub dtw: f64,
    pub frechet: f64,
    /// Present for planar data only.
    pub swept_area: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

impl Summary {
    fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let median = if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) };
        Some(Summary { mean: v.iter().sum::<f64>() / n as f64, median })
    }
}

/// Per-demonstration metrics with their mean and median.
///
/// JSON form:
/// `{"rows": [{"index", "dtw", "frechet", "swept_area"}], "dtw": {"mean", "median"}, "frechet": {..}, "swept_area": {..} | null}`
/// where `swept_area` is `null` for non-planar data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
    pub dtw: Summary,
    pub frechet: Summary,
    pub swept_area: Option<Summary>,
}

impl MetricReport {
    /// Compares `reproductions[i]` with `demos[i]`.
    pub fn compute(reproductions: &[Trajectory], demos: &[Trajectory]) -> Result<Self> {
        if reproductions.len() != demos.len() || demos.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "{} reproductions for {} demonstrations",
                reproductions.len(),
                demos.len()
            )));
        }
        let rows = reproductions
            .iter()
            .zip(demos)
            .enumerate()
            .map(|(index, (r, d))| {
                Ok(MetricRow {
                    index,
                    dtw: dtw(r.points(), d.points())?,
                    frechet: discrete_frechet(r.points(), d.points())?,
                    swept_area: if d.dim() == 2 { Some(swept_area(r.points(), d.points())?) } else { None },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let col = |f: fn(&MetricRow) -> Option<f64>| rows.iter().filter_map(f).collect::<Vec<f64>>();
        Ok(MetricReport {
            dtw: Summary::of(&col(|r| Some(r.dtw))).expect("nonempty"),
            frechet: Summary::of(&col(|r| Some(r.frechet))).expect("nonempty"),
            swept_area: Summary::of(&col(|r| r.swept_area)),
            rows,
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{:>8} {:>14} {:>14} {:>14}\n", "demo", "dtw", "frechet", "swept_area");
        let area = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |a| format!("{a:.6e}"));
        for r in &self.rows {
            let _ = writeln!(s, "{:>8} {:>14.6e} {:>14.6e} {:>14}", r.index, r.dtw, r.frechet, area(r.swept_area));
        }
        let _ = writeln!(
            s,
            "{:>8} {:>14.6e} {:>14.6e} {:>14}",
            "mean",
            self.dtw.mean,
            self.frechet.mean,
            area(self.swept_area.map(|a| a.mean))
        );
        let _ = writeln!(
            s,
            "{:>8} {:>14.6e} {:>14.6e} {:>14}",
            "median",
            self.dtw.median,
            self.frechet.median,
            area(self.swept_area.map(|a| a.median))
        );
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metric report serializes")
    }
}
