use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::ops::Range;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub range: Range<usize>,
}

/// Named contiguous slices covering a flat parameter vector.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamLayout {
    groups: Vec<ParamGroup>,
}

impl ParamLayout {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append a group of `len` parameters after the existing ones.
    pub fn push(&mut self, name: impl Into<String>, len: usize) -> Range<usize> {
        let start = self.len();
        let range = start..start + len;
        self.groups.push(ParamGroup { name: name.into(), range: range.clone() });
        range
    }

    /// Append all groups of `other`, prefixing their names.
    pub fn extend(&mut self, prefix: &str, other: &ParamLayout) {
        for g in &other.groups {
            self.push(format!("{prefix}{}", g.name), g.range.len());
        }
    }

    pub fn len(&self) -> usize {
        self.groups.last().map_or(0, |g| g.range.end)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub fn group_of(&self, index: usize) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.range.contains(&index))
    }

    pub fn get(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// Disjoint, ordered, gap-free.
    pub fn is_consistent(&self) -> bool {
        let mut end = 0;
        for g in &self.groups {
            if g.range.start != end || g.range.end < g.range.start {
                return false;
            }
            end = g.range.end;
        }
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    pub values: Vec<f64>,
    pub layout: ParamLayout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: ParamLayout) -> Result<Self> {
        if !layout.is_consistent() || layout.len() != values.len() {
            return Err(Error::dims(
                "ParamVector::new",
                format!("{} values for a layout of {}", values.len(), layout.len()),
            ));
        }
        Ok(ParamVector { values, layout })
    }

    /// A single anonymous group.
    pub fn flat(values: Vec<f64>) -> Self {
        let mut layout = ParamLayout::new();
        layout.push("params", values.len());
        ParamVector { values, layout }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.layout.get(name).map(|g| &self.values[g.range.clone()])
    }

    /// Fail with the offending group if any value is non-finite.
    pub fn check_finite(&self, what: &str) -> Result<()> {
        check_finite_in(&self.values, &self.layout, what)
    }
}

pub(crate) fn check_finite_in(values: &[f64], layout: &ParamLayout, what: &str) -> Result<()> {
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        let group = layout.group_of(i).map_or("<unknown>", |g| g.name.as_str());
        return Err(Error::NonFinite(format!("{what} of parameter group `{group}` (index {i})")));
    }
    Ok(())
}

/// Analytic vs numeric gradient comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradientReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub max_rel_err: f64,
}

impl GradientReport {
    /// Per-coordinate error `|a − n| / max(|a|, |n|, 1e-3·max(‖n‖∞, 1))`;
    /// coordinates far below the gradient's own scale are judged against it.
    pub fn compare(analytic: Vec<f64>, numeric: Vec<f64>) -> Result<Self> {
        if analytic.len() != numeric.len() {
            return Err(Error::dims("GradientReport", format!("{} vs {}", analytic.len(), numeric.len())));
        }
        let scale = numeric.iter().fold(0.0f64, |m, x| m.max(x.abs())).max(1.0);
        let floor = 1e-3 * scale;
        let max_rel_err = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
            .fold(0.0, f64::max);
        Ok(GradientReport { analytic, numeric, max_rel_err })
    }
}

/// Exact reverse-mode gradient of a scalar loss written against [`Var`].
/// Returns the loss value and its gradient.
pub fn gradient<F>(loss: F, at: &ParamVector) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&[Var]) -> Result<Var>,
{
    let (value, grad) = Tape::record(|tape| -> Result<(f64, Vec<f64>)> {
        let inputs = tape.vars(&at.values);
        let out = loss(&inputs)?;
        Ok((out.val(), tape.gradient(out, &inputs)))
    })
    .ok_or(Error::TapeBusy)??;
    if !value.is_finite() {
        return Err(Error::NonFinite("loss value".into()));
    }
    check_finite_in(&grad, &at.layout, "gradient")?;
    Ok((value, grad))
}

/// Central differences, one coordinate at a time.
pub fn finite_difference_gradient(loss: impl Fn(&[f64]) -> f64, at: &[f64], step: f64) -> Vec<f64> {
    assert!(step > 0.0, "finite-difference step must be positive");
    let mut x = at.to_vec();
    (0..at.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + step;
            let fp = loss(&x);
            x[i] = orig - step;
            let fm = loss(&x);
            x[i] = orig;
            (fp - fm) / (2.0 * step)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Scalar;
    use num_traits::Float;

    #[test]
    fn half_square_norm_gradient_is_identity() {
        let p = ParamVector::flat(vec![1.0, -2.0, 0.5]);
        let (v, g) = gradient(|x| Ok(x.iter().map(|&a| a * a).sum::<Var>() * Var::lit(0.5)), &p).unwrap();
        assert!((v - 2.625).abs() < 1e-15);
        assert_eq!(g, p.values);
    }

    #[test]
    fn constant_loss_has_zero_gradient() {
        let p = ParamVector::flat(vec![3.0, 4.0]);
        let (_, g) = gradient(|_| Ok(Var::lit(7.0)), &p).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn non_finite_gradient_names_group() {
        let mut layout = ParamLayout::new();
        layout.push("good", 1);
        layout.push("bad", 1);
        let p = ParamVector::new(vec![1.0, 0.0], layout).unwrap();
        let err = gradient(|x| Ok(x[0] + x[1].sqrt()), &p).unwrap_err();
        assert!(err.to_string().contains("`bad`"), "{err}");
    }

    #[test]
    fn finite_differences_examples() {
        let quad = |p: &[f64]| 0.5 * p.iter().map(|x| x * x).sum::<f64>();
        let g = finite_difference_gradient(quad, &[1.0, -3.0], 1e-5);
        assert!((g[0] - 1.0).abs() < 1e-8 && (g[1] + 3.0).abs() < 1e-8);
        let g = finite_difference_gradient(|p| p[0] * p[1], &[2.0, 3.0], 1e-5);
        assert!((g[0] - 3.0).abs() < 1e-9 && (g[1] - 2.0).abs() < 1e-9);
        let g = finite_difference_gradient(|p| p[0].exp(), &[0.0], 1e-5);
        assert!((g[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn layout_consistency() {
        let mut l = ParamLayout::new();
        l.push("a", 2);
        l.push("b", 3);
        assert!(l.is_consistent());
        assert_eq!(l.len(), 5);
        assert_eq!(l.group_of(3).unwrap().name, "b");
        assert!(ParamVector::new(vec![0.0; 4], l).is_err());
    }

    #[test]
    fn report_uses_scale_floor() {
        let r = GradientReport::compare(vec![10.0, 1e-9], vec![10.0, 0.0]).unwrap();
        assert!(r.max_rel_err < 1e-6);
        let r = GradientReport::compare(vec![1.0], vec![1.1]).unwrap();
        assert!((r.max_rel_err - 0.1 / 1.1).abs() < 1e-12);
    }
}
