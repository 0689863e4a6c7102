//! An imitation model: normalizer, invertible emission map and latent
//! dynamics, with the exact trajectory likelihood and generation through
//! the latent space.

mod field;
mod io;

pub use field::{write_field, GridSpec};
pub use io::{read_model, write_model, MAGIC, VERSION};

use crate::data::{Dataset, Trajectory};
use crate::diffcore::{check_finite_in, ParamLayout, Tape, Var};
use crate::error::{Error, Result};
use crate::flows::FlowStack;
use crate::latent::{DiscreteLatent, Latent, LatentKind};
use crate::scalar::Scalar;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-dimension affine map `x = (y − shift) / scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    shift: Vec<f64>,
    scale: Vec<f64>,
}

impl Normalizer {
    pub fn identity(dim: usize) -> Self {
        Normalizer { shift: vec![0.0; dim], scale: vec![1.0; dim] }
    }

    pub fn new(shift: Vec<f64>, scale: Vec<f64>) -> Result<Self> {
        if shift.len() != scale.len() {
            return Err(Error::dims("Normalizer", format!("{} shifts, {} scales", shift.len(), scale.len())));
        }
        if !scale.iter().all(|s| *s > 0.0 && s.is_finite()) || !shift.iter().all(|s| s.is_finite()) {
            return Err(Error::InvalidArgument("normalizer scales must be positive and finite".into()));
        }
        Ok(Normalizer { shift, scale })
    }

    /// Unit standard deviation per dimension over all points. The shift is the
    /// mean final point for point-to-point data and the centroid for cycles.
    /// Constant dimensions keep scale 1.
    pub fn fit(data: &Dataset, kind: LatentKind) -> Result<Self> {
        let d = data.dim();
        let n = data.points().count() as f64;
        let mut mean = vec![0.0; d];
        for p in data.points() {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v / n;
            }
        }
        let mut var = vec![0.0; d];
        for p in data.points() {
            for j in 0..d {
                var[j] += (p[j] - mean[j]).powi(2) / n;
            }
        }
        let scale = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = v.sqrt();
                if s > 1e-12 * m.abs().max(1.0) {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        let shift = match kind {
            LatentKind::Cycle => mean,
            LatentKind::Linear => {
                let k = data.len() as f64;
                let mut goal = vec![0.0; d];
                for t in data.trajectories() {
                    for (g, v) in goal.iter_mut().zip(t.end()) {
                        *g += v / k;
                    }
                }
                goal
            }
        };
        Normalizer::new(shift, scale)
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn shift(&self) -> &[f64] {
        &self.shift
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn apply<T: Scalar>(&self, y: &[T]) -> Vec<T> {
        y.iter().zip(self.shift.iter().zip(&self.scale)).map(|(&v, (&m, &s))| (v - T::lit(m)) / T::lit(s)).collect()
    }

    pub fn invert<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        x.iter().zip(self.shift.iter().zip(&self.scale)).map(|(&v, (&m, &s))| v * T::lit(s) + T::lit(m)).collect()
    }

    /// `log|det ∂x/∂y| = −Σ ln scale`.
    pub fn log_det(&self) -> f64 {
        -self.scale.iter().map(|s| s.ln()).sum::<f64>()
    }
}

/// Log-likelihood of one trajectory, split by term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LikelihoodTerms<T> {
    /// Stationary log-density of the final latent point.
    pub endpoint: T,
    /// Sum of backward conditional log-densities.
    pub conditionals: T,
    /// Sum of inverse log-determinants (flow and normalizer) over evaluated points.
    pub logdet: T,
    /// Number of evaluated points.
    pub points: usize,
}

impl<T: Scalar> LikelihoodTerms<T> {
    pub fn total(&self) -> T {
        self.endpoint + self.conditionals + self.logdet
    }

    pub fn values(&self) -> LikelihoodTerms<f64> {
        LikelihoodTerms {
            endpoint: self.endpoint.value(),
            conditionals: self.conditionals.value(),
            logdet: self.logdet.value(),
            points: self.points,
        }
    }
}

/// Indices `n−1, n−1−s, …` in ascending order; the stride is clamped to `n − 1`.
pub fn chain_indices(n: usize, stride: usize) -> Result<Vec<usize>> {
    if n < 2 {
        return Err(Error::InvalidArgument("likelihood needs a trajectory of length >= 2".into()));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be >= 1".into()));
    }
    let s = stride.min(n - 1);
    let mut idx: Vec<usize> = (0..).map(|k| k * s).take_while(|&o| o < n).map(|o| n - 1 - o).collect();
    idx.reverse();
    Ok(idx)
}

fn latent_terms<T: Scalar>(disc: &DiscreteLatent<T>, zs: &[Vec<T>], stride: usize) -> Result<(T, T)> {
    let last = zs.len() - 1;
    let endpoint = disc.stationary_log_density(&zs[last]).map_err(|e| Error::at_point(last, e))?;
    let kernel = disc.kernel(stride)?;
    let mut cond = T::zero();
    for j in 0..last {
        cond = cond + kernel.log_density(&zs[j], &zs[j + 1]).map_err(|e| Error::at_point(j, e))?;
    }
    Ok((endpoint, cond))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImitationModel<T> {
    flow: FlowStack<T>,
    latent: Latent<T>,
    normalizer: Normalizer,
    dt: f64,
}

impl<T: Scalar> ImitationModel<T> {
    pub fn new(flow: FlowStack<T>, latent: Latent<T>, normalizer: Normalizer, dt: f64) -> Result<Self> {
        if flow.dim() != latent.dim() || flow.dim() != normalizer.dim() {
            return Err(Error::dims(
                "ImitationModel",
                format!("flow {}, latent {}, normalizer {}", flow.dim(), latent.dim(), normalizer.dim()),
            ));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("sampling interval must be positive, got {dt}")));
        }
        Ok(ImitationModel { flow, latent, normalizer, dt })
    }

    pub fn dim(&self) -> usize {
        self.flow.dim()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn flow(&self) -> &FlowStack<T> {
        &self.flow
    }

    pub fn latent(&self) -> &Latent<T> {
        &self.latent
    }

    pub fn normalizer(&self) -> &Normalizer {
        &self.normalizer
    }

    pub fn num_params(&self) -> usize {
        self.flow.num_params() + self.latent.params().len()
    }

    /// Flow parameters followed by latent parameters.
    pub fn params(&self) -> Vec<T> {
        let mut p = self.flow.params();
        p.extend(self.latent.params());
        p
    }

    pub fn layout(&self) -> ParamLayout {
        let mut l = self.flow.layout();
        l.extend("", &self.latent.layout());
        l
    }

    pub fn with_params<U: Scalar>(&self, params: &[U]) -> Result<ImitationModel<U>> {
        if params.len() != self.num_params() {
            return Err(Error::dims(
                "ImitationModel::with_params",
                format!("{} params for {}", params.len(), self.num_params()),
            ));
        }
        let nf = self.flow.num_params();
        Ok(ImitationModel {
            flow: self.flow.with_params(&params[..nf])?,
            latent: self.latent.with_params(&params[nf..])?,
            normalizer: self.normalizer.clone(),
            dt: self.dt,
        })
    }

    /// Latent point of `y` and `log|det ∂z/∂y|`.
    pub fn to_latent(&self, y: &[T]) -> Result<(Vec<T>, T)> {
        if y.len() != self.dim() {
            return Err(Error::dims(
                "to_latent",
                format!("point of dim {} for a model of dim {}", y.len(), self.dim()),
            ));
        }
        let (z, ld) = self.flow.inverse(&self.normalizer.apply(y))?;
        Ok((z, ld + T::lit(self.normalizer.log_det())))
    }

    pub fn from_latent(&self, z: &[T]) -> Result<Vec<T>> {
        let (x, _) = self.flow.forward(z)?;
        Ok(self.normalizer.invert(&x))
    }

    /// Exact log-likelihood of the strided chain ending at the last point.
    pub fn log_likelihood(&self, points: &[Vec<T>], stride: usize) -> Result<LikelihoodTerms<T>> {
        let idx = chain_indices(points.len(), stride)?;
        let s = if idx.len() > 1 { idx[1] - idx[0] } else { 1 };
        let mut zs = Vec::with_capacity(idx.len());
        let mut logdet = T::zero();
        for &i in &idx {
            let (z, ld) = self.to_latent(&points[i]).map_err(|e| Error::at_point(i, e))?;
            zs.push(z);
            logdet = logdet + ld;
        }
        let disc = self.latent.discretize(self.dt)?;
        let (endpoint, conditionals) = latent_terms(&disc, &zs, s).map_err(|e| remap(e, &idx))?;
        let terms = LikelihoodTerms { endpoint, conditionals, logdet, points: idx.len() };
        if !terms.total().value().is_finite() {
            return Err(Error::NonFinite("log-likelihood".into()));
        }
        Ok(terms)
    }

    /// Observed-space stationary log-density at `y`.
    pub fn stationary_log_density(&self, y: &[T]) -> Result<T> {
        let (z, ld) = self.to_latent(y)?;
        Ok(self.latent.discretize(self.dt)?.stationary_log_density(&z)? + ld)
    }
}

/// Chain-local point indices back to trajectory indices.
fn remap(e: Error, idx: &[usize]) -> Error {
    match e {
        Error::AtPoint { index, source } if index < idx.len() => Error::AtPoint { index: idx[index], source },
        other => other,
    }
}

impl ImitationModel<f64> {
    pub fn log_likelihood_trajectory(&self, t: &Trajectory, stride: usize) -> Result<f64> {
        if t.dim() != self.dim() {
            return Err(Error::dims(
                "log_likelihood",
                format!("trajectory dim {} for model dim {}", t.dim(), self.dim()),
            ));
        }
        Ok(self.log_likelihood(t.points(), stride)?.total())
    }

    /// Terms of the log-likelihood and the gradient of its negation with
    /// respect to [`ImitationModel::params`]. Flow adjoints are propagated by
    /// hand; the latent terms are differentiated on the tape.
    pub fn nll_gradient(&self, points: &[Vec<f64>], stride: usize) -> Result<(LikelihoodTerms<f64>, Vec<f64>)> {
        let idx = chain_indices(points.len(), stride)?;
        let s = if idx.len() > 1 { idx[1] - idx[0] } else { 1 };
        let norm_ld = self.normalizer.log_det();
        let mut zs = Vec::with_capacity(idx.len());
        let mut caches = Vec::with_capacity(idx.len());
        let mut logdet = 0.0;
        for &i in &idx {
            if points[i].len() != self.dim() {
                return Err(Error::dims("log_likelihood", format!("point {i} has dim {}", points[i].len())));
            }
            let x = self.normalizer.apply(&points[i]);
            let (z, ld, cache) = self.flow.inverse_cached(&x).map_err(|e| Error::at_point(i, e))?;
            zs.push(z);
            caches.push(cache);
            logdet += ld + norm_ld;
        }
        let lat_params = self.latent.params();
        let np = lat_params.len();
        let (endpoint, conditionals, g) = Tape::record(|tape| -> Result<(f64, f64, Vec<f64>)> {
            let pv = tape.vars(&lat_params);
            let zv: Vec<Vec<Var>> = zs.iter().map(|z| tape.vars(z)).collect();
            let disc = self.latent.with_params(&pv)?.discretize(self.dt)?;
            let (e, c) = latent_terms(&disc, &zv, s).map_err(|e| remap(e, &idx))?;
            let mut inputs = pv;
            for z in &zv {
                inputs.extend_from_slice(z);
            }
            Ok((e.val(), c.val(), tape.gradient(e + c, &inputs)))
        })
        .ok_or(Error::TapeBusy)??;
        let terms = LikelihoodTerms { endpoint, conditionals, logdet, points: idx.len() };
        if !terms.total().is_finite() {
            return Err(Error::NonFinite("log-likelihood".into()));
        }
        let nf = self.flow.num_params();
        let mut grad = vec![0.0; nf + np];
        let d = self.dim();
        for (j, cache) in caches.iter().enumerate() {
            let gz: Vec<f64> = g[np + j * d..np + (j + 1) * d].iter().map(|v| -v).collect();
            self.flow.inverse_backward(cache, &gz, -1.0, &mut grad[..nf]);
        }
        for (dst, src) in grad[nf..].iter_mut().zip(&g[..np]) {
            *dst = -src;
        }
        check_finite_in(&grad, &self.layout(), "gradient")?;
        Ok((terms, grad))
    }

    /// Rollout from `y0` in latent space, mapped back point by point.
    /// `noise_scale = 0` gives the expected trajectory.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        y0: &[f64],
        n_steps: usize,
        noise_scale: f64,
        rng: &mut R,
    ) -> Result<Trajectory> {
        let (z0, _) = self.to_latent(y0)?;
        let zs = self.latent.rollout(&z0, n_steps, self.dt, noise_scale, rng)?;
        let mut ys = Vec::with_capacity(zs.len());
        ys.push(y0.to_vec());
        for (k, z) in zs.iter().enumerate().skip(1) {
            ys.push(self.from_latent(z).map_err(|e| Error::at_point(k, e))?);
        }
        Trajectory::new(ys, self.dt)
    }

    /// Expected trajectory from the demo's first point over the demo's length.
    pub fn reproduce(&self, demo: &Trajectory) -> Result<Trajectory> {
        self.generate(demo.start(), demo.len() - 1, 0.0, &mut ChaCha8Rng::seed_from_u64(0))
    }

    /// Expected velocity `scale ⊙ J_h(z) f(z)` at observed point `y`.
    pub fn velocity(&self, y: &[f64]) -> Result<Vec<f64>> {
        let (z, _) = self.to_latent(y)?;
        let f = self.latent.drift(&z)?;
        let v = self.flow.jacobian(&z)?.mul_vec(&f)?;
        Ok(v.iter().zip(self.normalizer.scale()).map(|(a, s)| a * s).collect())
    }

    pub fn vector_field(&self, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        points.iter().enumerate().map(|(i, p)| self.velocity(p).map_err(|e| Error::at_point(i, e))).collect()
    }

    /// Image of the latent equilibrium (linear latent only).
    pub fn attractor(&self) -> Result<Vec<f64>> {
        match self.latent {
            Latent::Linear(_) => self.from_latent(&vec![0.0; self.dim()]),
            Latent::Cycle(_) => Err(Error::InvalidArgument("a limit-cycle model has no point attractor".into())),
        }
    }
}

/// Index of the model with the highest stride-1 log-likelihood (lowest index
/// on ties) and every model's log-likelihood.
pub fn classify(t: &Trajectory, models: &[ImitationModel<f64>]) -> Result<(usize, Vec<f64>)> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("classification needs at least one model".into()));
    }
    let lls = models.iter().map(|m| m.log_likelihood_trajectory(t, 1)).collect::<Result<Vec<f64>>>()?;
    let mut best = 0;
    for (k, &ll) in lls.iter().enumerate().skip(1) {
        if ll > lls[best] {
            best = k;
        }
    }
    Ok((best, lls))
}
