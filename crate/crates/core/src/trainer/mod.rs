//! Stochastic maximum-likelihood training.
//!
//! Each iteration draws one trajectory and one stride `s ∈ 1..=s_max`
//! uniformly, evaluates the chain likelihood at that stride and takes one
//! Adam step on the per-point negative log-likelihood over flow and latent
//! parameters jointly. An epoch is as many iterations as there are
//! trajectories.
//!
//! Training log, one line per epoch:
//!
//! ```text
//! epoch=<k> nll=<f64> endpoint=<f64> conditionals=<f64> logdet=<f64> grad_norm=<f64> wall=<seconds>
//! ```
//!
//! `nll` and its three terms are per-point means over the epoch's
//! iterations, negated so that `nll = endpoint + conditionals + logdet`.
//! `grad_norm` is the mean pre-clip gradient norm.

mod adam;
mod init;

pub use adam::{clip_global_norm, Adam};
pub use init::{init_cycle_from_pca_fft, init_linear_from_mean_velocity, INIT_NOISE};

use crate::data::{Dataset, Trajectory};
use crate::error::{Error, Result};
use crate::flows::{FlowConfig, FlowStack};
use crate::latent::{Latent, LatentKind, DEFAULT_MARGIN};
use crate::model::{ImitationModel, Normalizer};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub betas: (f64, f64),
    /// Largest subsampling stride.
    pub s_max: usize,
    pub clip_norm: f64,
    pub seed: u64,
    pub latent: LatentKind,
    /// Stability margin ε of the latent drift; every trajectory of the
    /// noise-free latent contracts at least as fast as `e^{−εt}`.
    pub margin: f64,
    pub flow: FlowConfig,
    /// Relative change between consecutive plateau windows that stops training.
    pub tolerance: f64,
    pub plateau_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            learning_rate: 1e-3,
            betas: (0.9, 0.999),
            s_max: 5,
            clip_norm: 10.0,
            seed: 0,
            latent: LatentKind::Linear,
            margin: DEFAULT_MARGIN,
            flow: FlowConfig::default(),
            tolerance: 1e-5,
            plateau_window: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.epochs == 0 {
            return bad("epochs must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !((0.0..1.0).contains(&self.betas.0) && (0.0..1.0).contains(&self.betas.1)) {
            return bad("moment coefficients must lie in [0, 1)");
        }
        if self.s_max == 0 {
            return bad("s_max must be >= 1");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("stability margin must be positive");
        }
        if !(self.clip_norm > 0.0) {
            return bad("gradient clip norm must be positive");
        }
        if !(self.tolerance >= 0.0) || self.plateau_window == 0 {
            return bad("plateau tolerance must be >= 0 and the window >= 1");
        }
        Ok(())
    }
}

/// Per-point means over one epoch; see the module docs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub nll: f64,
    pub endpoint: f64,
    pub conditionals: f64,
    pub logdet: f64,
    pub grad_norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Budget,
    Plateau,
    /// The loss or its gradient stopped being finite; the returned model is
    /// the last one with a finite loss.
    NonFinite(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub epochs: Vec<EpochRecord>,
    /// Per-point stride-1 NLL of the whole dataset before and after training.
    pub initial_nll: f64,
    pub final_nll: f64,
    pub iterations: usize,
    pub stop: StopReason,
}

impl LossReport {
    pub fn converged(&self) -> bool {
        !matches!(self.stop, StopReason::NonFinite(_))
    }
}

/// Writes training log lines with wall-clock offsets from its creation.
pub struct TrainingLog<W> {
    out: W,
    start: Instant,
}

impl<W: Write> TrainingLog<W> {
    pub fn new(out: W) -> Self {
        TrainingLog { out, start: Instant::now() }
    }

    pub fn record(&mut self, r: &EpochRecord) -> Result<()> {
        writeln!(
            self.out,
            "epoch={} nll={} endpoint={} conditionals={} logdet={} grad_norm={} wall={:.3}",
            r.epoch,
            r.nll,
            r.endpoint,
            r.conditionals,
            r.logdet,
            r.grad_norm,
            self.start.elapsed().as_secs_f64()
        )?;
        Ok(())
    }
}

/// Per-point stride-1 negative log-likelihood of every trajectory together.
pub fn dataset_nll(model: &ImitationModel<f64>, data: &Dataset) -> Result<f64> {
    let mut total = 0.0;
    let mut points = 0usize;
    for t in data.trajectories() {
        let terms = model.log_likelihood(t.points(), 1)?;
        total -= terms.total();
        points += terms.points;
    }
    Ok(total / points as f64)
}

fn check_data(data: &Dataset) -> Result<()> {
    for (i, t) in data.trajectories().iter().enumerate() {
        if t.len() < 2 {
            return Err(Error::InvalidArgument(format!("trajectory {i} has fewer than 2 points")));
        }
        if t.points().iter().all(|p| p == t.start()) {
            return Err(Error::Degenerate(format!("trajectory {i} is constant")));
        }
    }
    Ok(())
}

/// Untrained model: fitted normalizer, identity flow and the latent
/// initialization heuristic for `config.latent` applied to normalized data.
pub fn initial_model<R: Rng + ?Sized>(
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<ImitationModel<f64>> {
    config.validate()?;
    check_data(data)?;
    let normalizer = Normalizer::fit(data, config.latent)?;
    let normalized = data
        .trajectories()
        .iter()
        .map(|t| Trajectory::new(t.points().iter().map(|p| normalizer.apply(p)).collect(), t.dt()))
        .collect::<Result<Vec<_>>>()?;
    let latent = match config.latent {
        LatentKind::Linear => Latent::Linear(init_linear_from_mean_velocity(&normalized, config.margin)?),
        LatentKind::Cycle => Latent::Cycle(init_cycle_from_pca_fft(&normalized, config.margin)?),
    };
    let flow = FlowStack::new(data.dim(), &config.flow, rng)?;
    ImitationModel::new(flow, latent, normalizer, data.dt())
}

/// Errors that end training with the last finite checkpoint instead of
/// propagating.
fn ends_training(e: &Error) -> bool {
    match e {
        Error::AtPoint { source, .. } => ends_training(source),
        Error::NearOrigin { .. } => true,
        e => e.is_numerical(),
    }
}

fn plateaued(history: &[EpochRecord], window: usize, tol: f64) -> bool {
    if history.len() < 2 * window {
        return false;
    }
    let mean = |s: &[EpochRecord]| s.iter().map(|r| r.nll).sum::<f64>() / s.len() as f64;
    let n = history.len();
    let recent = mean(&history[n - window..]);
    let before = mean(&history[n - 2 * window..n - window]);
    (recent - before).abs() <= tol * before.abs().max(1e-12)
}

pub fn train<R: Rng + ?Sized>(
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut R,
) -> Result<(ImitationModel<f64>, LossReport)> {
    train_with(data, config, rng, |_| Ok(()))
}

/// [`train`] with a generator seeded from `config.seed`.
pub fn train_seeded(data: &Dataset, config: &TrainConfig) -> Result<(ImitationModel<f64>, LossReport)> {
    train(data, config, &mut ChaCha8Rng::seed_from_u64(config.seed))
}

/// [`train`], calling `on_epoch` after every completed epoch.
pub fn train_with<R: Rng + ?Sized>(
    data: &Dataset,
    config: &TrainConfig,
    rng: &mut R,
    mut on_epoch: impl FnMut(&EpochRecord) -> Result<()>,
) -> Result<(ImitationModel<f64>, LossReport)> {
    let mut model = initial_model(data, config, rng)?;
    let initial_nll = dataset_nll(&model, data)?;
    let mut params = model.params();
    let mut last_good = params.clone();
    let mut opt = Adam::new(params.len(), config.learning_rate, config.betas);
    let n = data.len();
    let mut history = Vec::new();
    let mut stop = StopReason::Budget;

    'epochs: for epoch in 0..config.epochs {
        let mut acc = [0.0; 5];
        for _ in 0..n {
            let t = &data.trajectories()[rng.random_range(0..n)];
            let s = rng.random_range(1..=config.s_max);
            let (terms, mut grad) = match model.nll_gradient(t.points(), s) {
                Ok(v) => v,
                Err(e) if ends_training(&e) => {
                    stop = StopReason::NonFinite(e.to_string());
                    break 'epochs;
                }
                Err(e) => return Err(e),
            };
            last_good.copy_from_slice(&params);
            let w = 1.0 / terms.points as f64;
            grad.iter_mut().for_each(|g| *g *= w);
            let norm = clip_global_norm(&mut grad, config.clip_norm);
            for (a, v) in acc.iter_mut().zip([-terms.total(), -terms.endpoint, -terms.conditionals, -terms.logdet]) {
                *a += v * w / n as f64;
            }
            acc[4] += norm / n as f64;
            opt.step(&mut params, &grad);
            model = model.with_params(&params)?;
        }
        let record = EpochRecord {
            epoch,
            nll: acc[0],
            endpoint: acc[1],
            conditionals: acc[2],
            logdet: acc[3],
            grad_norm: acc[4],
        };
        log::debug!("epoch {epoch}: nll {:.6} grad_norm {:.3e}", record.nll, record.grad_norm);
        on_epoch(&record)?;
        history.push(record);
        if plateaued(&history, config.plateau_window, config.tolerance) {
            stop = StopReason::Plateau;
            break;
        }
    }

    let mut final_nll = f64::NAN;
    if !matches!(stop, StopReason::NonFinite(_)) {
        match dataset_nll(&model, data) {
            Ok(v) if v.is_finite() => final_nll = v,
            Ok(v) => stop = StopReason::NonFinite(format!("final NLL {v}")),
            Err(e) if ends_training(&e) => stop = StopReason::NonFinite(e.to_string()),
            Err(e) => return Err(e),
        }
    }
    if let StopReason::NonFinite(why) = &stop {
        log::warn!("training aborted ({why}); returning the last finite parameters");
        model = model.with_params(&last_good)?;
        final_nll = dataset_nll(&model, data).unwrap_or(f64::NAN);
    }
    log::info!("training stopped after {} epochs: {stop:?}, nll {initial_nll:.6} -> {final_nll:.6}", history.len());
    let report = LossReport { epochs: history, initial_nll, final_nll, iterations: opt.steps() as usize, stop };
    Ok((model, report))
}

#[cfg(test)]
mod tests;
