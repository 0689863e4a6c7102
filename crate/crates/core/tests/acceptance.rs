//! End-to-end acceptance suite. Each criterion prints one PASS/FAIL line;
//! the process exits nonzero if any criterion fails.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::time::{Duration, Instant};
use stochflow::data::{
    synth_limit_cycle, synth_point_to_point, CycleShape, Dataset, PointShape, Trajectory, CYCLE_OMEGA,
};
use stochflow::diffcore::{finite_difference_gradient, GradientReport, Matrix};
use stochflow::flows::{FlowConfig, FlowStack};
use stochflow::latent::{Latent, LatentKind, LinearSDE, DEFAULT_MARGIN};
use stochflow::metrics::MetricReport;
use stochflow::model::{classify, ImitationModel, Normalizer};
use stochflow::scalar::norm2;
use stochflow::trainer::{dataset_nll, initial_model, train_seeded, LossReport, TrainConfig};
use stochflow::Flow;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

/// Runs one criterion, prints its line, and returns whether it passed.
fn run(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t0 = Instant::now();
    let out = f();
    let elapsed = t0.elapsed();
    let in_time = budget.is_none_or(|b| elapsed < b);
    let pass = out.pass && in_time;
    let limit = budget.map_or(String::new(), |b| format!(" (limit {} s)", b.as_secs()));
    println!(
        "{} criterion {id:>2} {name}: {} [{:.1} s{limit}]",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64()
    );
    pass
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    norm2(&a.iter().zip(b).map(|(x, y)| x - y).collect::<Vec<_>>())
}

/// Uniform sample from the bounding box scaled by `factor` about its center.
fn sample_box(bb: &[(f64, f64)], factor: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    bb.iter()
        .map(|&(lo, hi)| {
            let (c, h) = (0.5 * (lo + hi), 0.5 * factor * (hi - lo));
            rng.random_range(c - h..c + h)
        })
        .collect()
}

/// Bit pattern of everything a seeded run produces.
fn fingerprint(model: &ImitationModel<f64>, report: &LossReport, extra: &[f64]) -> Vec<u64> {
    let mut bits: Vec<u64> = model.params().iter().map(|v| v.to_bits()).collect();
    for e in &report.epochs {
        bits.extend([e.nll, e.endpoint, e.conditionals, e.logdet, e.grad_norm].map(f64::to_bits));
    }
    bits.extend([report.initial_nll, report.final_nll].map(f64::to_bits));
    bits.extend(extra.iter().map(|v| v.to_bits()));
    bits
}

// ---------------------------------------------------------------- 1

fn diffeomorphism() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut worst_trip, mut worst_ld) = (0.0f64, 0.0f64);
    let stacks_per_dim = 10;
    let points_per_stack = 1000;
    for d in [2usize, 3] {
        for _ in 0..stacks_per_dim {
            let base: Flow = FlowStack::new(d, &FlowConfig::default(), &mut rng).unwrap();
            let params: Vec<f64> = base.params().iter().map(|p| p + rng.random_range(-0.2..0.2)).collect();
            let flow = base.with_params(&params).unwrap();
            for _ in 0..points_per_stack {
                let z: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
                let (y, ld) = flow.forward(&z).unwrap();
                let (back, ld_inv) = flow.inverse(&y).unwrap();
                let scale = norm2(&z).max(1.0);
                worst_trip = worst_trip.max(dist(&z, &back) / scale);
                worst_trip = worst_trip.max((ld + ld_inv).abs() / ld.abs().max(1.0));
                let h = 1e-6;
                let jac = DMatrix::from_fn(d, d, |i, j| {
                    let (mut zp, mut zm) = (z.clone(), z.clone());
                    zp[j] += h;
                    zm[j] -= h;
                    (flow.forward(&zp).unwrap().0[i] - flow.forward(&zm).unwrap().0[i]) / (2.0 * h)
                });
                let ld_fd = jac.determinant().abs().ln();
                worst_ld = worst_ld.max((ld - ld_fd).abs() / ld_fd.abs().max(1.0));
            }
        }
    }
    Outcome::new(
        worst_trip < 1e-9 && worst_ld < 1e-4,
        format!("round trip {worst_trip:.2e} (< 1e-9), logdet rel err {worst_ld:.2e} (< 1e-4)"),
    )
}

// ---------------------------------------------------------------- 2

/// First 20 points of a synthetic demo.
fn length_20(t: &Trajectory) -> Vec<Vec<f64>> {
    t.points()[..20].to_vec()
}

fn gradients() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let flow_cfg = FlowConfig { pairs: 10, hidden_width: 8, hidden_layers: 1, reflections: None };
    let mut worst = 0.0f64;
    for k in 0..10 {
        let (kind, data) = if k % 2 == 0 {
            (LatentKind::Linear, synth_point_to_point(PointShape::Sine, 1, 0.02, k).unwrap())
        } else {
            (LatentKind::Cycle, synth_limit_cycle(CycleShape::Ellipse, 1, 0.02, k).unwrap())
        };
        let points = length_20(&data.trajectories()[0]);
        let cfg = TrainConfig { latent: kind, flow: flow_cfg.clone(), ..TrainConfig::default() };
        let base = initial_model(&data, &cfg, &mut rng).unwrap();
        let nf = base.flow().num_params();
        let params: Vec<f64> = base
            .params()
            .iter()
            .enumerate()
            .map(|(i, p)| p + if i < nf { rng.random_range(-0.3..0.3) } else { rng.random_range(-0.5..0.5) })
            .collect();
        let model = base.with_params(&params).unwrap();
        let stride = 1 + k as usize % 3;
        let (_, analytic) = model.nll_gradient(&points, stride).unwrap();
        let loss = |p: &[f64]| -model.with_params(p).unwrap().log_likelihood(&points, stride).unwrap().total();
        let numeric = finite_difference_gradient(loss, &params, 1e-5);
        worst = worst.max(GradientReport::compare(analytic, numeric).unwrap().max_rel_err);
    }
    Outcome::new(worst < 1e-4, format!("max rel err {worst:.2e} (< 1e-4) over 10 parameter points"))
}

// ---------------------------------------------------------------- 3

fn stationarity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst = 0.0f64;
    let mut systems = 0;
    while systems < 100 {
        let d = 1 + systems % 5;
        let raw: Vec<f64> = (0..LinearSDE::<f64>::num_params_for(d)).map(|_| rng.sample(StandardNormal)).collect();
        let Ok(disc) = LinearSDE::from_raw(d, DEFAULT_MARGIN, &raw).unwrap().discretize(0.05) else {
            continue;
        };
        let cov = disc.stationary_covariance().unwrap();
        let scale = cov.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(disc.fixed_point_residual(&cov) / scale);
        systems += 1;
    }
    let mut worst_scalar = 0.0f64;
    for _ in 0..100 {
        let a: f64 = rng.random_range(-5.0..-0.05);
        let k: f64 = rng.random_range(0.01..2.0);
        let dt: f64 = rng.random_range(0.01..0.2);
        let sde =
            LinearSDE::from_matrices(&Matrix::from_rows(&[&[a]]), &Matrix::from_rows(&[&[k]]), DEFAULT_MARGIN).unwrap();
        let disc = sde.discretize(dt).unwrap();
        let f = disc.transition().as_slice()[0];
        let sigma = disc.noise_covariance().as_slice()[0];
        let closed = sigma / (1.0 - f * f);
        let got = disc.stationary_covariance().unwrap().as_slice()[0];
        worst_scalar = worst_scalar.max((got - closed).abs() / closed);
    }
    Outcome::new(
        worst < 1e-8 && worst_scalar < 1e-12,
        format!("residual {worst:.2e} (< 1e-8) on 100 systems, scalar closed form {worst_scalar:.2e} (< 1e-12)"),
    )
}

// ---------------------------------------------------------------- 4

struct Recovery {
    eig_err: f64,
    nll_err: f64,
    bits: Vec<u64>,
}

fn recovery_run() -> Recovery {
    let a = Matrix::from_rows(&[&[-0.8, 0.0], &[0.5, -1.6]]);
    let k = Matrix::from_rows(&[&[0.1, 0.0], &[0.0, 0.1]]);
    let dt = 0.05;
    let truth = LinearSDE::from_matrices(&a, &k, DEFAULT_MARGIN).unwrap();
    let disc = truth.discretize(dt).unwrap();
    let chol = disc.noise_covariance().cholesky().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trajectories = (0..20)
        .map(|_| {
            let angle: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let mut z = vec![2.0 * angle.cos(), 2.0 * angle.sin()];
            let mut pts = vec![z.clone()];
            for _ in 0..100 {
                let xi: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
                let w = chol.mul_vec(&xi).unwrap();
                z = disc.transition().mul_vec(&z).unwrap().iter().zip(&w).map(|(a, b)| a + b).collect();
                pts.push(z.clone());
            }
            Trajectory::new(pts, dt).unwrap()
        })
        .collect();
    let data = Dataset::new(trajectories).unwrap();
    let true_model = ImitationModel::new(
        FlowStack::from_layers(2, vec![]).unwrap(),
        Latent::Linear(truth),
        Normalizer::identity(2),
        dt,
    )
    .unwrap();
    let true_nll = dataset_nll(&true_model, &data).unwrap();
    let cfg = TrainConfig {
        epochs: 300,
        learning_rate: 5e-3,
        s_max: 5,
        latent: LatentKind::Linear,
        flow: FlowConfig { pairs: 1, hidden_width: 16, hidden_layers: 1, reflections: None },
        seed: 3,
        ..TrainConfig::default()
    };
    let (model, report) = train_seeded(&data, &cfg).unwrap();
    let nll = dataset_nll(&model, &data).unwrap();
    let Latent::Linear(learned) = model.latent() else { unreachable!("linear latent requested") };
    let mut got: Vec<f64> = learned.drift_matrix().eigenvalues().iter().map(|e| e.0).collect();
    got.sort_by(f64::total_cmp);
    let want = [-1.6, -0.8];
    let eig_err = got.iter().zip(want).map(|(g, w)| ((g - w) / w).abs()).fold(0.0, f64::max);
    let nll_err = (nll - true_nll).abs() / true_nll.abs();
    Recovery { eig_err, nll_err, bits: fingerprint(&model, &report, &[nll]) }
}

// ---------------------------------------------------------------- 5, 6, 9

struct SineSuite {
    model: ImitationModel<f64>,
    data: Dataset,
    untrained: ImitationModel<f64>,
    report: LossReport,
}

fn sine_config() -> TrainConfig {
    TrainConfig {
        epochs: 1000,
        learning_rate: 5e-3,
        s_max: 5,
        latent: LatentKind::Linear,
        margin: 0.5,
        flow: FlowConfig { pairs: 4, hidden_width: 32, hidden_layers: 2, reflections: None },
        seed: 7,
        ..TrainConfig::default()
    }
}

fn sine_suite() -> SineSuite {
    let data = synth_point_to_point(PointShape::Sine, 5, 0.02, 1).unwrap();
    let cfg = sine_config();
    // same seed, so this is the model training starts from
    let untrained = initial_model(&data, &cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed)).unwrap();
    let (model, report) = train_seeded(&data, &cfg).unwrap();
    SineSuite { model, data, untrained, report }
}

struct StabilityResult {
    noise_free: usize,
    noisy: usize,
    worst: f64,
    finals: Vec<f64>,
}

fn stability(s: &SineSuite) -> StabilityResult {
    let goal = s.data.trajectories()[0].end().to_vec();
    let diam = s.data.diameter();
    let bb = s.data.bounding_box();
    let horizon = 3 * (s.data.trajectories()[0].len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let mut r = StabilityResult { noise_free: 0, noisy: 0, worst: 0.0, finals: Vec::new() };
    for _ in 0..100 {
        let start = sample_box(&bb, 3.0, &mut rng);
        let calm = s.model.generate(&start, horizon, 0.0, &mut rng).unwrap();
        let d0 = dist(calm.end(), &goal);
        r.worst = r.worst.max(d0 / diam);
        r.noise_free += usize::from(d0 < 0.02 * diam);
        let noisy = s.model.generate(&start, horizon, 1.0, &mut rng).unwrap();
        let d1 = dist(noisy.end(), &goal);
        r.noisy += usize::from(d1 < 0.1 * diam);
        r.finals.extend([d0, d1]);
    }
    r
}

fn reproduction_report(model: &ImitationModel<f64>, data: &Dataset) -> MetricReport {
    let reps: Vec<Trajectory> = data.trajectories().iter().map(|d| model.reproduce(d).unwrap()).collect();
    MetricReport::compute(&reps, data.trajectories()).unwrap()
}

struct ReproductionResult {
    trained: MetricReport,
    untrained: MetricReport,
    arc: f64,
}

fn reproduction(s: &SineSuite) -> ReproductionResult {
    let arc = s.data.trajectories().iter().map(|t| t.arc_length()).sum::<f64>() / s.data.len() as f64;
    ReproductionResult {
        trained: reproduction_report(&s.model, &s.data),
        untrained: reproduction_report(&s.untrained, &s.data),
        arc,
    }
}

fn report_bits(r: &MetricReport) -> Vec<f64> {
    r.rows.iter().flat_map(|row| [row.dtw, row.frechet, row.swept_area.unwrap_or(f64::NAN)]).collect()
}

fn density_mass(model: &ImitationModel<f64>) -> (f64, Vec<(f64, f64)>) {
    let Latent::Linear(lat) = model.latent() else { unreachable!("linear latent requested") };
    let cov = lat.discretize(model.dt()).unwrap().stationary_covariance().unwrap();
    let chol = cov.cholesky().unwrap();
    // observed-space mean and std from stationary samples
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let n = 20_000;
    let samples: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let xi: Vec<f64> = (0..2).map(|_| rng.sample(StandardNormal)).collect();
            model.from_latent(&chol.mul_vec(&xi).unwrap()).unwrap()
        })
        .collect();
    let ranges: Vec<(f64, f64)> = (0..2)
        .map(|i| {
            let mean = samples.iter().map(|p| p[i]).sum::<f64>() / n as f64;
            let var = samples.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / n as f64;
            let sd = var.sqrt();
            (mean - 5.0 * sd, mean + 5.0 * sd)
        })
        .collect();
    let cells = 400;
    let hx = (ranges[0].1 - ranges[0].0) / cells as f64;
    let hy = (ranges[1].1 - ranges[1].0) / cells as f64;
    let mut mass = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let y = [ranges[0].0 + (i as f64 + 0.5) * hx, ranges[1].0 + (j as f64 + 0.5) * hy];
            mass += model.stationary_log_density(&y).unwrap().exp() * hx * hy;
        }
    }
    (mass, ranges)
}

// ---------------------------------------------------------------- 7, 8

fn cycle_config() -> TrainConfig {
    TrainConfig {
        epochs: 500,
        learning_rate: 5e-3,
        latent: LatentKind::Cycle,
        flow: FlowConfig { pairs: 4, hidden_width: 32, hidden_layers: 2, reflections: None },
        seed: 7,
        ..TrainConfig::default()
    }
}

fn train_cycle(shape: CycleShape) -> (ImitationModel<f64>, LossReport, Dataset) {
    let data = synth_limit_cycle(shape, 4, 0.02, 1).unwrap();
    let (model, report) = train_seeded(&data, &cycle_config()).unwrap();
    (model, report, data)
}

struct CycleResult {
    radius_err: f64,
    omega_err: f64,
    bits: Vec<u64>,
}

fn limit_cycle() -> CycleResult {
    let (model, report, data) = train_cycle(CycleShape::Ellipse);
    let Latent::Cycle(c) = model.latent() else { unreachable!("cycle latent requested") };
    let p = c.realized();
    let bb = data.bounding_box();
    let horizon = 10 * (data.trajectories()[0].len() - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let mut radius_err = 0.0f64;
    let mut finals = Vec::new();
    for _ in 0..20 {
        let start = sample_box(&bb, 3.0, &mut rng);
        let t = model.generate(&start, horizon, 0.0, &mut rng).unwrap();
        let (z, _) = model.to_latent(t.end()).unwrap();
        let rho = z[0].hypot(z[1]);
        radius_err = radius_err.max((rho - p.radius).abs() / p.radius);
        finals.push(rho);
    }
    let omega_err = (p.angular_velocity - CYCLE_OMEGA).abs() / CYCLE_OMEGA;
    CycleResult { radius_err, omega_err, bits: fingerprint(&model, &report, &finals) }
}

struct ClassifyResult {
    correct: usize,
    total: usize,
    bits: Vec<u64>,
}

fn classification() -> ClassifyResult {
    let shapes = [CycleShape::Circle, CycleShape::Lissajous];
    let trained: Vec<_> = shapes.iter().map(|&s| train_cycle(s)).collect();
    let models: Vec<ImitationModel<f64>> = trained.iter().map(|(m, _, _)| m.clone()).collect();
    let mut bits = Vec::new();
    for (m, r, _) in &trained {
        bits.extend(fingerprint(m, r, &[]));
    }
    let (mut correct, mut total) = (0, 0);
    for (label, &shape) in shapes.iter().enumerate() {
        let held_out = synth_limit_cycle(shape, 10, 0.02, 1000 + label as u64).unwrap();
        for t in held_out.trajectories() {
            let (pred, scores) = classify(t, &models).unwrap();
            bits.extend(scores.iter().map(|s| s.to_bits()));
            correct += usize::from(pred == label);
            total += 1;
        }
    }
    ClassifyResult { correct, total, bits }
}

// ---------------------------------------------------------------- driver

/// Criteria 4 to 8 from scratch; returns their outcomes and a bit pattern.
struct Suite {
    recovery: Recovery,
    sine_bits: Vec<u64>,
    stability: StabilityResult,
    reproduction: ReproductionResult,
    sine: SineSuite,
    cycle: CycleResult,
    classify: ClassifyResult,
    times: [Duration; 4],
}

fn run_suite() -> Suite {
    let t = Instant::now();
    let recovery = recovery_run();
    let t_rec = t.elapsed();
    let t = Instant::now();
    let sine = sine_suite();
    let t_sine = t.elapsed();
    let stability = stability(&sine);
    let reproduction = reproduction(&sine);
    let mut extra = stability.finals.clone();
    extra.extend(report_bits(&reproduction.trained));
    extra.extend(report_bits(&reproduction.untrained));
    let sine_bits = fingerprint(&sine.model, &sine.report, &extra);
    let t = Instant::now();
    let cycle = limit_cycle();
    let t_cycle = t.elapsed();
    let t = Instant::now();
    let classify = classification();
    let t_class = t.elapsed();
    Suite {
        recovery,
        sine_bits,
        stability,
        reproduction,
        sine,
        cycle,
        classify,
        times: [t_rec, t_sine, t_cycle, t_class],
    }
}

fn main() {
    let mut all = true;
    all &= run(1, "diffeomorphism", Some(Duration::from_secs(60)), diffeomorphism);
    all &= run(2, "gradients", Some(Duration::from_secs(120)), gradients);
    all &= run(3, "stationarity", None, stationarity);

    let suite = run_suite();
    let [t_rec, t_sine, t_cycle, t_class] = suite.times;
    let within = |t: Duration, secs: u64| t < Duration::from_secs(secs);

    all &= run(4, "synthetic recovery", None, || {
        let r = &suite.recovery;
        Outcome::new(
            r.eig_err < 0.2 && r.nll_err < 0.02 && within(t_rec, 300),
            format!(
                "eigenvalue rel err {:.3} (< 0.2), NLL rel diff {:.4} (< 0.02), train {:.1} s (< 300)",
                r.eig_err,
                r.nll_err,
                t_rec.as_secs_f64()
            ),
        )
    });
    all &= run(5, "stability", None, || {
        let s = &suite.stability;
        Outcome::new(
            s.noise_free >= 100 && s.noisy >= 95 && within(t_sine, 600),
            format!(
                "noise-free {}/100 (worst {:.4} of diameter), noisy {}/100 (>= 95), train {:.1} s (< 600)",
                s.noise_free,
                s.worst,
                s.noisy,
                t_sine.as_secs_f64()
            ),
        )
    });
    all &= run(6, "reproduction", None, || {
        let r = &suite.reproduction;
        let (a, b) = (&r.trained, &r.untrained);
        let (sa, sb) = (a.swept_area.as_ref().unwrap().mean, b.swept_area.as_ref().unwrap().mean);
        let improves = a.dtw.mean < b.dtw.mean && a.frechet.mean < b.frechet.mean && sa < sb;
        let ratio = a.dtw.mean / r.arc;
        Outcome::new(
            ratio < 0.05 && improves,
            format!(
                "DTW/arc {ratio:.4} (< 0.05); trained vs untrained DTW {:.4}/{:.4}, Frechet {:.4}/{:.4}, swept {:.4}/{:.4}",
                a.dtw.mean, b.dtw.mean, a.frechet.mean, b.frechet.mean, sa, sb
            ),
        )
    });
    all &= run(7, "limit cycle", None, || {
        let c = &suite.cycle;
        Outcome::new(
            c.radius_err < 0.05 && c.omega_err < 0.1 && within(t_cycle, 600),
            format!(
                "radius rel err {:.4} (< 0.05), angular velocity rel err {:.4} (< 0.1), {:.1} s (< 600)",
                c.radius_err,
                c.omega_err,
                t_cycle.as_secs_f64()
            ),
        )
    });
    all &= run(8, "classification", None, || {
        let c = &suite.classify;
        Outcome::new(
            c.correct >= 18,
            format!("{}/{} held-out correct (>= 18), {:.1} s", c.correct, c.total, t_class.as_secs_f64()),
        )
    });
    all &= run(9, "density normalization", Some(Duration::from_secs(60)), || {
        let (mass, ranges) = density_mass(&suite.sine.model);
        Outcome::new(
            (mass - 1.0).abs() < 0.05,
            format!(
                "mass {mass:.4} (1 +- 0.05) over [{:.2}, {:.2}] x [{:.2}, {:.2}]",
                ranges[0].0, ranges[0].1, ranges[1].0, ranges[1].1
            ),
        )
    });
    all &= run(10, "determinism", None, || {
        let again = run_suite();
        let same = [
            again.recovery.bits == suite.recovery.bits,
            again.sine_bits == suite.sine_bits,
            again.cycle.bits == suite.cycle.bits,
            again.classify.bits == suite.classify.bits,
        ];
        let n_same = same.iter().filter(|&&s| s).count();
        Outcome::new(n_same == 4, format!("{n_same}/4 seeded suites bit-identical on rerun"))
    });

    if !all {
        eprintln!("acceptance: at least one criterion failed");
        std::process::exit(1);
    }
}
