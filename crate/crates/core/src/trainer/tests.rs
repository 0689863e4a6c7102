use super::*;
use crate::data::{synth_limit_cycle, synth_point_to_point, CycleShape, PointShape};

fn small(latent: LatentKind, epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        learning_rate: 5e-3,
        latent,
        flow: FlowConfig { pairs: 2, hidden_width: 8, hidden_layers: 1, reflections: None },
        ..TrainConfig::default()
    }
}

#[test]
fn config_validation() {
    assert!(TrainConfig::default().validate().is_ok());
    for c in [
        TrainConfig { epochs: 0, ..TrainConfig::default() },
        TrainConfig { learning_rate: 0.0, ..TrainConfig::default() },
        TrainConfig { s_max: 0, ..TrainConfig::default() },
        TrainConfig { betas: (1.0, 0.999), ..TrainConfig::default() },
        TrainConfig { clip_norm: -1.0, ..TrainConfig::default() },
    ] {
        assert!(c.validate().is_err(), "{c:?}");
    }
}

#[test]
fn minimal_input_trains() {
    let data = Dataset::new(vec![Trajectory::new(vec![vec![1.0, 0.5], vec![0.0, 0.0]], 0.1).unwrap()]).unwrap();
    let (model, report) = train_seeded(&data, &small(LatentKind::Linear, 5)).unwrap();
    assert!(report.converged());
    assert!(report.initial_nll.is_finite() && report.final_nll.is_finite());
    assert_eq!(report.iterations, 5);
    assert!(model.params().iter().all(|p| p.is_finite()));
}

#[test]
fn constant_trajectory_is_degenerate() {
    let data = Dataset::new(vec![Trajectory::new(vec![vec![1.0, 1.0]; 4], 0.1).unwrap()]).unwrap();
    assert!(matches!(train_seeded(&data, &small(LatentKind::Linear, 2)), Err(Error::Degenerate(_))));
}

#[test]
fn breakdown_sums_and_loss_improves() {
    let data = synth_point_to_point(PointShape::Sine, 3, 0.02, 11).unwrap();
    let (_, report) = train_seeded(&data, &small(LatentKind::Linear, 60)).unwrap();
    assert!(report.converged());
    for r in &report.epochs {
        assert!((r.endpoint + r.conditionals + r.logdet - r.nll).abs() < 1e-9 * r.nll.abs().max(1.0));
        assert!(r.grad_norm.is_finite() && r.grad_norm >= 0.0);
    }
    assert!(report.final_nll < report.initial_nll, "{} -> {}", report.initial_nll, report.final_nll);
}

#[test]
fn cycle_training_improves() {
    let data = synth_limit_cycle(CycleShape::Circle, 2, 0.02, 5).unwrap();
    let (model, report) = train_seeded(&data, &small(LatentKind::Cycle, 40)).unwrap();
    assert!(report.converged());
    assert!(report.final_nll < report.initial_nll, "{} -> {}", report.initial_nll, report.final_nll);
    assert_eq!(model.latent().kind(), LatentKind::Cycle);
}

#[test]
fn seeded_runs_are_bit_identical() {
    let data = synth_point_to_point(PointShape::Line, 2, 0.05, 3).unwrap();
    let cfg = TrainConfig { seed: 42, ..small(LatentKind::Linear, 10) };
    let (m1, r1) = train_seeded(&data, &cfg).unwrap();
    let (m2, r2) = train_seeded(&data, &cfg).unwrap();
    let bits = |v: Vec<f64>| v.into_iter().map(f64::to_bits).collect::<Vec<_>>();
    assert_eq!(bits(m1.params()), bits(m2.params()));
    assert_eq!(r1, r2);
    let (m3, _) = train_seeded(&data, &TrainConfig { seed: 43, ..cfg }).unwrap();
    assert_ne!(bits(m1.params()), bits(m3.params()));
}

#[test]
fn flow_and_latent_both_receive_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for (data, kind) in [
        (synth_point_to_point(PointShape::SCurve, 2, 0.05, 1).unwrap(), LatentKind::Linear),
        (synth_limit_cycle(CycleShape::Ellipse, 2, 0.05, 1).unwrap(), LatentKind::Cycle),
    ] {
        let model = initial_model(&data, &small(kind, 1), &mut rng).unwrap();
        let (_, g) = model.nll_gradient(data.trajectories()[0].points(), 2).unwrap();
        let nf = model.flow().num_params();
        let norm = |s: &[f64]| s.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm(&g[..nf]) > 0.0 && norm(&g[nf..]) > 0.0, "{kind}");
    }
}

#[test]
fn untrained_model_starts_at_identity_flow() {
    let data = synth_point_to_point(PointShape::Line, 1, 0.0, 0).unwrap();
    let model = initial_model(&data, &small(LatentKind::Linear, 1), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let y = [0.3, -0.7];
    let (z, ld) = model.flow().inverse(&y).unwrap();
    assert!((z[0] - y[0]).abs() < 1e-12 && (z[1] - y[1]).abs() < 1e-12 && ld.abs() < 1e-12);
}

#[test]
fn runaway_step_size_stops_with_a_finite_checkpoint() {
    let data = synth_point_to_point(PointShape::Sine, 2, 0.02, 2).unwrap();
    let cfg = TrainConfig { learning_rate: 50.0, clip_norm: 1e6, ..small(LatentKind::Linear, 50) };
    let (model, report) = train_seeded(&data, &cfg).unwrap();
    assert!(matches!(report.stop, StopReason::NonFinite(_)), "{:?}", report.stop);
    assert!(model.params().iter().all(|p| p.is_finite()));
    assert!(report.final_nll.is_finite());
}

#[test]
fn plateau_detection() {
    let flat: Vec<EpochRecord> = (0..100)
        .map(|epoch| EpochRecord { epoch, nll: 1.0, endpoint: 0.0, conditionals: 1.0, logdet: 0.0, grad_norm: 0.0 })
        .collect();
    assert!(plateaued(&flat, 50, 1e-5));
    assert!(!plateaued(&flat[..99], 50, 1e-5));
    let falling: Vec<EpochRecord> = flat.iter().map(|r| EpochRecord { nll: -(r.epoch as f64), ..*r }).collect();
    assert!(!plateaued(&falling, 50, 1e-5));
}

#[test]
fn log_lines_follow_schema() {
    let mut buf = Vec::new();
    let mut log = TrainingLog::new(&mut buf);
    log.record(&EpochRecord { epoch: 3, nll: 1.5, endpoint: 0.5, conditionals: 1.25, logdet: -0.25, grad_norm: 2.0 })
        .unwrap();
    let line = String::from_utf8(buf).unwrap();
    assert!(line.starts_with("epoch=3 nll=1.5 endpoint=0.5 conditionals=1.25 logdet=-0.25 grad_norm=2 wall="));
    assert!(line.ends_with('\n'));
}
