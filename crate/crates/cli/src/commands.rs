use crate::args::{ClassifyArgs, EvalArgs, FieldArgs, GenerateArgs, SynthArgs, TrainArgs};
use crate::Failure;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use stochflow::data::{synth_limit_cycle, synth_point_to_point, CycleShape, Dataset, PointShape};
use stochflow::metrics::MetricReport;
use stochflow::model::{classify as classify_trajectory, read_model, write_field, write_model, GridSpec};
use stochflow::trainer::{train_with, StopReason, TrainConfig, TrainingLog};
use stochflow::Model;

type Outcome = Result<(), Failure>;

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Fails early when `path` could not be created because its directory is missing.
fn check_writable(path: &Path) -> Outcome {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(io_failure(path, "output directory does not exist"))
        }
        _ => Ok(()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn write_text(path: &Path, text: &str) -> Outcome {
    fs::write(path, text).map_err(|e| io_failure(path, e))
}

fn load_model(path: &Path) -> Result<Model, Failure> {
    let f = File::open(path).map_err(|e| io_failure(path, e))?;
    read_model(BufReader::new(f)).map_err(|e| io_failure(path, e))
}

fn load_data(path: &Path) -> Result<Dataset, Failure> {
    Dataset::load(path).map_err(|e| io_failure(path, e))
}

fn check_dim(what: &str, got: usize, model: &Model) -> Outcome {
    if got == model.dim() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} has dimension {got}, model has {}", model.dim())))
    }
}

/// Config file (if any) overlaid with flags. Latent kind and seed must come
/// from one of the two.
fn train_config(a: &TrainArgs) -> Result<TrainConfig, Failure> {
    let (mut config, file_keys) = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
            let table: toml::Table = toml::from_str(&text).map_err(|e| io_failure(path, e))?;
            let keys: Vec<String> = table.keys().cloned().collect();
            let config: TrainConfig = table.try_into().map_err(|e| io_failure(path, e))?;
            (config, keys)
        }
        None => (TrainConfig::default(), Vec::new()),
    };
    let in_file = |k: &str| file_keys.iter().any(|f| f == k);
    if a.latent.is_none() && !in_file("latent") {
        return Err(Failure::Usage("--latent linear|cycle is required".into()));
    }
    if a.seed.is_none() && !in_file("seed") {
        return Err(Failure::Usage("--seed is required for training".into()));
    }
    if let Some(v) = a.latent {
        config.latent = v;
    }
    if let Some(v) = a.epochs {
        config.epochs = v;
    }
    if let Some(v) = a.lr {
        config.learning_rate = v;
    }
    if let Some(v) = a.smax {
        config.s_max = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if let Some(v) = a.margin {
        config.margin = v;
    }
    if let Some(v) = a.pairs {
        config.flow.pairs = v;
    }
    if let Some(v) = a.width {
        config.flow.hidden_width = v;
    }
    config.validate()?;
    Ok(config)
}

pub fn train(a: TrainArgs) -> Outcome {
    let config = train_config(&a)?;
    let log_path = a.log.clone().unwrap_or_else(|| {
        let mut p = a.out.clone().into_os_string();
        p.push(".log");
        PathBuf::from(p)
    });
    check_writable(&a.out)?;
    check_writable(&log_path)?;
    let data = load_data(&a.data)?;

    let mut log = TrainingLog::new(create(&log_path)?);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (model, report) = train_with(&data, &config, &mut rng, |r| log.record(r))?;
    drop(log);
    write_model(create(&a.out)?, &model).map_err(|e| io_failure(&a.out, e))?;

    println!(
        "epochs {} iterations {} nll {:.6} -> {:.6} stop {:?}",
        report.epochs.len(),
        report.iterations,
        report.initial_nll,
        report.final_nll,
        report.stop
    );
    match report.stop {
        StopReason::NonFinite(why) => {
            Err(Failure::Numerical(format!("training aborted ({why}); wrote the last finite model")))
        }
        _ => Ok(()),
    }
}

pub fn generate(a: GenerateArgs) -> Outcome {
    check_writable(&a.out)?;
    if !(a.noise_scale >= 0.0) {
        return Err(Failure::Usage("--noise-scale must be >= 0".into()));
    }
    let seed = match a.seed {
        Some(s) => s,
        None if a.noise_scale == 0.0 => 0,
        None => return Err(Failure::Usage("--seed is required when --noise-scale is nonzero".into())),
    };
    let model = load_model(&a.model)?;
    check_dim("start point", a.start.len(), &model)?;
    let traj = model.generate(&a.start, a.steps, a.noise_scale, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let text = Dataset::new(vec![traj])?.to_text();
    write_text(&a.out, &text)
}

pub fn eval(a: EvalArgs) -> Outcome {
    for p in a.out.iter().chain(&a.json) {
        check_writable(p)?;
    }
    let model = load_model(&a.model)?;
    let data = load_data(&a.data)?;
    check_dim("data", data.dim(), &model)?;
    let reproductions =
        data.trajectories().iter().map(|d| model.reproduce(d)).collect::<stochflow::Result<Vec<_>>>()?;
    let report = MetricReport::compute(&reproductions, data.trajectories())?;
    match &a.out {
        Some(path) => write_text(path, &report.to_text())?,
        None => print!("{}", report.to_text()),
    }
    if let Some(path) = &a.json {
        write_text(path, &report.to_json())?;
    }
    Ok(())
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Index of the model whose file stem is the longest prefix of the data file's stem.
fn label_of(data: &Path, models: &[PathBuf]) -> Option<usize> {
    let name = stem(data);
    models
        .iter()
        .enumerate()
        .filter(|(_, m)| {
            let s = stem(m);
            !s.is_empty() && name.starts_with(&s)
        })
        .max_by_key(|(_, m)| stem(m).len())
        .map(|(i, _)| i)
}

pub fn classify(a: ClassifyArgs) -> Outcome {
    if let Some(p) = &a.out {
        check_writable(p)?;
    }
    let models = a.models.iter().map(|p| load_model(p)).collect::<Result<Vec<_>, _>>()?;
    let labels: Vec<Option<usize>> = a.data.iter().map(|d| label_of(d, &a.models)).collect();
    let labelled = labels.iter().all(Option::is_some);
    let k = models.len();
    let mut confusion = vec![vec![0usize; k]; k];

    let mut out = String::from("file\ttrajectory\tpredicted");
    for i in 0..k {
        write!(out, "\tloglik_{i}").unwrap();
    }
    out.push('\n');
    for (path, label) in a.data.iter().zip(&labels) {
        let data = load_data(path)?;
        for (j, t) in data.trajectories().iter().enumerate() {
            let (pred, scores) = classify_trajectory(t, &models)?;
            write!(out, "{}\t{j}\t{pred}", path.display()).unwrap();
            for s in &scores {
                write!(out, "\t{s:.6}").unwrap();
            }
            out.push('\n');
            if let Some(l) = label {
                confusion[*l][pred] += 1;
            }
        }
    }
    if labelled {
        out.push_str("\nconfusion (rows: true model, columns: predicted)\n");
        for row in &confusion {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        let correct: usize = (0..k).map(|i| confusion[i][i]).sum();
        let total: usize = confusion.iter().flatten().sum();
        writeln!(out, "accuracy {correct}/{total}").unwrap();
    }
    match &a.out {
        Some(path) => write_text(path, &out),
        None => {
            print!("{out}");
            Ok(())
        }
    }
}

fn parse_grid(spec: &str) -> Result<GridSpec, Failure> {
    let bad = || Failure::Usage(format!("bad --grid {spec:?}; expected lo:hi:count per axis, comma-separated"));
    let axes = spec
        .split(',')
        .map(|axis| {
            let parts: Vec<&str> = axis.trim().split(':').collect();
            let [lo, hi, n] = parts.as_slice() else { return Err(bad()) };
            Ok((lo.parse().map_err(|_| bad())?, hi.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?))
        })
        .collect::<Result<Vec<(f64, f64, usize)>, Failure>>()?;
    Ok(GridSpec::new(axes)?)
}

pub fn field(a: FieldArgs) -> Outcome {
    check_writable(&a.out)?;
    let grid = parse_grid(&a.grid)?;
    let model = load_model(&a.model)?;
    check_dim("grid", grid.dim(), &model)?;
    let points = grid.points();
    let velocities = model.vector_field(&points)?;
    let mut w = create(&a.out)?;
    write_field(&mut w, &grid, &points, &velocities)?;
    w.flush().map_err(|e| io_failure(&a.out, e))
}

pub fn synth(a: SynthArgs) -> Outcome {
    check_writable(&a.out)?;
    let data = if let Ok(shape) = a.shape.parse::<PointShape>() {
        synth_point_to_point(shape, a.demos, a.noise, a.seed)?
    } else if let Ok(shape) = a.shape.parse::<CycleShape>() {
        synth_limit_cycle(shape, a.demos, a.noise, a.seed)?
    } else {
        return Err(Failure::Usage(format!(
            "unknown shape {:?} (line, sine, s-curve, circle, ellipse, lissajous)",
            a.shape
        )));
    };
    data.save(&a.out).map_err(|e| io_failure(&a.out, e))
}
