use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use scenred_core::csv_io::{load_csv, save_csv};
use scenred_core::reduce::{Method, ReductionConfig};
use scenred_core::scenario::split_train_test;
use scenred_core::solar::{gen_corpus, SolarGenConfig};
use scenred_core::surrogate::{
    build_model, evaluate_loss, forward_reduce, load_model, save_model, train_with_progress, DcnnModel, ModelDims,
    TrainOptions, TrainReport, TrainingPair,
};
use scenred_core::{combined_objective, NormalizationParams, ScenarioSet};

use crate::corpus::{teacher_targets, to_raw_units, Corpus};
use crate::error::{CliError, Result};
use crate::report::{loss_csv, median, BenchReport, EvalReport, EvalRow, ReductionReport};

/// A classic reducer or the trained surrogate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reducer {
    Classic(Method),
    Dcnn,
}

impl Reducer {
    pub fn name(self) -> &'static str {
        match self {
            Reducer::Classic(m) => m.name(),
            Reducer::Dcnn => "dcnn",
        }
    }
}

impl fmt::Display for Reducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Reducer {
    type Err = scenred_core::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("dcnn") {
            Ok(Reducer::Dcnn)
        } else {
            s.parse().map(Reducer::Classic)
        }
    }
}

/// Runs one reducer on a raw set. The returned set is in raw units; the
/// report's distances are measured after applying `norm`.
pub fn run_reducer(
    reducer: Reducer,
    set: &ScenarioSet,
    cfg: &ReductionConfig,
    norm: &NormalizationParams,
    model: Option<&DcnnModel>,
) -> Result<(ScenarioSet, ReductionReport)> {
    let scaled = norm.apply(set)?;
    let (reduced_raw, reduced_scaled, secs) = match reducer {
        Reducer::Classic(method) => {
            let start = Instant::now();
            let reduced = method.reduce(&scaled, cfg)?;
            let secs = start.elapsed().as_secs_f64();
            (to_raw_units(set, &scaled, &reduced, norm)?, reduced, secs)
        }
        Reducer::Dcnn => {
            let model = model.ok_or_else(|| CliError::Usage("method dcnn requires --model".into()))?;
            let (reduced, secs) = forward_reduce(model, set)?;
            let scaled = norm.apply(&reduced)?;
            (reduced, scaled, secs)
        }
    };
    let d = combined_objective(&scaled, &reduced_scaled, cfg.lambda_moment)?;
    let report = ReductionReport {
        method: reducer.name().to_string(),
        time_ms: secs * 1e3,
        space_distance: d.space,
        moment_distance: d.moment,
        lambda_moment: cfg.lambda_moment,
        combined_objective: d.combined,
        size: set.size(),
        reduced_size: reduced_raw.size(),
        horizon: set.horizon(),
        seed: cfg.seed,
    };
    Ok((reduced_raw, report))
}

#[derive(Debug, Clone)]
pub struct GenArgs {
    /// A `.csv` path when `count` is 1, a directory otherwise.
    pub out: PathBuf,
    pub count: usize,
    pub scenarios: usize,
    pub config: SolarGenConfig,
}

/// Writes `count` synthetic sets; set `i` uses seed `config.seed + i`.
pub fn cmd_gen(args: &GenArgs) -> Result<Vec<PathBuf>> {
    if args.count == 0 || args.scenarios == 0 {
        return Err(CliError::Usage("--count and --scenarios must be positive".into()));
    }
    let sets = gen_corpus(&args.config, args.scenarios, args.count)?;
    let single = args.count == 1 && args.out.extension().is_some_and(|e| e == "csv");
    let paths: Vec<PathBuf> = if single {
        vec![args.out.clone()]
    } else {
        fs::create_dir_all(&args.out).map_err(CliError::file(&args.out))?;
        (0..args.count).map(|i| args.out.join(format!("set_{i:04}.csv"))).collect()
    };
    for (set, path) in sets.iter().zip(&paths) {
        save_csv(set, path)?;
    }
    Ok(paths)
}

#[derive(Debug, Clone)]
pub struct ReduceArgs {
    pub input: PathBuf,
    pub method: Reducer,
    /// Ignored for dcnn, which takes it from the model.
    pub target_size: Option<usize>,
    pub lambda_moment: f64,
    pub seed: u64,
    pub model: Option<PathBuf>,
    pub out: PathBuf,
}

/// Distances are measured in the model's normalization when a model is
/// given and in the input's own min-max range otherwise.
pub fn cmd_reduce(args: &ReduceArgs) -> Result<ReductionReport> {
    let set = load_csv(&args.input)?;
    let model = args.model.as_ref().map(load_model).transpose()?;
    let target_size = match (args.method, &model) {
        (Reducer::Dcnn, None) => return Err(CliError::Usage("method dcnn requires --model".into())),
        (Reducer::Dcnn, Some(m)) => {
            m.check_set(&set)?;
            m.dims().reduced
        }
        (Reducer::Classic(_), _) => args
            .target_size
            .ok_or_else(|| CliError::Usage(format!("method {} requires --target-size", args.method)))?,
    };
    let norm = match &model {
        Some(m) => m.normalization(),
        None => NormalizationParams::fit([&set])?,
    };
    let cfg = ReductionConfig::new(target_size)
        .with_lambda(args.lambda_moment)
        .with_seed(args.seed);
    let (reduced, report) = run_reducer(args.method, &set, &cfg, &norm, model.as_ref())?;
    save_csv(&reduced, &args.out)?;
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TrainArgs {
    pub corpus: PathBuf,
    pub target_size: usize,
    pub filter_width: usize,
    pub epochs: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub lambda_moment: f64,
    /// Checkpoint path; the loss curve and report are written beside it.
    pub out: PathBuf,
    pub log_every: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    pub model_path: PathBuf,
    pub loss_path: PathBuf,
    pub report_path: PathBuf,
    pub train_files: Vec<String>,
    pub test_files: Vec<String>,
}

pub fn loss_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("loss.csv")
}

pub fn report_path(model_path: &Path) -> PathBuf {
    model_path.with_extension("report.json")
}

/// Train/test file indices shared by `train` and `eval`.
pub fn split_indices(n: usize, train_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    Ok(split_train_test(&(0..n).collect::<Vec<_>>(), train_fraction, seed)?)
}

fn training_pairs(
    corpus: &Corpus,
    teachers: &[ScenarioSet],
    norm: &NormalizationParams,
    indices: &[usize],
) -> Result<Vec<TrainingPair>> {
    indices
        .iter()
        .map(|&i| Ok(TrainingPair::from_teacher(&corpus.sets[i], &teachers[i], norm)?))
        .collect()
}

pub fn cmd_train(args: &TrainArgs) -> Result<TrainOutcome> {
    let corpus = Corpus::load(&args.corpus)?;
    let dims = ModelDims::new(corpus.horizon(), corpus.size(), args.target_size, args.filter_width)?;
    let norm = NormalizationParams::fit(&corpus.sets)?;
    let cfg = ReductionConfig::new(args.target_size)
        .with_lambda(args.lambda_moment)
        .with_seed(args.seed);
    let teachers = teacher_targets(&corpus, &cfg, &norm)?;
    let (train_idx, test_idx) = split_indices(corpus.len(), args.train_fraction, args.seed)?;
    let train_pairs = training_pairs(&corpus, &teachers, &norm, &train_idx)?;
    let test_pairs = training_pairs(&corpus, &teachers, &norm, &test_idx)?;

    let mut model = build_model(dims, args.seed)?;
    model.set_normalization(norm);
    let report = train_with_progress(&mut model, &train_pairs, &test_pairs, &TrainOptions::new(args.epochs), |s| {
        if let Some(every) = args.log_every.filter(|&e| e > 0) {
            if s.epoch % every == 0 || s.epoch + 1 == args.epochs {
                match s.test_loss {
                    Some(t) => eprintln!("epoch {:>6}  train {:.6}  test {:.6}", s.epoch, s.train_loss, t),
                    None => eprintln!("epoch {:>6}  train {:.6}", s.epoch, s.train_loss),
                }
            }
        }
    })?;

    save_model(&model, &args.out)?;
    let loss = loss_path(&args.out);
    fs::write(&loss, loss_csv(&report.train_loss, &report.test_loss)).map_err(CliError::file(&loss))?;
    let rep = report_path(&args.out);
    fs::write(&rep, serde_json::to_string_pretty(&report)?).map_err(CliError::file(&rep))?;
    Ok(TrainOutcome {
        report,
        model_path: args.out.clone(),
        loss_path: loss,
        report_path: rep,
        train_files: train_idx.iter().map(|&i| corpus.file_name(i)).collect(),
        test_files: test_idx.iter().map(|&i| corpus.file_name(i)).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct EvalArgs {
    pub corpus: PathBuf,
    pub model: PathBuf,
    /// Must match the values used for training to select the same held-out sets.
    pub train_fraction: f64,
    pub seed: u64,
    pub lambda_moment: f64,
    /// Evaluate every set instead of the held-out split.
    pub all: bool,
}

/// Compares the surrogate with its cached teacher on the held-out sets.
pub fn cmd_eval(args: &EvalArgs) -> Result<EvalReport> {
    let corpus = Corpus::load(&args.corpus)?;
    let model = load_model(&args.model)?;
    model.check_set(&corpus.sets[0])?;
    let norm = model.normalization();
    let cfg = ReductionConfig::new(model.dims().reduced)
        .with_lambda(args.lambda_moment)
        .with_seed(args.seed);
    let teachers = teacher_targets(&corpus, &cfg, &norm)?;
    let indices = if args.all {
        (0..corpus.len()).collect()
    } else {
        split_indices(corpus.len(), args.train_fraction, args.seed)?.1
    };
    if indices.is_empty() {
        return Err(CliError::Usage("no held-out sets to evaluate".into()));
    }

    let mut rows = Vec::with_capacity(indices.len());
    for &i in &indices {
        let set = &corpus.sets[i];
        let scaled = norm.apply(set)?;
        let (reduced, secs) = forward_reduce(&model, set)?;
        let dcnn = combined_objective(&scaled, &norm.apply(&reduced)?, cfg.lambda_moment)?;
        let teacher = combined_objective(&scaled, &norm.apply(&teachers[i])?, cfg.lambda_moment)?;
        rows.push(EvalRow {
            file: corpus.file_name(i),
            dcnn_space: dcnn.space,
            dcnn_moment: dcnn.moment,
            teacher_space: teacher.space,
            teacher_moment: teacher.moment,
            dcnn_ms: secs * 1e3,
        });
    }
    let pairs = training_pairs(&corpus, &teachers, &norm, &indices)?;
    let column = |f: fn(&EvalRow) -> f64| median(&rows.iter().map(f).collect::<Vec<_>>());
    Ok(EvalReport {
        median_dcnn_space: column(|r| r.dcnn_space),
        median_teacher_space: column(|r| r.teacher_space),
        median_dcnn_moment: column(|r| r.dcnn_moment),
        median_teacher_moment: column(|r| r.teacher_moment),
        bce: evaluate_loss(&model, &pairs)?,
        rows,
    })
}

#[derive(Debug, Clone)]
pub struct BenchArgs {
    pub input: PathBuf,
    pub model: PathBuf,
    pub lambda_moment: f64,
    pub seed: u64,
    /// Baselines reported next to hs and dcnn.
    pub extra: Vec<Method>,
    /// Each method runs this many times; the fastest run is reported.
    pub repeats: usize,
}

/// Times hs against the surrogate on one input, on a single thread.
pub fn cmd_bench(args: &BenchArgs) -> Result<BenchReport> {
    if args.repeats == 0 {
        return Err(CliError::Usage("--repeats must be positive".into()));
    }
    let set = load_csv(&args.input)?;
    let model = load_model(&args.model)?;
    model.check_set(&set)?;
    let norm = model.normalization();
    let cfg = ReductionConfig::new(model.dims().reduced)
        .with_lambda(args.lambda_moment)
        .with_seed(args.seed);
    let mut methods = vec![Reducer::Classic(Method::Hs), Reducer::Dcnn];
    methods.extend(args.extra.iter().filter(|&&m| m != Method::Hs).map(|&m| Reducer::Classic(m)));

    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let reports = pool.install(|| {
        methods
            .iter()
            .map(|&method| {
                let mut best: Option<ReductionReport> = None;
                for _ in 0..args.repeats {
                    let (_, report) = run_reducer(method, &set, &cfg, &norm, Some(&model))?;
                    if best.as_ref().map_or(true, |b| report.time_ms < b.time_ms) {
                        best = Some(report);
                    }
                }
                Ok(best.expect("at least one repeat"))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let speedup = reports[0].time_ms / reports[1].time_ms;
    Ok(BenchReport {
        reports,
        speedup,
        repeats: args.repeats,
    })
}
