//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! when any criterion fails.
//!
//! `cargo test --release -p scenred-cli --test acceptance`

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use scenred_cli::corpus::target_path;
use scenred_cli::{cmd_bench, cmd_eval, cmd_gen, cmd_train, BenchArgs, EvalArgs, GenArgs, TrainArgs, TrainOutcome};
use scenred_core::csv_io::{load_csv, save_csv};
use scenred_core::nn::{bce_loss, AvgPool, Conv2d, ConvSpec, Dims, Layer, PointwiseDense, Relu, Sigmoid, Tensor3};
use scenred_core::reduce::{
    fast_forward_selection, heuristic_search_reduce, simultaneous_backward_reduction, Method, ReductionConfig,
};
use scenred_core::scenario::{decode_image, encode_image};
use scenred_core::solar::{gen_synthetic, SolarGenConfig};
use scenred_core::surrogate::{build_model, forward_reduce, from_bytes, load_model, save_model, to_bytes, ModelDims};
use scenred_core::{space_distance, NormalizationParams, ScenarioSet};

const SHAPE_SECS: f64 = 1.0;
const GRAD_TOL: f64 = 1e-4;
const GRAD_STEP: f64 = 1e-5;
const GRAD_FLOOR: f64 = 1e-6;
const GRAD_SECS: f64 = 60.0;
const GRAD_ROUNDS: usize = 24;
const METRIC_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-9;
const HS_STRICT_SHARE: f64 = 0.30;
const LOSS_RATIO: f64 = 0.5;
const TRAIN_SECS: f64 = 1800.0;
const QUALITY_RATIO: f64 = 5.0;
const SPEEDUP: f64 = 100.0;

type Verdict = Result<(bool, String), String>;

struct Desk {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    model: PathBuf,
    outcome: TrainOutcome,
}

fn main() {
    let mut results = Vec::new();
    let mut record = |id: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let verdict = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let (pass, detail) = match verdict {
            Ok(v) => v,
            Err(e) => (false, format!("error: {e}")),
        };
        println!(
            "{} {id}. {name}: {detail} [{:.1}s]",
            if pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
        results.push(pass);
    };

    record(1, "shape chain", &mut shape_chain);
    record(2, "gradient check", &mut gradient_check);
    record(3, "classic reducers against naive references", &mut classic_references);
    record(4, "hs never worse than ffs", &mut hs_dominates_ffs);

    let mut desk: Option<Desk> = None;
    record(5, "surrogate training halves held-out loss", &mut || {
        let d = train_desk()?;
        let r = &d.outcome.report;
        let initial = r.test_loss[0];
        let last = r.final_test_loss.ok_or("no held-out split")?;
        let finite = r.train_loss.iter().chain(&r.test_loss).all(|v| v.is_finite()) && last.is_finite();
        let pass = finite && last <= LOSS_RATIO * initial && r.wall_clock_secs < TRAIN_SECS;
        let detail = format!(
            "test BCE {initial:.4} -> {last:.4} (gate {:.4}), {} epochs in {:.0}s (limit {TRAIN_SECS:.0}s), finite {finite}",
            LOSS_RATIO * initial,
            r.epochs,
            r.wall_clock_secs
        );
        desk = Some(d);
        Ok((pass, detail))
    });
    record(6, "surrogate space distance within 5x of teacher", &mut || surrogate_quality(desk.as_ref()));
    record(7, "surrogate speedup over hs", &mut || speedup(desk.as_ref()));
    record(8, "robustness and roundtrips", &mut robustness);
    record(9, "training is deterministic", &mut determinism);

    let passed = results.iter().filter(|&&p| p).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

// --- oracles ---

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.len() {
        acc += (a[i] - b[i]) * (a[i] - b[i]);
    }
    acc.sqrt()
}

fn naive_space(original: &ScenarioSet, reduced: &ScenarioSet) -> f64 {
    let mut total = 0.0;
    for s in 0..original.size() {
        let mut best = f64::INFINITY;
        for j in 0..reduced.size() {
            best = best.min(euclid(original.scenario(s), reduced.scenario(j)));
        }
        total += original.prob(s) * best;
    }
    total
}

fn naive_moments(set: &ScenarioSet) -> (Vec<f64>, Vec<f64>) {
    let t_len = set.horizon();
    let mut mean = vec![0.0; t_len];
    let mut var = vec![0.0; t_len];
    for t in 0..t_len {
        for s in 0..set.size() {
            mean[t] += set.prob(s) * set.scenario(s)[t];
        }
        for s in 0..set.size() {
            let d = set.scenario(s)[t] - mean[t];
            var[t] += set.prob(s) * d * d;
        }
    }
    (mean, var)
}

fn naive_objective(original: &ScenarioSet, reduced: &ScenarioSet, lambda: f64) -> f64 {
    let (m0, v0) = naive_moments(original);
    let (m1, v1) = naive_moments(reduced);
    let t_len = original.horizon() as f64;
    let moment: f64 = (0..m0.len()).map(|t| (m0[t] - m1[t]).abs() + (v0[t] - v1[t]).abs()).sum::<f64>() / t_len;
    naive_space(original, reduced) + lambda * moment
}

/// Kept indices in ascending order and the probability each one collects
/// from its nearest-kept neighbours.
fn naive_redistribute(set: &ScenarioSet, kept: &[usize]) -> Vec<f64> {
    let mut weights = vec![0.0; kept.len()];
    for s in 0..set.size() {
        let mut best = (f64::INFINITY, 0);
        for (k, &j) in kept.iter().enumerate() {
            let d = euclid(set.scenario(s), set.scenario(j));
            if d < best.0 {
                best = (d, k);
            }
        }
        weights[best.1] += set.prob(s);
    }
    weights
}

fn naive_ffs(set: &ScenarioSet, target: usize) -> Vec<usize> {
    let mut selected: Vec<usize> = Vec::new();
    for _ in 0..target {
        let mut best = (f64::INFINITY, usize::MAX);
        for u in (0..set.size()).filter(|u| !selected.contains(u)) {
            let mut cand = selected.clone();
            cand.push(u);
            let mut cost = 0.0;
            for s in 0..set.size() {
                let d = cand.iter().map(|&j| euclid(set.scenario(s), set.scenario(j))).fold(f64::INFINITY, f64::min);
                cost += set.prob(s) * d;
            }
            if cost < best.0 {
                best = (cost, u);
            }
        }
        selected.push(best.1);
    }
    selected.sort_unstable();
    selected
}

/// Kept indices ascending with their final weights.
fn naive_sbr(set: &ScenarioSet, target: usize) -> (Vec<usize>, Vec<f64>) {
    let n = set.size();
    let mut alive = vec![true; n];
    let mut w: Vec<f64> = set.probs().to_vec();
    let nearest = |u: usize, alive: &[bool]| {
        let mut best = (f64::INFINITY, usize::MAX);
        for j in (0..n).filter(|&j| alive[j] && j != u) {
            let d = euclid(set.scenario(u), set.scenario(j));
            if d < best.0 {
                best = (d, j);
            }
        }
        best
    };
    for _ in target..n {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for u in (0..n).filter(|&u| alive[u]) {
            let (d, j) = nearest(u, &alive);
            let cost = w[u] * d;
            if cost < best.0 || best.1 == usize::MAX {
                best = (cost, u, j);
            }
        }
        let (_, u, j) = best;
        alive[u] = false;
        w[j] += w[u];
    }
    let kept: Vec<usize> = (0..n).filter(|&j| alive[j]).collect();
    let weights = kept.iter().map(|&j| w[j]).collect();
    (kept, weights)
}

fn random_set(rng: &mut ChaCha8Rng, size: usize, horizon: usize) -> ScenarioSet {
    let rows = (0..size).map(|_| (0..horizon).map(|_| rng.gen::<f64>()).collect()).collect();
    let w: Vec<f64> = (0..size).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    ScenarioSet::new(rows, w.iter().map(|v| v / total).collect()).unwrap()
}

/// Checks that `got` lists exactly the rows `kept` of `set`, in order, with
/// the given probabilities.
fn same_reduction(set: &ScenarioSet, got: &ScenarioSet, kept: &[usize], weights: &[f64]) -> bool {
    got.size() == kept.len()
        && kept.iter().enumerate().all(|(k, &j)| {
            got.scenario(k) == set.scenario(j) && (got.prob(k) - weights[k]).abs() <= METRIC_TOL
        })
}

// --- criteria ---

fn shape_chain() -> Verdict {
    let model = build_model(ModelDims::new(24, 1000, 200, 3).map_err(err)?, 0).map_err(err)?;
    let expected = [
        Dims::new(25, 1000, 64),
        Dims::new(25, 200, 64),
        Dims::new(25, 200, 32),
        Dims::new(25, 200, 8),
        Dims::new(25, 200, 1),
    ];
    let shapes = model.stage_shapes().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let input = Tensor3::new(Dims::new(25, 1000, 1), (0..25_000).map(|_| rng.gen::<f64>()).collect()).map_err(err)?;
    let start = Instant::now();
    let out = model.forward_tensor(&input).map_err(err)?;
    let secs = start.elapsed().as_secs_f64();
    let pass = shapes == expected && out.dims() == expected[4] && secs < SHAPE_SECS;
    let chain: Vec<String> = shapes.iter().map(|d| format!("{}x{}x{}", d.height, d.width, d.channels)).collect();
    Ok((pass, format!("{}; forward {:.3}s (limit {SHAPE_SECS}s)", chain.join(" -> "), secs)))
}

/// Largest relative error between backprop and central differences of
/// `sum(r * layer(x))`, over inputs and a sample of parameters.
fn layer_error<L: Layer + Clone>(layer: &L, input: &Tensor3, rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let out = layer.forward(input).map_err(err)?;
    let r: Vec<f64> = (0..out.data().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let upstream = Tensor3::new(out.dims(), r.clone()).map_err(err)?;
    let objective = |l: &L, x: &Tensor3| -> f64 {
        let y = l.forward(x).unwrap();
        y.data().iter().zip(&r).map(|(a, b)| a * b).sum()
    };
    let mut grads = layer.params().map(|p| p.zero_grads());
    let grad_in = layer
        .backward(input, &out, &upstream, grads.as_mut(), true)
        .map_err(err)?
        .ok_or("no input gradient")?;
    let rel = |a: f64, n: f64| (a - n).abs() / a.abs().max(n.abs()).max(GRAD_FLOOR);

    let mut worst: f64 = 0.0;
    for i in 0..input.data().len() {
        let (mut plus, mut minus) = (input.clone(), input.clone());
        plus.data_mut()[i] += GRAD_STEP;
        minus.data_mut()[i] -= GRAD_STEP;
        let numeric = (objective(layer, &plus) - objective(layer, &minus)) / (2.0 * GRAD_STEP);
        worst = worst.max(rel(grad_in.data()[i], numeric));
    }
    if let Some(g) = grads {
        let params = layer.params().unwrap();
        let (nw, nb) = (params.weights.len(), params.biases.len());
        for _ in 0..200.min(nw + nb) {
            let i = rng.gen_range(0..nw + nb);
            let nudge = |delta: f64| {
                let mut l = layer.clone();
                let p = l.params_mut().unwrap();
                if i < nw {
                    p.weights[i] += delta;
                } else {
                    p.biases[i - nw] += delta;
                }
                objective(&l, input)
            };
            let numeric = (nudge(GRAD_STEP) - nudge(-GRAD_STEP)) / (2.0 * GRAD_STEP);
            let analytic = if i < nw { g.weights[i] } else { g.biases[i - nw] };
            worst = worst.max(rel(analytic, numeric));
        }
    }
    Ok(worst)
}

fn gradient_check() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = [0.0f64; 6];
    let names = ["conv", "pool", "dense", "relu", "sigmoid", "bce"];
    for round in 0..GRAD_ROUNDS {
        let (h, ci) = (rng.gen_range(1..=5), rng.gen_range(1..=4));
        let pool = rng.gen_range(1..=3);
        let w = pool * rng.gen_range(1..=4);
        let dims = Dims::new(h, w, ci);
        let data: Vec<f64> = (0..dims.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = Tensor3::new(dims, data).map_err(err)?;

        let spec = ConvSpec::new(rng.gen_range(1..=3), [1, 3, 5][rng.gen_range(0..3)], ci, [3, 11, 41][round % 3])
            .map_err(err)?;
        let conv = Conv2d::init(spec, &mut rng);
        worst[0] = worst[0].max(layer_error(&conv, &x, &mut rng)?);
        worst[1] = worst[1].max(layer_error(&AvgPool::new(pool).map_err(err)?, &x, &mut rng)?);
        let dense = PointwiseDense::init(ci, [2, 9, 33][round % 3], &mut rng);
        worst[2] = worst[2].max(layer_error(&dense, &x, &mut rng)?);
        let kinked = x.map(|v| if v.abs() < 0.05 { v.signum() * 0.05 + v } else { v });
        worst[3] = worst[3].max(layer_error(&Relu, &kinked, &mut rng)?);
        worst[4] = worst[4].max(layer_error(&Sigmoid, &x.map(|v| 3.0 * v), &mut rng)?);

        let pred = x.map(|v| 0.5 + 0.45 * v);
        let target = x.map(|v| if v > 0.0 { 1.0 } else { (v + 1.0) * 0.5 });
        let (_, grad) = bce_loss(&pred, &target).map_err(err)?;
        for i in 0..pred.data().len() {
            let (mut plus, mut minus) = (pred.clone(), pred.clone());
            plus.data_mut()[i] += GRAD_STEP;
            minus.data_mut()[i] -= GRAD_STEP;
            let numeric = (bce_loss(&plus, &target).map_err(err)?.0 - bce_loss(&minus, &target).map_err(err)?.0)
                / (2.0 * GRAD_STEP);
            let a = grad.data()[i];
            worst[5] = worst[5].max((a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let max = worst.iter().cloned().fold(0.0, f64::max);
    let listing: Vec<String> = names.iter().zip(&worst).map(|(n, e)| format!("{n} {e:.1e}")).collect();
    Ok((
        max <= GRAD_TOL && secs < GRAD_SECS,
        format!("{GRAD_ROUNDS} shapes, max relative error {} (tol {GRAD_TOL:e})", listing.join(", ")),
    ))
}

fn classic_references() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut ffs_ok, mut sbr_ok, mut space_ok) = (0, 0, 0);
    let mut space_err: f64 = 0.0;
    for _ in 0..200 {
        let size = rng.gen_range(2..=8);
        let target = rng.gen_range(1..=size.min(3));
        let horizon = rng.gen_range(1..=4);
        let set = random_set(&mut rng, size, horizon);
        let cfg = ReductionConfig::new(target);

        let kept = naive_ffs(&set, target);
        let got = fast_forward_selection(&set, &cfg).map_err(err)?;
        ffs_ok += same_reduction(&set, &got, &kept, &naive_redistribute(&set, &kept)) as usize;

        let (kept, weights) = naive_sbr(&set, target);
        let got = simultaneous_backward_reduction(&set, &cfg).map_err(err)?;
        sbr_ok += same_reduction(&set, &got, &kept, &weights) as usize;
    }
    for _ in 0..200 {
        let horizon = rng.gen_range(1..=6);
        let (n, m) = (rng.gen_range(1..=30), rng.gen_range(1..=10));
        let original = random_set(&mut rng, n, horizon);
        let reduced = random_set(&mut rng, m, horizon);
        let e = (space_distance(&original, &reduced).map_err(err)? - naive_space(&original, &reduced)).abs();
        space_err = space_err.max(e);
        space_ok += (e <= METRIC_TOL) as usize;
    }
    Ok((
        ffs_ok == 200 && sbr_ok == 200 && space_ok == 200,
        format!("ffs {ffs_ok}/200, sbr {sbr_ok}/200, space distance {space_ok}/200 (max error {space_err:.1e})"),
    ))
}

fn hs_dominates_ffs() -> Verdict {
    let cfg = ReductionConfig::new(8).with_lambda(1.0);
    let (mut worse, mut strict) = (0, 0);
    let mut gains = Vec::new();
    for seed in 0..50 {
        let raw = gen_synthetic(&SolarGenConfig { seed, ..Default::default() }, 40).map_err(err)?;
        let set = NormalizationParams::fit([&raw]).map_err(err)?.apply(&raw).map_err(err)?;
        let ffs = naive_objective(&set, &fast_forward_selection(&set, &cfg).map_err(err)?, 1.0);
        let hs = naive_objective(&set, &heuristic_search_reduce(&set, &cfg).map_err(err)?, 1.0);
        worse += (hs > ffs) as usize;
        if hs < ffs - METRIC_TOL {
            strict += 1;
            gains.push(1.0 - hs / ffs);
        }
    }
    let share = strict as f64 / 50.0;
    let mean_gain = if gains.is_empty() { 0.0 } else { gains.iter().sum::<f64>() / gains.len() as f64 };
    Ok((
        worse == 0 && share >= HS_STRICT_SHARE,
        format!(
            "hs worse on {worse}/50, strictly better on {strict}/50 (need {:.0}%), mean gain {:.1}%",
            HS_STRICT_SHARE * 100.0,
            mean_gain * 100.0
        ),
    ))
}

fn train_desk() -> Result<Desk, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let corpus = dir.path().join("corpus");
    cmd_gen(&GenArgs {
        out: corpus.clone(),
        count: 200,
        scenarios: 64,
        config: SolarGenConfig::default(),
    })
    .map_err(err)?;
    let model = dir.path().join("model.bin");
    let outcome = cmd_train(&TrainArgs {
        corpus: corpus.clone(),
        target_size: 16,
        filter_width: 3,
        epochs: 2000,
        train_fraction: 0.82,
        seed: 0,
        lambda_moment: 1.0,
        out: model.clone(),
        log_every: None,
    })
    .map_err(err)?;
    Ok(Desk {
        _dir: dir,
        corpus,
        model,
        outcome,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn surrogate_quality(desk: Option<&Desk>) -> Verdict {
    let desk = desk.ok_or("no trained model")?;
    let model = load_model(&desk.model).map_err(err)?;
    let norm = model.normalization();
    let (mut dcnn, mut teacher) = (Vec::new(), Vec::new());
    for file in &desk.outcome.test_files {
        let path = desk.corpus.join(file);
        let set = load_csv(&path).map_err(err)?;
        let scaled = norm.apply(&set).map_err(err)?;
        let (reduced, _) = forward_reduce(&model, &set).map_err(err)?;
        dcnn.push(naive_space(&scaled, &norm.apply(&reduced).map_err(err)?));
        let target = load_csv(target_path(&path)).map_err(err)?;
        teacher.push(naive_space(&scaled, &norm.apply(&target).map_err(err)?));
    }
    let n = dcnn.len();
    let (d, t) = (median(dcnn), median(teacher));
    let eval = cmd_eval(&EvalArgs {
        corpus: desk.corpus.clone(),
        model: desk.model.clone(),
        train_fraction: 0.82,
        seed: 0,
        lambda_moment: 1.0,
        all: false,
    })
    .map_err(err)?;
    let agrees = eval.rows.len() == n
        && (eval.median_dcnn_space - d).abs() <= 1e-9
        && (eval.median_teacher_space - t).abs() <= 1e-9;
    Ok((
        agrees && d <= QUALITY_RATIO * t,
        format!(
            "{n} held-out sets, median dcnn {d:.4} vs teacher {t:.4} (ratio {:.2}, limit {QUALITY_RATIO}), eval agrees {agrees}",
            d / t
        ),
    ))
}

fn speedup(desk: Option<&Desk>) -> Verdict {
    let desk = desk.ok_or("no trained model")?;
    let input = desk.corpus.join(&desk.outcome.test_files[0]);
    let bench = cmd_bench(&BenchArgs {
        input,
        model: desk.model.clone(),
        lambda_moment: 1.0,
        seed: 0,
        extra: Vec::new(),
        repeats: 5,
    })
    .map_err(err)?;
    let (hs, dcnn) = (&bench.reports[0], &bench.reports[1]);
    Ok((
        bench.speedup >= SPEEDUP,
        format!(
            "hs {:.2} ms, dcnn {:.3} ms, speedup {:.1}x (need {SPEEDUP}x)",
            hs.time_ms, dcnn.time_ms, bench.speedup
        ),
    ))
}

fn valid_output(out: &ScenarioSet, horizon: usize, target: usize) -> bool {
    out.size() == target
        && out.horizon() == horizon
        && (out.probs().iter().sum::<f64>() - 1.0).abs() <= PROB_TOL
        && out.probs().iter().all(|&p| p >= 0.0 && p.is_finite())
        && out.values().iter().all(|v| v.is_finite())
}

fn bits(set: &ScenarioSet) -> (Vec<u64>, Vec<u64>) {
    (
        set.values().iter().map(|v| v.to_bits()).collect(),
        set.probs().iter().map(|v| v.to_bits()).collect(),
    )
}

fn robustness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let shapes = [(6, 8, 2), (24, 16, 4), (3, 12, 3), (24, 64, 16)];
    let models = shapes
        .iter()
        .enumerate()
        .map(|(i, &(t, s, r))| build_model(ModelDims::new(t, s, r, 3)?, i as u64))
        .collect::<scenred_core::Result<Vec<_>>>()
        .map_err(err)?;
    let methods = [Method::Ffs, Method::Sbr, Method::Kmeans, Method::Hs];

    let mut valid = 0;
    for call in 0..1000 {
        let (set, target, out) = if call % 5 == 4 {
            let m = &models[rng.gen_range(0..models.len())];
            let dims = m.dims();
            let set = random_set(&mut rng, dims.size, dims.horizon).map_values(|v| 4.0 * v).map_err(err)?;
            let out = forward_reduce(m, &set).map_err(err)?.0;
            (set, dims.reduced, out)
        } else {
            let size = rng.gen_range(2..=20);
            let horizon = rng.gen_range(1..=8);
            let mut set = random_set(&mut rng, size, horizon);
            if call % 7 == 0 {
                // duplicated scenarios and exact zeros
                set = set.map_values(|v| if v < 0.3 { 0.0 } else { (v * 4.0).round() }).map_err(err)?;
            }
            let target = rng.gen_range(1..=size);
            let cfg = ReductionConfig::new(target).with_seed(rng.gen());
            let out = methods[call % 5].reduce(&set, &cfg).map_err(err)?;
            (set, target, out)
        };
        valid += valid_output(&out, set.horizon(), target) as usize;
    }

    let dir = tempfile::tempdir().map_err(err)?;
    let mut roundtrips = 0;
    for i in 0..100 {
        let (size, horizon) = (rng.gen_range(1..=20), rng.gen_range(1..=8));
        let set = random_set(&mut rng, size, horizon);
        let decoded = decode_image(&encode_image(&set)).map_err(err)?;
        let path = dir.path().join(format!("{i}.csv"));
        save_csv(&set, &path).map_err(err)?;
        let reloaded = load_csv(&path).map_err(err)?;
        roundtrips += (bits(&decoded) == bits(&set) && bits(&reloaded) == bits(&set)) as usize;
    }
    let mut checkpoints = 0;
    for (i, m) in models.iter().enumerate() {
        let path = dir.path().join(format!("m{i}.bin"));
        save_model(m, &path).map_err(err)?;
        let loaded = load_model(&path).map_err(err)?;
        let bytes = to_bytes(m);
        let probe = random_set(&mut rng, m.dims().size, m.dims().horizon);
        let same = to_bytes(&loaded) == bytes
            && to_bytes(&from_bytes(&bytes).map_err(err)?) == bytes
            && bits(&forward_reduce(&loaded, &probe).map_err(err)?.0) == bits(&forward_reduce(m, &probe).map_err(err)?.0);
        checkpoints += same as usize;
    }
    Ok((
        valid == 1000 && roundtrips == 100 && checkpoints == models.len(),
        format!(
            "{valid}/1000 reductions valid, {roundtrips}/100 image and csv roundtrips exact, {checkpoints}/{} checkpoints exact",
            models.len()
        ),
    ))
}

fn copy_dir(from: &Path, to: &Path) -> std::io::Result<()> {
    fs::create_dir_all(to)?;
    for entry in fs::read_dir(from)? {
        let entry = entry?;
        fs::copy(entry.path(), to.join(entry.file_name()))?;
    }
    Ok(())
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().map_err(err)?;
    let first = dir.path().join("a");
    cmd_gen(&GenArgs {
        out: first.clone(),
        count: 24,
        scenarios: 16,
        config: SolarGenConfig { seed: 11, ..Default::default() },
    })
    .map_err(err)?;
    let second = dir.path().join("b");
    copy_dir(&first, &second).map_err(err)?;

    let run = |corpus: &Path, threads: usize| -> Result<(Vec<u8>, Vec<u8>), String> {
        let out = corpus.with_extension("bin");
        let args = TrainArgs {
            corpus: corpus.to_path_buf(),
            target_size: 4,
            filter_width: 3,
            epochs: 30,
            train_fraction: 0.75,
            seed: 5,
            lambda_moment: 1.0,
            out: out.clone(),
            log_every: None,
        };
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().map_err(err)?;
        let outcome = pool.install(|| cmd_train(&args)).map_err(err)?;
        Ok((fs::read(&out).map_err(err)?, fs::read(&outcome.loss_path).map_err(err)?))
    };
    let (model_a, loss_a) = run(&first, 1)?;
    let (model_b, loss_b) = run(&second, 4)?;
    Ok((
        model_a == model_b && loss_a == loss_b,
        format!(
            "checkpoints identical {}, loss curves identical {} (1 vs 4 threads, fresh teacher cache each)",
            model_a == model_b,
            loss_a == loss_b
        ),
    ))
}
