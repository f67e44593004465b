//! Acceptance suite: one `criterion N: PASS|FAIL` line per criterion.
//!
//! Runs without the libtest harness so the lines are never captured.
//! Positional arguments filter criteria by substring of their names
//! (`cargo test --test acceptance -- 6` runs only the gradient oracles).
//! The process exits nonzero when any selected criterion fails.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use enhance::attack_cross::{enhance_cross, sweep_generalization_size, CrossConfig, CrossResult};
use enhance::attack_method::{enhance_method, GradientPair, MethodConfig};
use enhance::attack_within::{enhance_within, EnhancementResult, WithinConfig};
use enhance::data::{generate_synthetic, Dataset, Role, SyntheticRecipe};
use enhance::harness::{
    crossval_accuracy, run_experiment, seeds, CvOptions, DataSource, ExperimentConfig, ExperimentKind,
    MethodGridConfig, SizeSweepConfig, TransferConfig, WithinSweepConfig,
};
use enhance::influence::{ffn_back_gradient, lr_influence_gradient, svm_influence_gradient, BackGradConfig};
use enhance::models::{binary_decision, decision_function, fit, input_gradient, GradientObjective, ModelSpec};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(checks: &[(bool, String)]) -> Self {
        let pass = checks.iter().all(|(ok, _)| *ok);
        let detail = checks
            .iter()
            .map(|(ok, s)| if *ok { s.clone() } else { format!("[failed] {s}") })
            .collect::<Vec<_>>()
            .join("; ");
        Outcome { pass, detail }
    }
}

const MINUTE: Duration = Duration::from_secs(60);

fn pts(x: f64) -> String {
    format!("{:+.1}", 100.0 * x)
}

// ---------------------------------------------------------------------------
// shared 4-class noise benchmark

fn benchmark() -> Dataset {
    generate_synthetic(&SyntheticRecipe {
        n_per_class: vec![117, 46, 44, 38],
        n_features: 500,
        class_shift: 0.0,
        noise_sd: 1.0,
        seed: 1,
        block_offset: 0,
    })
    .unwrap()
}

fn benchmark_models() -> Vec<(&'static str, ModelSpec)> {
    vec![
        ("svm", ModelSpec::linear_svm(1.0)),
        ("lr", ModelSpec::logistic(1.0)),
        ("ffn", ModelSpec::feed_forward()),
    ]
}

const WITHIN_SCALE: f64 = 3.0;

struct WithinRun {
    baseline: BTreeMap<&'static str, f64>,
    /// Per source model: the attack, its wall time and its own accuracy.
    attacks: Vec<(&'static str, EnhancementResult, Duration, f64)>,
    setup: Duration,
}

fn within_eval() -> CvOptions {
    CvOptions::new(10, vec![77])
}

fn within_run() -> &'static WithinRun {
    static RUN: OnceLock<WithinRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let t = Instant::now();
        let data = benchmark();
        let cv = within_eval();
        let baseline = benchmark_models()
            .into_iter()
            .map(|(n, s)| (n, crossval_accuracy(&data, &s, &cv).unwrap().mean))
            .collect();
        let setup = t.elapsed();
        let attacks = benchmark_models()
            .into_iter()
            .map(|(n, spec)| {
                let t = Instant::now();
                let cfg = WithinConfig {
                    n_folds: 10,
                    scale: WITHIN_SCALE,
                    objective: GradientObjective::Loss,
                    model: spec.clone(),
                    seed: 5,
                    stratified: true,
                    evaluate: false,
                };
                let out = enhance_within(&data, &cfg).unwrap();
                let own = crossval_accuracy(&out.enhanced, &spec, &cv).unwrap().mean;
                (n, out, t.elapsed(), own)
            })
            .collect();
        WithinRun {
            baseline,
            attacks,
            setup,
        }
    })
}

fn criterion_1() -> Outcome {
    let run = within_run();
    let mut checks = Vec::new();
    for (n, b) in &run.baseline {
        checks.push(((0.25..=0.55).contains(b), format!("baseline {n} {b:.3}")));
    }
    let mut total = run.setup;
    for (n, out, took, own) in &run.attacks {
        total += *took;
        checks.push((out.similarity_r >= 0.99, format!("{n} r {:.4}", out.similarity_r)));
        checks.push((*own >= 0.95, format!("{n} {:.3} -> {own:.3}", run.baseline[n])));
    }
    checks.push((total <= 5 * MINUTE, format!("{:.0}s of 300s", total.as_secs_f64())));
    Outcome::new(&checks)
}

fn criterion_2() -> Outcome {
    let run = within_run();
    let t = Instant::now();
    let cv = within_eval();
    let mut checks = Vec::new();
    let mut total = run.setup;
    for (src, out, took, _) in &run.attacks {
        total += *took;
        for (dst, spec) in benchmark_models() {
            if dst == *src {
                continue;
            }
            let acc = crossval_accuracy(&out.enhanced, &spec, &cv).unwrap().mean;
            let gain = acc - run.baseline[dst];
            checks.push((gain >= 0.20, format!("{src}->{dst} {}", pts(gain))));
        }
    }
    total += t.elapsed();
    checks.push((total <= 10 * MINUTE, format!("{:.0}s of 600s", total.as_secs_f64())));
    Outcome::new(&checks)
}

// ---------------------------------------------------------------------------

/// Similarity the lambda bisection aims just under, inside `[0.93, 0.97]`.
const METHOD_TARGET_R: f64 = 0.9695;
const METHOD_REPLICATES: usize = 4;

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let data = benchmark();
    let data_seed = 1;
    let svm = ModelSpec::linear_svm(1.0);
    let mut rows = Vec::new();
    let mut checks = Vec::new();
    for rep in 0..METHOD_REPLICATES {
        let ffn = ModelSpec::feed_forward().with_seed(seeds::derive_seed(data_seed, &format!("ffn/{rep}")));
        let mut cv = CvOptions::new(10, vec![seeds::derive_seed(data_seed, &format!("eval/{rep}"))]);
        cv.model_seeds = vec![ffn.seed];
        let attack = |lambda: f64, eta: f64| {
            enhance_method(
                &data,
                &MethodConfig {
                    f1: ffn.clone(),
                    f2: svm.clone(),
                    lambda,
                    eta,
                    n_folds: 2,
                    seed: seeds::derive_seed(data_seed, &format!("attack/{rep}")),
                    evaluate: false,
                    ..Default::default()
                },
            )
            .unwrap()
        };
        // similarity falls as lambda grows; keep the upper end
        let (mut lo, mut hi) = (1.0, 10.0);
        for _ in 0..10 {
            let mid = 0.5 * (lo + hi);
            if attack(mid, 1.0).enhancement.similarity_r > METHOD_TARGET_R {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let one = attack(hi, 1.0);
        let zero = attack(hi, 0.0);
        let r = one.enhancement.similarity_r;
        checks.push(((0.93..=0.97).contains(&r), format!("rep {rep} lambda {hi:.3} r {r:.4}")));
        let acc = |d: &Dataset, s: &ModelSpec| crossval_accuracy(d, s, &cv).unwrap().mean;
        let e1 = &one.enhancement.enhanced;
        rows.push([
            acc(&data, &ffn),
            acc(&data, &svm),
            acc(e1, &ffn),
            acc(e1, &svm),
            acc(&zero.enhancement.enhanced, &svm),
        ]);
    }
    let mean = |j: usize| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64;
    let base_gap = mean(0) - mean(1);
    let gap = mean(2) - mean(3);
    checks.push((base_gap.abs() <= 0.05, format!("original gap {}", pts(base_gap))));
    checks.push((
        gap >= 0.30,
        format!("enhanced gap {} (ffn {:.3}, svm {:.3})", pts(gap), mean(2), mean(3)),
    ));
    checks.push((
        mean(3) <= mean(4) + 0.02,
        format!("svm at eta 0 {:.3}, eta 1 {:.3}", mean(4), mean(3)),
    ));
    let took = t.elapsed();
    checks.push((took <= 15 * MINUTE, format!("{:.0}s of 900s", took.as_secs_f64())));
    Outcome::new(&checks)
}

// ---------------------------------------------------------------------------

fn cross_pair() -> (Dataset, Dataset) {
    let recipe = SyntheticRecipe {
        n_per_class: vec![200, 200],
        n_features: 1000,
        class_shift: 0.3,
        noise_sd: 1.0,
        seed: 31,
        block_offset: 0,
    };
    let train = generate_synthetic(&recipe).unwrap();
    let gen = generate_synthetic(&SyntheticRecipe {
        n_per_class: vec![50, 50],
        seed: 32,
        block_offset: 250,
        ..recipe
    })
    .unwrap()
    .derived("gen", Role::Generalization, "");
    (train, gen)
}

fn cross_check(name: &str, out: &CrossResult, took: Duration, limit: Duration) -> Vec<(bool, String)> {
    let tr = &out.trace;
    let base = tr.gen_accuracy_reselected_original;
    let gain = tr.gen_accuracy_reselected_enhanced - base;
    let within = tr.within_accuracy_enhanced.unwrap() - tr.within_accuracy_original.unwrap();
    vec![
        ((0.55..=0.65).contains(&base), format!("{name} baseline {base:.3}")),
        (
            gain >= 0.15,
            format!(
                "{name} gen {} re-selected, {} fixed mask",
                pts(gain),
                pts(tr.gen_accuracy_best - tr.gen_accuracy_original)
            ),
        ),
        (out.enhancement.similarity_r >= 0.98, format!("{name} r {:.4}", out.enhancement.similarity_r)),
        (within.abs() <= 0.05, format!("{name} within {}", pts(within))),
        (
            took <= limit,
            format!("{name} {:.0}s of {:.0}s", took.as_secs_f64(), limit.as_secs_f64()),
        ),
    ]
}

fn criterion_4() -> Outcome {
    let (train, gen) = cross_pair();
    let mut checks = Vec::new();
    let ffn = ModelSpec {
        layers: vec![0, 20, 0],
        ..ModelSpec::feed_forward_full_batch()
    };
    for (name, model, limit) in [
        ("svm", ModelSpec::linear_svm(1.0), 20 * MINUTE),
        ("lr", ModelSpec::logistic(1.0), 20 * MINUTE),
        ("ffn", ffn, 60 * MINUTE),
    ] {
        let t = Instant::now();
        let cfg = CrossConfig {
            n_e: 50,
            iter_max: 20,
            lambda: 0.15,
            model,
            ..Default::default()
        };
        let out = enhance_cross(&train, &gen, &cfg).unwrap();
        checks.extend(cross_check(name, &out, t.elapsed(), limit));
    }
    Outcome::new(&checks)
}

fn criterion_5() -> Outcome {
    let recipe = SyntheticRecipe {
        n_per_class: vec![100, 100],
        n_features: 200,
        class_shift: 0.3,
        noise_sd: 1.0,
        seed: 31,
        block_offset: 0,
    };
    let train = generate_synthetic(&recipe).unwrap();
    let pool = generate_synthetic(&SyntheticRecipe {
        n_per_class: vec![200, 200],
        seed: 32,
        block_offset: 20,
        ..recipe
    })
    .unwrap();
    let cfg = CrossConfig {
        n_e: 20,
        model: ModelSpec::linear_svm(1.0),
        evaluate: false,
        seed: 9,
        ..Default::default()
    };
    let rows = sweep_generalization_size(&train, &pool, &[100, 200, 400], 5, &cfg).unwrap();
    let mut inversions = Vec::new();
    for w in rows.windows(2) {
        let rise = w[1].mean - w[0].mean;
        if rise > 0.0 {
            inversions.push(rise);
        }
    }
    let mut desc = String::new();
    for r in &rows {
        let _ = write!(desc, "{}: {:.3}±{:.3} ", r.size, r.mean, r.sd);
    }
    Outcome::new(&[
        (
            inversions.len() <= 1 && inversions.iter().all(|&r| r <= 0.02),
            format!("{} inversions", inversions.len()),
        ),
        (true, desc.trim_end().to_string()),
    ])
}

// ---------------------------------------------------------------------------
// gradient oracles on fixed n = 20, d = 5 instances

fn oracle_pair(seed: u64) -> (Dataset, Dataset) {
    let recipe = SyntheticRecipe {
        n_per_class: vec![10, 10],
        n_features: 5,
        class_shift: 1.0,
        noise_sd: 1.0,
        seed,
        block_offset: 0,
    };
    let train = generate_synthetic(&recipe).unwrap();
    let gen = generate_synthetic(&SyntheticRecipe { seed: seed + 100, ..recipe })
        .unwrap()
        .derived("gen", Role::Generalization, "");
    (train, gen)
}

fn signs(labels: &[usize]) -> Vec<f64> {
    labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect()
}

fn mean_hinge(spec: &ModelSpec, train: &Dataset, gen: &Dataset) -> f64 {
    let f = binary_decision(&fit(spec, train).unwrap(), gen.features()).unwrap();
    let y = signs(gen.labels());
    f.iter().zip(&y).map(|(f, y)| (1.0 - y * f).max(0.0)).sum::<f64>() / y.len() as f64
}

fn mean_logistic(spec: &ModelSpec, train: &Dataset, gen: &Dataset) -> f64 {
    let f = binary_decision(&fit(spec, train).unwrap(), gen.features()).unwrap();
    let y = signs(gen.labels());
    f.iter().zip(&y).map(|(f, y)| (-y * f).exp().ln_1p()).sum::<f64>() / y.len() as f64
}

fn mean_cross_entropy(spec: &ModelSpec, train: &Dataset, gen: &Dataset) -> f64 {
    let z = decision_function(&fit(spec, train).unwrap(), gen.features()).unwrap();
    let mut total = 0.0;
    for (i, &y) in gen.labels().iter().enumerate() {
        let row = z.row(i);
        let m = row.max();
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse - row[y];
    }
    total / gen.n_samples() as f64
}

/// Central differences of `loss` in the coordinates of training row `e`.
fn central_difference(train: &Dataset, e: usize, h: f64, loss: impl Fn(&Dataset) -> f64) -> DVector<f64> {
    DVector::from_iterator(
        train.n_features(),
        (0..train.n_features()).map(|j| {
            let moved = |s: f64| {
                let mut x = train.features().clone();
                x[(e, j)] += s * h;
                loss(&train.with_features(x).unwrap())
            };
            (moved(1.0) - moved(-1.0)) / (2.0 * h)
        }),
    )
}

fn relative_error(g: &DVector<f64>, fd: &DVector<f64>) -> f64 {
    (g - fd).norm() / fd.norm()
}

fn criterion_6() -> Outcome {
    let t = Instant::now();
    let mut checks = Vec::new();

    let (train, gen) = oracle_pair(2);
    let svm = ModelSpec::linear_svm(0.5);
    let model = fit(&svm, &train).unwrap();
    let alpha = &model.linear().unwrap().dual.as_ref().unwrap()[0];
    let margin: Vec<usize> = (0..alpha.len())
        .filter(|&i| alpha[i] > 1e-3 * svm.c && alpha[i] < svm.c * (1.0 - 1e-3))
        .collect();
    let mut worst: f64 = 0.0;
    for &e in &margin {
        let g = svm_influence_gradient(&model, &train, e, &gen).unwrap().gradient;
        let fd = central_difference(&train, e, 1e-3, |d| mean_hinge(&svm, d, &gen));
        worst = worst.max(relative_error(&g, &fd));
    }
    checks.push((
        !margin.is_empty() && worst <= 1e-2,
        format!("svm {} margin points, max rel err {worst:.1e}", margin.len()),
    ));

    let (train, gen) = oracle_pair(1);
    let lr = ModelSpec::logistic(0.7);
    let model = fit(&lr, &train).unwrap();
    let mut worst: f64 = 0.0;
    for e in 0..train.n_samples() {
        let g = lr_influence_gradient(&model, &train, e, &gen).unwrap().gradient;
        let fd = central_difference(&train, e, 1e-3, |d| mean_logistic(&lr, d, &gen));
        worst = worst.max(relative_error(&g, &fd));
    }
    checks.push((worst <= 1e-2, format!("lr 20 points, max rel err {worst:.1e}")));

    let (train, gen) = oracle_pair(3);
    let ffn = ModelSpec {
        layers: vec![0, 4, 0],
        learning_rate: 0.5,
        inner_iters: 50,
        ..ModelSpec::feed_forward_full_batch()
    };
    let cfg = BackGradConfig::from_spec(&ffn);
    let mut worst: f64 = 0.0;
    for e in [0, 5, 12, 19] {
        let g = ffn_back_gradient(&ffn, &train, e, &gen, &cfg).unwrap().gradient;
        let fd = central_difference(&train, e, 1e-4, |d| mean_cross_entropy(&ffn, d, &gen));
        worst = worst.max(relative_error(&g, &fd));
    }
    checks.push((worst <= 5e-2, format!("ffn 4 points, max rel err {worst:.1e}")));

    let mut exact = true;
    for spec in [ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0)] {
        let m = fit(&spec, &train).unwrap();
        let w = m.linear().unwrap().weights.row(0).transpose();
        for i in 0..train.n_samples() {
            let x = train.features().row(i).transpose();
            exact &= input_gradient(&m, x.as_slice(), 1, GradientObjective::DecisionFunction).unwrap() == w;
        }
    }
    checks.push((exact, "linear input gradients equal w bitwise".into()));
    let took = t.elapsed();
    checks.push((took <= MINUTE, format!("{:.1}s of 60s", took.as_secs_f64())));
    Outcome::new(&checks)
}

// ---------------------------------------------------------------------------

fn small_pair() -> (Dataset, Dataset) {
    let recipe = SyntheticRecipe {
        n_per_class: vec![20, 20],
        n_features: 40,
        class_shift: 0.6,
        noise_sd: 1.0,
        seed: 12,
        block_offset: 0,
    };
    let train = generate_synthetic(&recipe).unwrap();
    let gen = generate_synthetic(&SyntheticRecipe {
        seed: 13,
        block_offset: 10,
        ..recipe
    })
    .unwrap()
    .derived("gen", Role::Generalization, "");
    (train, gen)
}

fn small_network() -> ModelSpec {
    ModelSpec {
        layers: vec![0, 6, 0],
        inner_iters: 60,
        ..ModelSpec::feed_forward_full_batch()
    }
}

fn criterion_7() -> Outcome {
    let mut checks = Vec::new();

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut residual: f64 = 0.0;
    for _ in 0..2000 {
        let d = rng.random_range(2..64);
        let a = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let b = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        residual = residual.max(GradientPair::new(&a, &b).orthogonality_residual());
    }
    let bench = benchmark();
    let method = enhance_method(
        &bench,
        &MethodConfig {
            f1: ModelSpec::logistic(1.0),
            f2: ModelSpec::linear_svm(1.0),
            n_folds: 4,
            evaluate: false,
            ..Default::default()
        },
    )
    .unwrap();
    residual = residual.max(method.max_orthogonality_residual);
    checks.push((residual <= 1e-10, format!("orthogonality {residual:.1e}")));

    let x0 = bench.features();
    let mut identity = true;
    for (_, spec) in benchmark_models() {
        let out = enhance_within(
            &bench,
            &WithinConfig {
                scale: 0.0,
                model: spec.clone(),
                evaluate: false,
                ..Default::default()
            },
        )
        .unwrap();
        identity &= out.enhanced.features() == x0 && out.delta.iter().all(|&v| v == 0.0);
    }
    let zero = enhance_method(
        &bench,
        &MethodConfig {
            f1: ModelSpec::logistic(1.0),
            lambda: 0.0,
            n_folds: 4,
            evaluate: false,
            ..Default::default()
        },
    )
    .unwrap();
    identity &= zero.enhancement.enhanced.features() == x0;
    let (train, gen) = small_pair();
    let gen_hash = gen.content_hash();
    let mut hash_ok = true;
    for model in [ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0), small_network()] {
        let cfg = CrossConfig {
            n_e: 0,
            model,
            feature_fraction: 0.5,
            selection_folds: 4,
            eval_folds: 4,
            evaluate: false,
            ..Default::default()
        };
        let out = enhance_cross(&train, &gen, &cfg).unwrap();
        identity &= out.enhancement.enhanced.features() == train.features();
        hash_ok &= out.trace.gen_hash == gen_hash;
    }
    checks.push((identity, "zero-scale and zero-budget attacks are identities".into()));

    let mut budget_ok = true;
    let mut touched = Vec::new();
    for (name, model) in [
        ("svm", ModelSpec::linear_svm(1.0)),
        ("lr", ModelSpec::logistic(1.0)),
        ("ffn", small_network()),
    ] {
        let n_e = 5;
        let cfg = CrossConfig {
            n_e,
            iter_max: 5,
            lambda: 0.5,
            model,
            feature_fraction: 0.5,
            selection_folds: 4,
            eval_folds: 4,
            evaluate: false,
            ..Default::default()
        };
        let out = enhance_cross(&train, &gen, &cfg).unwrap();
        let changed = (0..train.n_samples())
            .filter(|&i| out.enhancement.enhanced.features().row(i) != train.features().row(i))
            .count();
        budget_ok &= changed <= n_e && out.trace.points.len() <= n_e;
        hash_ok &= out.trace.gen_hash == gen_hash;
        touched.push(format!("{name} {changed}"));
    }
    hash_ok &= gen.content_hash() == gen_hash;
    checks.push((hash_ok, "generalization hash unchanged".into()));
    checks.push((budget_ok, format!("rows changed of 5: {}", touched.join(", "))));

    let mut worst: f64 = 0.0;
    for (_, spec) in benchmark_models() {
        let scale = 1.7;
        let out = enhance_within(
            &bench,
            &WithinConfig {
                scale,
                model: spec,
                evaluate: false,
                ..Default::default()
            },
        )
        .unwrap();
        let skipped: Vec<usize> = out.per_fold_trace.iter().flat_map(|t| t.skipped.clone()).collect();
        for i in (0..bench.n_samples()).filter(|i| !skipped.contains(i)) {
            worst = worst.max((out.delta.row(i).norm() - scale).abs());
        }
    }
    checks.push((worst <= 1e-10, format!("|norm(delta) - scale| <= {worst:.1e}")));
    Outcome::new(&checks)
}

// ---------------------------------------------------------------------------

fn determinism_configs(root: &std::path::Path) -> Vec<ExperimentConfig> {
    let recipe = SyntheticRecipe {
        n_per_class: vec![12, 12],
        n_features: 10,
        class_shift: 0.5,
        noise_sd: 1.0,
        seed: 3,
        block_offset: 0,
    };
    let gen = DataSource::Synthetic(SyntheticRecipe {
        seed: 4,
        block_offset: 2,
        ..recipe.clone()
    });
    let data = DataSource::Synthetic(recipe);
    let tiny_ffn = ModelSpec {
        layers: vec![0, 6, 0],
        epochs: 3,
        ..ModelSpec::feed_forward()
    };
    let models = vec![ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0), tiny_ffn.clone()];
    let cross = CrossConfig {
        n_e: 3,
        iter_max: 3,
        feature_fraction: 0.5,
        selection_folds: 3,
        eval_folds: 3,
        ..Default::default()
    };
    let within = WithinSweepConfig {
        scales: vec![0.0, 1.0],
        n_folds: 3,
        ..Default::default()
    };
    let base = |id: &str, kind, models: Vec<ModelSpec>| {
        let mut c = ExperimentConfig::new(id, kind, data.clone(), models);
        c.eval_folds = 3;
        c.eval_seeds = vec![1, 2];
        c.seed = 21;
        c.output_dir = Some(root.join(id));
        c
    };
    let mut within_cfg = base("within", ExperimentKind::WithinSweep, models.clone());
    within_cfg.within = Some(within.clone());
    let mut method = base("method", ExperimentKind::MethodGrid, vec![ModelSpec::linear_svm(1.0)]);
    method.method = Some(MethodGridConfig {
        lambdas: vec![0.5, 1.0],
        etas: vec![0.0, 1.0],
        base: MethodConfig {
            f1: tiny_ffn,
            n_folds: 3,
            ..Default::default()
        },
    });
    let mut cross_cfg = base("cross", ExperimentKind::CrossRun, vec![ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0)]);
    cross_cfg.gen = Some(gen.clone());
    cross_cfg.cross = Some(cross.clone());
    let mut sweep = base("sweep", ExperimentKind::CrossSizeSweep, vec![ModelSpec::logistic(1.0)]);
    sweep.gen = Some(gen);
    sweep.cross = Some(cross);
    sweep.sweep = Some(SizeSweepConfig {
        sizes: vec![8, 24],
        repeats: 2,
    });
    let mut transfer = base("transfer", ExperimentKind::TransferMatrix, models);
    transfer.transfer = Some(TransferConfig { scale: 1.0, within });
    vec![within_cfg, method, cross_cfg, sweep, transfer]
}

fn criterion_8() -> Outcome {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let runs: Vec<Vec<(String, Vec<u8>)>> = dirs
        .iter()
        .map(|d| {
            determinism_configs(d.path())
                .into_iter()
                .map(|cfg| {
                    let out = run_experiment(&cfg).unwrap();
                    (cfg.id.clone(), std::fs::read(out.output_dir.join("results.csv")).unwrap())
                })
                .collect()
        })
        .collect();
    let checks: Vec<(bool, String)> = runs[0]
        .iter()
        .zip(&runs[1])
        .map(|((id, a), (_, b))| {
            let rows = a.iter().filter(|&&c| c == b'\n').count() - 1;
            (a == b && rows > 0, format!("{id} {rows} rows"))
        })
        .collect();
    Outcome::new(&checks)
}

// ---------------------------------------------------------------------------

type Criterion = (&'static str, fn() -> Outcome);

const CRITERIA: [Criterion; 8] = [
    ("criterion_1_within_inflation", criterion_1),
    ("criterion_2_within_transfer", criterion_2),
    ("criterion_3_method_enhancement", criterion_3),
    ("criterion_4_cross_dataset", criterion_4),
    ("criterion_5_generalization_size_trend", criterion_5),
    ("criterion_6_gradient_oracles", criterion_6),
    ("criterion_7_algebraic_properties", criterion_7),
    ("criterion_8_determinism", criterion_8),
];

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (i, (name, run)) in CRITERIA.iter().enumerate() {
        if !filters.is_empty() && !filters.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let t = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome {
                pass: false,
                detail: format!("panicked: {msg}"),
            }
        });
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} ({:.1}s) {}",
            i + 1,
            if outcome.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    println!("acceptance: {} of {ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
