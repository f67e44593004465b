//! Cross-dataset enhancement: nudge a few low-confidence training points,
//! one at a time, so the model trained on them scores better on an external
//! generalization set that is never modified.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack_within::{assemble, evaluation_options, finish, EnhancementResult, ZERO_GRADIENT};
use crate::data::{kfold, select_features, signed, Dataset};
use crate::harness::seeds::derive_seed;
use crate::influence::{
    forward_run, lr_influence_rows, reverse_run, svm_influence_rows, BackGradConfig, ForwardRun, GenRows,
    InfluenceGradient, LrInfluenceState, SvmInfluenceState,
};
use crate::models::logistic::softplus;
use crate::models::{self, ffn, ModelKind, ModelParams, ModelSpec, Network, Optimizer, TrainedModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossConfig {
    /// Number of training points to perturb; zero leaves the data as is.
    pub n_e: usize,
    pub iter_max: usize,
    pub lambda: f64,
    /// Step along the unit gradient, so every iteration moves the point by
    /// exactly `lambda`; otherwise the raw gradient is scaled by `lambda`.
    pub normalize: bool,
    pub feature_fraction: f64,
    pub model: ModelSpec,
    /// Generalization points with `|DF| < tau` count as low confidence.
    pub tau: f64,
    pub seed: u64,
    /// Folds of the cross-validated decision values ranking the candidates.
    pub selection_folds: usize,
    pub eval_folds: usize,
    pub stratified: bool,
    /// Cross-validate the training set before and after the attack.
    pub evaluate: bool,
    /// Reverse-pass settings for networks; `None` takes steps and rate
    /// from the model spec.
    pub backgrad: Option<BackGradConfig>,
}

impl Default for CrossConfig {
    fn default() -> Self {
        CrossConfig {
            n_e: 50,
            iter_max: 20,
            lambda: 0.15,
            normalize: true,
            feature_fraction: 0.1,
            model: ModelSpec::linear_svm(1.0),
            tau: 0.5,
            seed: 0,
            selection_folds: 10,
            eval_folds: 10,
            stratified: true,
            evaluate: true,
            backgrad: None,
        }
    }
}

impl CrossConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iter_max == 0 {
            return Err(Error::config("iter_max must be at least 1"));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::config(format!("lambda must be positive, got {}", self.lambda)));
        }
        if !(self.feature_fraction > 0.0 && self.feature_fraction <= 1.0) {
            return Err(Error::config("feature_fraction must lie in (0, 1]"));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(Error::config("tau must be nonnegative"));
        }
        if self.selection_folds < 2 || (self.evaluate && self.eval_folds < 2) {
            return Err(Error::config("fold counts must be at least 2"));
        }
        self.model.validate()?;
        if self.model.standardize {
            return Err(Error::config("cross-dataset enhancement needs an unstandardized model"));
        }
        if self.model.kind == ModelKind::FeedForward && self.model.optimizer != Optimizer::FullBatchGd {
            return Err(Error::config("cross-dataset enhancement of a network needs full-batch training"));
        }
        if let Some(b) = &self.backgrad {
            b.validate()?;
        }
        Ok(())
    }

    fn backgrad_config(&self) -> BackGradConfig {
        self.backgrad.unwrap_or_else(|| BackGradConfig::from_spec(&self.model))
    }
}

/// One enhancement point's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointTrace {
    pub index: usize,
    /// Cross-validated `|DF|` that ranked the point.
    pub abs_df: f64,
    /// Generalization accuracy per iterate; entry 0 is before any step.
    pub accuracy: Vec<f64>,
    /// Mean outer loss on the full generalization set per iterate.
    pub loss: Vec<f64>,
    pub accepted_iteration: usize,
    /// Accuracy of the accepted iterate, the best so far over all points.
    pub best_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossTrace {
    /// Columns seen by the attacked model.
    pub mask: Vec<usize>,
    pub points: Vec<PointTrace>,
    /// Candidates passed over because their gradient vanished at the start.
    pub skipped: Vec<usize>,
    /// Generalization accuracy under the attack's mask.
    pub gen_accuracy_original: f64,
    pub gen_accuracy_best: f64,
    /// Generalization accuracy with features re-selected on each dataset.
    pub gen_accuracy_reselected_original: f64,
    pub gen_accuracy_reselected_enhanced: f64,
    pub within_accuracy_original: Option<f64>,
    pub within_accuracy_enhanced: Option<f64>,
    pub gen_hash: String,
}

#[derive(Debug, Clone)]
pub struct CrossResult {
    /// Within-dataset accuracies live in `accuracy_original` and
    /// `accuracy_enhanced`.
    pub enhancement: EnhancementResult,
    pub trace: CrossTrace,
}

/// Training indices ordered by ascending cross-validated `|DF|`, ties by
/// index; the first `n_e` are returned.
pub fn select_enhancement_points(
    train: &Dataset,
    spec: &ModelSpec,
    n_e: usize,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<usize>> {
    Ok(ranked_candidates(train, spec, n_e, k_folds, seed, true)?
        .into_iter()
        .map(|(i, _)| i)
        .collect())
}

fn ranked_candidates(
    train: &Dataset,
    spec: &ModelSpec,
    n_e: usize,
    k_folds: usize,
    seed: u64,
    stratified: bool,
) -> Result<Vec<(usize, f64)>> {
    if train.n_classes() != 2 {
        return Err(Error::config("enhancement point selection needs binary labels"));
    }
    let n = train.n_samples();
    if n_e > n {
        return Err(Error::config(format!(
            "n_e = {n_e} exceeds the {n} training samples"
        )));
    }
    let plan = kfold(train, k_folds, stratified, seed)?;
    let folds: Vec<(Vec<usize>, Vec<f64>)> = (0..k_folds)
        .into_par_iter()
        .map(|k| -> Result<_> {
            let (part, held) = plan.split(train, k)?;
            let model = models::fit(spec, &part)?;
            Ok((held.indices.clone(), models::binary_decision(&model, held.features())?))
        })
        .collect::<Result<_>>()?;
    let mut df = vec![0.0; n];
    for (idx, vals) in folds {
        for (i, v) in idx.into_iter().zip(vals) {
            df[i] = v.abs();
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| df[a].total_cmp(&df[b]).then(a.cmp(&b)));
    order.truncate(n_e);
    Ok(order.into_iter().map(|i| (i, df[i])).collect())
}

/// Attack state on the masked columns.
struct Attack<'a> {
    cfg: &'a CrossConfig,
    /// Masked training data; labels never change.
    train: Dataset,
    gen_x: DMatrix<f64>,
    gen_labels: &'a [usize],
    gen_signs: Vec<f64>,
    widths: Vec<usize>,
    bg: BackGradConfig,
}

/// A fitted model with its generalization scores.
#[derive(Clone)]
struct Fitted {
    model: TrainedModel,
    /// Training run behind a network, reused by the reverse pass.
    run: Option<Arc<ForwardRun>>,
    df: Vec<f64>,
    accuracy: f64,
    loss: f64,
}

impl Attack<'_> {
    fn fit(&self, x: &DMatrix<f64>, warm: Option<&TrainedModel>) -> Result<Fitted> {
        match self.cfg.model.kind {
            ModelKind::FeedForward => {
                let run = forward_run(
                    &self.widths,
                    self.cfg.model.activation,
                    ffn::init_params(&self.widths, self.cfg.model.seed),
                    x,
                    self.train.labels(),
                    &self.bg,
                )?;
                let model = self.network(run.params.clone());
                self.score(model, Some(Arc::new(run)))
            }
            _ => self.score(models::fit_matrix(&self.cfg.model, x, self.train.labels(), 2, warm)?, None),
        }
    }

    fn network(&self, params: Vec<f64>) -> TrainedModel {
        TrainedModel {
            spec: self.cfg.model.clone(),
            n_features: self.widths[0],
            n_classes: 2,
            standardizer: None,
            feature_mask: None,
            params: ModelParams::Network(Network {
                widths: self.widths.clone(),
                activation: self.cfg.model.activation,
                params,
            }),
        }
    }

    fn score(&self, model: TrainedModel, run: Option<Arc<ForwardRun>>) -> Result<Fitted> {
        let df = models::binary_decision(&model, &self.gen_x)?;
        let m = df.len() as f64;
        let mut correct = 0usize;
        let mut loss = 0.0;
        for (f, y) in df.iter().zip(&self.gen_signs) {
            let t = y * f;
            correct += usize::from((*f > 0.0) == (*y > 0.0));
            loss += match self.cfg.model.kind {
                ModelKind::LinearSvm => (1.0 - t).max(0.0),
                _ => softplus(-t),
            };
        }
        Ok(Fitted {
            model,
            run,
            df,
            accuracy: correct as f64 / m,
            loss: loss / m,
        })
    }

    /// Generalization rows the model gets wrong or is unsure about.
    fn incorrect(&self, fitted: &Fitted) -> Vec<usize> {
        (0..self.gen_signs.len())
            .filter(|&k| {
                let f = fitted.df[k];
                (f > 0.0) != (self.gen_signs[k] > 0.0) || f.abs() < self.cfg.tau
            })
            .collect()
    }

    fn gradient(&self, x: &DMatrix<f64>, fitted: &Fitted, e: usize, rows: &[usize]) -> Result<InfluenceGradient> {
        let gx = self.gen_x.select_rows(rows.iter());
        let gl: Vec<usize> = rows.iter().map(|&k| self.gen_labels[k]).collect();
        let gen = GenRows { x: &gx, labels: &gl };
        let train = self.train.with_features(x.clone())?;
        match self.cfg.model.kind {
            ModelKind::LinearSvm => {
                let alpha = &fitted.model.linear().unwrap().dual.as_ref().unwrap()[0];
                if alpha[e] <= 0.0 {
                    return Ok(InfluenceGradient {
                        gradient: DVector::zeros(x.ncols()),
                        loss: f64::NAN,
                        non_support: true,
                    });
                }
                let st = SvmInfluenceState::new(&fitted.model, &train)?;
                svm_influence_rows(&st, &fitted.model, &train, e, gen)
            }
            ModelKind::LogisticRegression => {
                let st = LrInfluenceState::new(&fitted.model, &train)?;
                lr_influence_rows(&st, &fitted.model, &train, e, gen)
            }
            ModelKind::FeedForward => {
                let run = fitted.run.as_ref().expect("networks keep their forward run");
                let act = self.cfg.model.activation;
                let (gradient, loss) =
                    reverse_run(&self.widths, act, run, x, self.train.labels(), e, &gx, &gl, &self.bg)?;
                Ok(InfluenceGradient {
                    gradient,
                    loss,
                    non_support: false,
                })
            }
        }
    }

    /// Runs up to `iter_max` steps on point `e` and returns the accepted
    /// iterate, or `None` when the first gradient vanishes.
    fn point(&self, x: &mut DMatrix<f64>, current: &mut Fitted, e: usize, abs_df: f64) -> Result<Option<PointTrace>> {
        let start = x.row(e).into_owned();
        let mut trace = PointTrace {
            index: e,
            abs_df,
            accuracy: vec![current.accuracy],
            loss: vec![current.loss],
            accepted_iteration: 0,
            best_accuracy: current.accuracy,
        };
        let mut best = (0, start, current.clone());
        let mut fitted = current.clone();
        for t in 1..=self.cfg.iter_max {
            let rows = self.incorrect(&fitted);
            if rows.is_empty() {
                break;
            }
            let g = self.gradient(x, &fitted, e, &rows)?;
            let norm = g.gradient.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite(format!("influence gradient at point {e}")));
            }
            if g.non_support || norm <= ZERO_GRADIENT {
                if t == 1 {
                    return Ok(None);
                }
                break;
            }
            let step = if self.cfg.normalize { self.cfg.lambda / norm } else { self.cfg.lambda };
            let row = x.row(e) - g.gradient.transpose() * step;
            x.set_row(e, &row);
            fitted = self.fit(x, Some(&fitted.model))?;
            trace.accuracy.push(fitted.accuracy);
            trace.loss.push(fitted.loss);
            let better = fitted.accuracy > best.2.accuracy
                || (fitted.accuracy == best.2.accuracy && fitted.loss < best.2.loss);
            if better {
                best = (t, x.row(e).into_owned(), fitted.clone());
            }
        }
        let (t, row, fit) = best;
        x.set_row(e, &row);
        trace.accepted_iteration = t;
        trace.best_accuracy = fit.accuracy;
        *current = fit;
        Ok(Some(trace))
    }
}

/// Perturbs up to `cfg.n_e` training points to raise accuracy on `gen`.
pub fn enhance_cross(train: &Dataset, gen: &Dataset, cfg: &CrossConfig) -> Result<CrossResult> {
    cfg.validate()?;
    if train.n_classes() != 2 || gen.n_classes() != 2 {
        return Err(Error::config("cross-dataset enhancement needs binary labels"));
    }
    if train.n_features() != gen.n_features() {
        return Err(Error::config(format!(
            "training set has {} features, generalization set {}",
            train.n_features(),
            gen.n_features()
        )));
    }
    if cfg.n_e > train.n_samples() {
        return Err(Error::config(format!(
            "n_e = {} exceeds the {} training samples",
            cfg.n_e,
            train.n_samples()
        )));
    }
    let gen_hash = gen.content_hash();
    let mask = select_features(train, cfg.feature_fraction)?;
    let cols = mask.indices();
    let sub = train.select_columns(&cols)?;
    let attack = Attack {
        cfg,
        widths: cfg.model.network_widths(cols.len(), 2)?,
        bg: cfg.backgrad_config(),
        gen_x: gen.features().select_columns(cols.iter()),
        gen_labels: gen.labels(),
        gen_signs: signed(gen.labels()),
        train: sub,
    };
    let mut x = attack.train.features().clone();
    let mut current = attack.fit(&x, None)?;
    let gen_accuracy_original = current.accuracy;

    let candidates = if cfg.n_e == 0 {
        Vec::new()
    } else {
        let seed = derive_seed(cfg.seed, "selection");
        ranked_candidates(&attack.train, &cfg.model, train.n_samples(), cfg.selection_folds, seed, cfg.stratified)?
    };
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for &(e, abs_df) in &candidates {
        if points.len() == cfg.n_e {
            break;
        }
        if attack.incorrect(&current).is_empty() {
            break;
        }
        match attack.point(&mut x, &mut current, e, abs_df)? {
            Some(p) => {
                log::debug!("point {e}: accepted iterate {} at accuracy {}", p.accepted_iteration, p.best_accuracy);
                points.push(p);
            }
            None => skipped.push(e),
        }
    }
    if cfg.n_e > 0 && points.is_empty() && !skipped.is_empty() {
        return Err(Error::Data(format!(
            "all {} candidate points have a zero influence gradient",
            skipped.len()
        )));
    }

    let mut full = train.features().clone();
    for (c, &j) in cols.iter().enumerate() {
        full.set_column(j, &x.column(c));
    }
    let enhanced = finish(train, full, "cross", cfg.lambda)?;
    let eval = cfg.evaluate.then(|| {
        let mut o = evaluation_options(cfg.eval_folds, cfg.seed, cfg.stratified);
        o.feature_fraction = Some(cfg.feature_fraction);
        o
    });
    let enhancement = assemble(train, enhanced, Vec::new(), &cfg.model, eval, serde_json::to_value(cfg).unwrap())?;
    let reselected = |ds: &Dataset| -> Result<f64> {
        let m = models::fit_masked(&cfg.model, ds, &select_features(ds, cfg.feature_fraction)?)?;
        models::accuracy(&m, gen.features(), gen.labels())
    };
    let trace = CrossTrace {
        mask: cols,
        gen_accuracy_best: current.accuracy,
        points,
        skipped,
        gen_accuracy_original,
        gen_accuracy_reselected_original: reselected(train)?,
        gen_accuracy_reselected_enhanced: reselected(&enhancement.enhanced)?,
        within_accuracy_original: enhancement.accuracy_original,
        within_accuracy_enhanced: enhancement.accuracy_enhanced,
        gen_hash: gen_hash.clone(),
    };
    if gen.content_hash() != gen_hash {
        return Err(Error::Data("generalization dataset changed during the attack".into()));
    }
    Ok(CrossResult { enhancement, trace })
}

/// One generalization-set size of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub size: usize,
    /// Best generalization accuracy under the attack's mask, per repeat.
    pub best_accuracy: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
}

/// Repeats the attack on random generalization subsets of each size.
pub fn sweep_generalization_size(
    train: &Dataset,
    gen_pool: &Dataset,
    sizes: &[usize],
    repeats: usize,
    cfg: &CrossConfig,
) -> Result<Vec<SweepRow>> {
    if repeats == 0 {
        return Err(Error::config("repeats must be at least 1"));
    }
    if let Some(&s) = sizes.iter().find(|&&s| s > gen_pool.n_samples() || s == 0) {
        return Err(Error::config(format!(
            "generalization size {s} not in 1..={}",
            gen_pool.n_samples()
        )));
    }
    let cells: Vec<(usize, usize)> = sizes.iter().flat_map(|&s| (0..repeats).map(move |r| (s, r))).collect();
    let quiet = CrossConfig {
        evaluate: false,
        ..cfg.clone()
    };
    let best: Vec<f64> = cells
        .par_iter()
        .map(|&(size, r)| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &format!("sweep/{size}/{r}")));
            let mut rows = sample(&mut rng, gen_pool.n_samples(), size).into_vec();
            rows.sort_unstable();
            let gen = gen_pool.select_rows(&rows)?;
            let out = enhance_cross(train, &gen, &quiet).map_err(|e| e.context(format!("size {size}, repeat {r}")))?;
            Ok(out.trace.gen_accuracy_best)
        })
        .collect::<Result<_>>()?;
    Ok(sizes
        .iter()
        .enumerate()
        .map(|(i, &size)| {
            let vals = best[i * repeats..(i + 1) * repeats].to_vec();
            let mean = vals.iter().sum::<f64>() / repeats as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / repeats as f64).sqrt();
            SweepRow {
                size,
                best_accuracy: vals,
                mean,
                sd,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, Role, SyntheticRecipe};

    fn pair(seed: u64) -> (Dataset, Dataset) {
        let recipe = SyntheticRecipe {
            n_per_class: vec![20, 20],
            n_features: 40,
            class_shift: 0.6,
            noise_sd: 1.0,
            seed,
            block_offset: 0,
        };
        let train = generate_synthetic(&recipe).unwrap();
        let gen = generate_synthetic(&SyntheticRecipe {
            seed: seed + 1,
            block_offset: 10,
            ..recipe
        })
        .unwrap()
        .derived("gen", Role::Generalization, "");
        (train, gen)
    }

    fn small(kind: ModelSpec) -> CrossConfig {
        CrossConfig {
            n_e: 4,
            iter_max: 3,
            lambda: 0.5,
            feature_fraction: 0.5,
            model: kind,
            selection_folds: 4,
            eval_folds: 4,
            ..Default::default()
        }
    }

    #[test]
    fn ordering_puts_boundary_points_first_and_is_a_permutation() {
        let (train, _) = pair(1);
        let spec = ModelSpec::linear_svm(1.0);
        let all = select_enhancement_points(&train, &spec, 40, 4, 3).unwrap();
        let mut sorted = all.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..40).collect::<Vec<_>>());
        let ranked = ranked_candidates(&train, &spec, 40, 4, 3, true).unwrap();
        assert!(ranked.windows(2).all(|w| w[0].1 <= w[1].1));
        assert_eq!(&select_enhancement_points(&train, &spec, 5, 4, 3).unwrap()[..], &all[..5]);
        assert!(select_enhancement_points(&train, &spec, 41, 4, 3).is_err());
    }

    #[test]
    fn zero_budget_is_an_identity() {
        let (train, gen) = pair(2);
        let out = enhance_cross(&train, &gen, &CrossConfig { n_e: 0, ..small(ModelSpec::linear_svm(1.0)) }).unwrap();
        assert_eq!(out.enhancement.enhanced.features(), train.features());
        assert_eq!(out.trace.gen_accuracy_best, out.trace.gen_accuracy_original);
        assert_eq!(out.trace.gen_accuracy_reselected_enhanced, out.trace.gen_accuracy_reselected_original);
        assert!(out.trace.points.is_empty());
    }

    fn check_invariants(train: &Dataset, gen: &Dataset, out: &CrossResult, n_e: usize) {
        assert_eq!(gen.content_hash(), out.trace.gen_hash);
        let changed: Vec<usize> = (0..train.n_samples())
            .filter(|&i| out.enhancement.enhanced.features().row(i) != train.features().row(i))
            .collect();
        assert!(changed.len() <= n_e, "{changed:?}");
        for i in &changed {
            assert!(out.trace.points.iter().any(|p| p.index == *i));
        }
        let mut last = out.trace.gen_accuracy_original;
        for p in &out.trace.points {
            assert!(p.best_accuracy >= p.accuracy[0]);
            assert!(p.best_accuracy >= last);
            assert_eq!(p.best_accuracy, p.accuracy[p.accepted_iteration]);
            last = p.best_accuracy;
        }
        assert_eq!(last, out.trace.gen_accuracy_best);
        // columns outside the mask never move
        for j in 0..train.n_features() {
            if !out.trace.mask.contains(&j) {
                assert_eq!(out.enhancement.enhanced.features().column(j), train.features().column(j));
            }
        }
    }

    #[test]
    fn linear_attacks_respect_the_invariants() {
        let (train, gen) = pair(3);
        for spec in [ModelSpec::linear_svm(1.0), ModelSpec::logistic(1.0)] {
            let cfg = small(spec);
            let out = enhance_cross(&train, &gen, &cfg).unwrap();
            check_invariants(&train, &gen, &out, cfg.n_e);
        }
    }

    #[test]
    fn network_attack_respects_the_invariants() {
        let (train, gen) = pair(4);
        let spec = ModelSpec {
            layers: vec![0, 6, 0],
            inner_iters: 40,
            learning_rate: 0.5,
            ..ModelSpec::feed_forward_full_batch()
        };
        let cfg = CrossConfig {
            n_e: 2,
            iter_max: 2,
            ..small(spec)
        };
        let out = enhance_cross(&train, &gen, &cfg).unwrap();
        check_invariants(&train, &gen, &out, cfg.n_e);
    }

    #[test]
    fn rejects_bad_inputs() {
        let (train, gen) = pair(5);
        let cfg = small(ModelSpec::linear_svm(1.0));
        assert!(enhance_cross(&train, &gen, &CrossConfig { n_e: 41, ..cfg.clone() }).is_err());
        assert!(enhance_cross(&train, &gen, &CrossConfig { lambda: 0.0, ..cfg.clone() }).is_err());
        let adam = CrossConfig {
            model: ModelSpec::feed_forward(),
            ..cfg.clone()
        };
        assert!(matches!(enhance_cross(&train, &gen, &adam), Err(Error::Config(_))));
        let narrow = gen.select_columns(&[0, 1]).unwrap();
        assert!(enhance_cross(&train, &narrow, &cfg).is_err());
    }

    #[test]
    fn sweep_is_deterministic_and_checks_sizes() {
        let (train, gen) = pair(6);
        let cfg = CrossConfig {
            n_e: 2,
            iter_max: 2,
            ..small(ModelSpec::logistic(1.0))
        };
        let a = sweep_generalization_size(&train, &gen, &[10, 20], 1, &cfg).unwrap();
        let b = sweep_generalization_size(&train, &gen, &[10, 20], 1, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2);
        assert!(sweep_generalization_size(&train, &gen, &[41], 1, &cfg).is_err());
    }
}
