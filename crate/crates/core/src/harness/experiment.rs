use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{crossval_accuracy, CvOptions, CvSummary};
use super::seeds::derive_seed;
use crate::attack_cross::{enhance_cross, sweep_generalization_size, CrossConfig};
use crate::attack_method::{enhance_method, MethodConfig};
use crate::attack_within::{enhance_within, WithinConfig};
use crate::data::{
    feature_similarity, generate_synthetic, load_bundle, load_tabular, save_bundle, select_features, Dataset,
    Role, SyntheticRecipe,
};
use crate::models::{self, GradientObjective, ModelSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    WithinSweep,
    MethodGrid,
    CrossRun,
    CrossSizeSweep,
    TransferMatrix,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::WithinSweep => "within_sweep",
            ExperimentKind::MethodGrid => "method_grid",
            ExperimentKind::CrossRun => "cross_run",
            ExperimentKind::CrossSizeSweep => "cross_size_sweep",
            ExperimentKind::TransferMatrix => "transfer_matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticRecipe),
    /// A directory written by [`save_bundle`].
    Bundle(PathBuf),
    Csv { path: PathBuf, label_column: String },
}

impl DataSource {
    /// Relative paths resolve against `base`.
    pub fn load(&self, base: &Path, role: Role) -> Result<Dataset> {
        let ds = match self {
            DataSource::Synthetic(r) => generate_synthetic(r)?,
            DataSource::Bundle(p) => load_bundle(base.join(p))?,
            DataSource::Csv { path, label_column } => load_tabular(base.join(path), label_column)?,
        };
        Ok(if ds.role == role {
            ds
        } else {
            let name = ds.name.clone();
            ds.derived(name, role, "")
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WithinSweepConfig {
    pub scales: Vec<f64>,
    pub n_folds: usize,
    pub objective: GradientObjective,
    pub stratified: bool,
}

impl Default for WithinSweepConfig {
    fn default() -> Self {
        WithinSweepConfig {
            scales: vec![0.0, 1.0, 2.0, 3.0],
            n_folds: 10,
            objective: GradientObjective::Loss,
            stratified: true,
        }
    }
}

/// `lambdas × etas` grid of method attacks; each of the experiment's
/// `models` is held down in turn.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MethodGridConfig {
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
    /// Attack settings; `f2`, `lambda`, `eta` and `seed` are set per cell.
    pub base: MethodConfig,
}

impl Default for MethodGridConfig {
    fn default() -> Self {
        MethodGridConfig {
            lambdas: vec![0.5, 1.0, 2.0],
            etas: vec![0.0, 0.5, 1.0],
            base: MethodConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizeSweepConfig {
    pub sizes: Vec<usize>,
    pub repeats: usize,
}

impl Default for SizeSweepConfig {
    fn default() -> Self {
        SizeSweepConfig {
            sizes: vec![100, 200, 400],
            repeats: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransferConfig {
    /// Within-dataset attack scale applied by every source model.
    pub scale: f64,
    pub within: WithinSweepConfig,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            scale: 3.0,
            within: WithinSweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_id")]
    pub id: String,
    pub kind: ExperimentKind,
    /// Training data, or the dataset under attack.
    pub data: DataSource,
    /// Generalization data for cross-dataset kinds.
    #[serde(default)]
    pub gen: Option<DataSource>,
    /// Attacked models (the held-down `f2` models for method grids).
    pub models: Vec<ModelSpec>,
    /// Models every result is evaluated on; empty means each attacked
    /// model evaluates its own attack.
    #[serde(default)]
    pub eval_models: Vec<ModelSpec>,
    /// Fold seeds of the evaluation cross-validation.
    #[serde(default = "default_eval_seeds")]
    pub eval_seeds: Vec<u64>,
    /// Model initialization seeds paired with `eval_seeds`.
    #[serde(default)]
    pub eval_model_seeds: Vec<u64>,
    #[serde(default = "default_folds")]
    pub eval_folds: usize,
    /// Master seed; every attack seed derives from it.
    #[serde(default)]
    pub seed: u64,
    /// Defaults to `$ENHANCE_OUTPUT_ROOT/<id>`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Fill the `seconds` column of `results.csv`, which then differs
    /// between runs.
    #[serde(default)]
    pub record_timing: bool,
    /// Write every enhanced dataset as a bundle under `enhanced/`.
    #[serde(default)]
    pub save_datasets: bool,
    #[serde(default)]
    pub within: Option<WithinSweepConfig>,
    #[serde(default)]
    pub method: Option<MethodGridConfig>,
    #[serde(default)]
    pub cross: Option<CrossConfig>,
    #[serde(default)]
    pub sweep: Option<SizeSweepConfig>,
    #[serde(default)]
    pub transfer: Option<TransferConfig>,
}

fn default_id() -> String {
    "experiment".into()
}
fn default_eval_seeds() -> Vec<u64> {
    vec![0]
}
fn default_folds() -> usize {
    10
}

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "ENHANCE_OUTPUT_ROOT";

impl ExperimentConfig {
    pub fn new(id: impl Into<String>, kind: ExperimentKind, data: DataSource, models: Vec<ModelSpec>) -> Self {
        ExperimentConfig {
            id: id.into(),
            kind,
            data,
            gen: None,
            models,
            eval_models: Vec::new(),
            eval_seeds: default_eval_seeds(),
            eval_model_seeds: Vec::new(),
            eval_folds: default_folds(),
            seed: 0,
            output_dir: None,
            record_timing: false,
            save_datasets: false,
            within: None,
            method: None,
            cross: None,
            sweep: None,
            transfer: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['/', '\\']) {
            return Err(Error::config(format!("experiment id {:?} is not a plain name", self.id)));
        }
        if self.models.is_empty() {
            return Err(Error::config("at least one model is required"));
        }
        for m in self.models.iter().chain(&self.eval_models) {
            m.validate()?;
        }
        self.cv_options().validate()?;
        let missing = |what: &str| Error::config(format!("{} needs a `{what}` section", self.kind.name()));
        match self.kind {
            ExperimentKind::WithinSweep => {
                let w = self.within.as_ref().ok_or_else(|| missing("within"))?;
                if w.scales.is_empty() {
                    return Err(Error::config("within.scales is empty"));
                }
            }
            ExperimentKind::MethodGrid => {
                let m = self.method.as_ref().ok_or_else(|| missing("method"))?;
                if m.lambdas.is_empty() || m.etas.is_empty() {
                    return Err(Error::config("method grid needs lambdas and etas"));
                }
                m.base.validate()?;
            }
            ExperimentKind::CrossRun | ExperimentKind::CrossSizeSweep => {
                self.gen.as_ref().ok_or_else(|| missing("gen"))?;
                self.cross.as_ref().ok_or_else(|| missing("cross"))?.validate()?;
                if self.kind == ExperimentKind::CrossSizeSweep {
                    let s = self.sweep.as_ref().ok_or_else(|| missing("sweep"))?;
                    if s.sizes.is_empty() || s.repeats == 0 {
                        return Err(Error::config("sweep needs sizes and at least one repeat"));
                    }
                }
            }
            ExperimentKind::TransferMatrix => {
                self.transfer.as_ref().ok_or_else(|| missing("transfer"))?;
            }
        }
        Ok(())
    }

    pub fn cv_options(&self) -> CvOptions {
        CvOptions {
            n_folds: self.eval_folds,
            fold_seeds: self.eval_seeds.clone(),
            model_seeds: self.eval_model_seeds.clone(),
            stratified: true,
            feature_fraction: None,
        }
    }

    pub fn resolved_output_dir(&self) -> PathBuf {
        match &self.output_dir {
            Some(p) => p.clone(),
            None => {
                let root = std::env::var_os(OUTPUT_ROOT_VAR).map(PathBuf::from).unwrap_or_else(|| "enhance-output".into());
                root.join(&self.id)
            }
        }
    }

    fn eval_specs(&self) -> Vec<(String, ModelSpec)> {
        let specs = if self.eval_models.is_empty() { &self.models } else { &self.eval_models };
        labelled(specs)
    }

    /// Human-readable list of the cells a run would compute.
    pub fn plan(&self) -> Vec<String> {
        let sources = labelled(&self.models);
        let evals: Vec<String> = self.eval_specs().into_iter().map(|(l, _)| l).collect();
        let mut out = vec![format!(
            "experiment {} ({}), output {}",
            self.id,
            self.kind.name(),
            self.resolved_output_dir().display()
        )];
        let cells: Vec<String> = match self.kind {
            ExperimentKind::WithinSweep => {
                let w = self.within.clone().unwrap_or_default();
                sources
                    .iter()
                    .flat_map(|(l, _)| w.scales.iter().map(move |s| format!("within attack by {l}, scale {s}")))
                    .collect()
            }
            ExperimentKind::MethodGrid => {
                let m = self.method.clone().unwrap_or_default();
                let mut v = Vec::new();
                for (l, _) in &sources {
                    for lam in &m.lambdas {
                        for eta in &m.etas {
                            v.push(format!("method attack against {l}, lambda {lam}, eta {eta}"));
                        }
                    }
                }
                v
            }
            ExperimentKind::CrossRun => sources.iter().map(|(l, _)| format!("cross attack by {l}")).collect(),
            ExperimentKind::CrossSizeSweep => {
                let s = self.sweep.clone().unwrap_or_default();
                sources
                    .iter()
                    .map(|(l, _)| format!("size sweep by {l}: sizes {:?}, {} repeats", s.sizes, s.repeats))
                    .collect()
            }
            ExperimentKind::TransferMatrix => {
                let t = self.transfer.clone().unwrap_or_default();
                sources.iter().map(|(l, _)| format!("within attack by {l}, scale {}", t.scale)).collect()
            }
        };
        out.extend(cells.into_iter().map(|c| format!("  {c}")));
        out.push(format!("  evaluated on {}", evals.join(", ")));
        out
    }
}

/// Short names, suffixed with the position when a name repeats.
fn labelled(specs: &[ModelSpec]) -> Vec<(String, ModelSpec)> {
    specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let name = s.kind.short_name();
            let dup = specs.iter().filter(|o| o.kind == s.kind).count() > 1;
            (if dup { format!("{name}{i}") } else { name.to_string() }, s.clone())
        })
        .collect()
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub experiment_id: String,
    pub attack_kind: String,
    pub source_model: String,
    pub eval_model: String,
    /// Attack parameters, kept in name order.
    pub params: BTreeMap<String, String>,
    pub acc_mean: f64,
    pub acc_sd: f64,
    pub similarity_r: Option<f64>,
    pub seconds: f64,
}

impl ResultRecord {
    fn new(kind: &str, source: &str, eval: &str, params: &[(&str, String)], acc: &CvSummary) -> Self {
        ResultRecord {
            experiment_id: String::new(),
            attack_kind: kind.into(),
            source_model: source.into(),
            eval_model: eval.into(),
            params: params.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            acc_mean: acc.mean,
            acc_sd: acc.sd,
            similarity_r: None,
            seconds: 0.0,
        }
    }

    /// `name=value` pairs joined by `;`.
    pub fn params_field(&self) -> String {
        self.params.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }
}

/// Column order of `results.csv`.
pub const RESULT_COLUMNS: [&str; 9] = [
    "experiment_id",
    "attack_kind",
    "source_model",
    "eval_model",
    "params",
    "acc_mean",
    "acc_sd",
    "similarity_r",
    "seconds",
];

/// Writes records in the given order; `seconds` stays empty unless
/// `timing` is set.
pub fn write_results(path: &Path, records: &[ResultRecord], timing: bool) -> Result<()> {
    let io = |e: csv::Error| Error::io(format!("writing {}", path.display()), std::io::Error::other(e));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(RESULT_COLUMNS).map_err(io)?;
    for r in records {
        let sim = r.similarity_r.map(|v| v.to_string()).unwrap_or_default();
        let secs = if timing { format!("{:.3}", r.seconds) } else { String::new() };
        w.write_record([
            r.experiment_id.as_str(),
            &r.attack_kind,
            &r.source_model,
            &r.eval_model,
            &r.params_field(),
            &r.acc_mean.to_string(),
            &r.acc_sd.to_string(),
            &sim,
            &secs,
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let parse = |m: String| Error::Parse {
        path: path.to_path_buf(),
        message: m,
    };
    let mut rd = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(format!("reading {}", path.display()), io),
        other => parse(format!("{other:?}")),
    })?;
    let header = rd.headers().map_err(|e| parse(e.to_string()))?.clone();
    if header.iter().ne(RESULT_COLUMNS) {
        return Err(parse("unexpected results header".into()));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(|e| parse(e.to_string()))?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| parse(format!("row {}: bad number {:?}", line + 2, &row[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> { if row[i].is_empty() { Ok(None) } else { num(i).map(Some) } };
        let mut params = BTreeMap::new();
        for pair in row[4].split(';').filter(|p| !p.is_empty()) {
            let (k, v) = pair
                .split_once('=')
                .ok_or_else(|| parse(format!("row {}: bad parameter {pair:?}", line + 2)))?;
            params.insert(k.to_string(), v.to_string());
        }
        out.push(ResultRecord {
            experiment_id: row[0].to_string(),
            attack_kind: row[1].to_string(),
            source_model: row[2].to_string(),
            eval_model: row[3].to_string(),
            params,
            acc_mean: num(5)?,
            acc_sd: num(6)?,
            similarity_r: opt(7)?,
            seconds: opt(8)?.unwrap_or(0.0),
        });
    }
    Ok(out)
}

/// Source label of the unattacked baseline.
pub const BASELINE: &str = "none";

/// Cross-validated accuracy of every eval spec on the original data and
/// on every attacked dataset.
pub fn transfer_matrix(
    original: &Dataset,
    attack_outputs: &BTreeMap<String, Dataset>,
    eval_specs: &[ModelSpec],
    cv: &CvOptions,
) -> Result<Vec<ResultRecord>> {
    for (name, ds) in attack_outputs {
        if ds.n_samples() != original.n_samples()
            || ds.n_features() != original.n_features()
            || ds.labels() != original.labels()
        {
            return Err(Error::data(format!("attacked dataset {name} does not match the original's shape")));
        }
    }
    let evals = labelled(eval_specs);
    let mut sources: Vec<(&str, &Dataset)> = vec![(BASELINE, original)];
    sources.extend(attack_outputs.iter().map(|(k, v)| (k.as_str(), v)));
    let cells: Vec<(usize, usize)> = (0..sources.len()).flat_map(|s| (0..evals.len()).map(move |e| (s, e))).collect();
    cells
        .par_iter()
        .map(|&(s, e)| {
            let (src, ds) = sources[s];
            let start = Instant::now();
            let acc = crossval_accuracy(ds, &evals[e].1, cv).map_err(|err| err.context(format!("{src} on {}", evals[e].0)))?;
            let mut rec = ResultRecord::new("transfer", src, &evals[e].0, &[], &acc);
            rec.similarity_r = Some(feature_similarity(original, ds)?);
            rec.seconds = start.elapsed().as_secs_f64();
            Ok(rec)
        })
        .collect()
}

/// Everything a run produced.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ResultRecord>,
    pub output_dir: PathBuf,
}

/// Runs `cfg`, writing `results.csv`, `config_echo.json`, `traces/` and
/// `plots/` under the output directory. A failure also leaves
/// `error.json` there.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    for sub in ["", "traces"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(format!("creating {}", p.display()), e))?;
    }
    let echo = serde_json::to_string_pretty(cfg).expect("config serializes");
    write_file(&dir.join("config_echo.json"), (echo + "\n").as_bytes())?;
    match run_cells(cfg, &dir) {
        Ok(mut records) => {
            for r in &mut records {
                r.experiment_id.clone_from(&cfg.id);
            }
            write_results(&dir.join("results.csv"), &records, cfg.record_timing)?;
            super::plots::export_plots(&dir, &dir.join("plots"))?;
            Ok(ExperimentOutput { records, output_dir: dir })
        }
        Err(err) => {
            let record = serde_json::json!({
                "experiment_id": cfg.id,
                "kind": cfg.kind.name(),
                "category": error_category(&err),
                "message": err.to_string(),
            });
            let text = serde_json::to_string_pretty(&record).expect("error record serializes") + "\n";
            // the original error matters more than a failure to record it
            let _ = fs::write(dir.join("error.json"), text);
            Err(err)
        }
    }
}

/// `config`, `numerical` or `io`.
pub fn error_category(err: &Error) -> &'static str {
    if err.is_numerical() {
        "numerical"
    } else if err.is_io() {
        "io"
    } else {
        "config"
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn write_jsonl<T: Serialize>(path: &Path, items: impl IntoIterator<Item = T>) -> Result<()> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, &it).expect("trace serializes");
        buf.write_all(b"\n").expect("writing to memory");
    }
    write_file(path, &buf)
}

fn fmt_param(v: f64) -> String {
    v.to_string()
}

fn run_cells(cfg: &ExperimentConfig, dir: &Path) -> Result<Vec<ResultRecord>> {
    let base = Path::new(".");
    let data = cfg.data.load(base, Role::Original)?;
    let cv = cfg.cv_options();
    let sources = labelled(&cfg.models);
    let evals = cfg.eval_specs();
    let diagonal_only = cfg.eval_models.is_empty();
    let child = |label: &str, what: &str| derive_seed(cfg.seed, &format!("{}/{label}/{what}", cfg.id));
    let save = |name: &str, ds: &Dataset| -> Result<()> {
        if cfg.save_datasets {
            save_bundle(ds, dir.join("enhanced").join(name))?;
        }
        Ok(())
    };

    match cfg.kind {
        ExperimentKind::WithinSweep => {
            let w = cfg.within.as_ref().unwrap();
            let cells: Vec<(usize, f64)> =
                (0..sources.len()).flat_map(|s| w.scales.iter().map(move |&x| (s, x))).collect();
            let per_cell = cells
                .par_iter()
                .map(|&(s, scale)| -> Result<Vec<ResultRecord>> {
                    let (label, spec) = &sources[s];
                    let start = Instant::now();
                    let attack = WithinConfig {
                        n_folds: w.n_folds,
                        scale,
                        objective: w.objective,
                        model: spec.clone(),
                        seed: child(label, "within"),
                        stratified: w.stratified,
                        evaluate: false,
                    };
                    let out = enhance_within(&data, &attack).map_err(|e| e.context(format!("within attack by {label}")))?;
                    let tag = format!("within_{label}_scale={scale}");
                    write_jsonl(&dir.join("traces").join(format!("{tag}.jsonl")), &out.per_fold_trace)?;
                    save(&tag, &out.enhanced)?;
                    let targets: Vec<&(String, ModelSpec)> = if diagonal_only {
                        vec![&sources[s]]
                    } else {
                        evals.iter().collect()
                    };
                    let mut recs = Vec::new();
                    for (elabel, espec) in targets {
                        let acc = crossval_accuracy(&out.enhanced, espec, &cv)?;
                        let mut r = ResultRecord::new("within", label, elabel, &[("scale", fmt_param(scale))], &acc);
                        r.similarity_r = Some(out.similarity_r);
                        r.seconds = start.elapsed().as_secs_f64();
                        recs.push(r);
                    }
                    Ok(recs)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_cell.into_iter().flatten().collect())
        }
        ExperimentKind::MethodGrid => {
            let m = cfg.method.as_ref().unwrap();
            let f1_label = m.base.f1.kind.short_name();
            let mut cells = Vec::new();
            for s in 0..sources.len() {
                for &lam in &m.lambdas {
                    for &eta in &m.etas {
                        cells.push((s, lam, eta));
                    }
                }
            }
            let per_cell = cells
                .par_iter()
                .map(|&(s, lambda, eta)| -> Result<Vec<ResultRecord>> {
                    let (label, f2) = &sources[s];
                    let start = Instant::now();
                    let attack = MethodConfig {
                        f2: f2.clone(),
                        lambda,
                        eta,
                        seed: child(label, "method"),
                        evaluate: false,
                        ..m.base.clone()
                    };
                    let out = enhance_method(&data, &attack).map_err(|e| e.context(format!("method attack against {label}")))?;
                    let tag = format!("method_{label}_eta={eta}_lambda={lambda}");
                    write_jsonl(&dir.join("traces").join(format!("{tag}.jsonl")), &out.enhancement.per_fold_trace)?;
                    save(&tag, &out.enhancement.enhanced)?;
                    let targets: Vec<(String, ModelSpec)> = if diagonal_only {
                        vec![(f1_label.to_string(), m.base.f1.clone()), sources[s].clone()]
                    } else {
                        evals.clone()
                    };
                    let params = [("eta", fmt_param(eta)), ("f2", label.clone()), ("lambda", fmt_param(lambda))];
                    let mut recs = Vec::new();
                    for (elabel, espec) in &targets {
                        let acc = crossval_accuracy(&out.enhancement.enhanced, espec, &cv)?;
                        let mut r = ResultRecord::new("method", f1_label, elabel, &params, &acc);
                        r.similarity_r = Some(out.enhancement.similarity_r);
                        r.seconds = start.elapsed().as_secs_f64();
                        recs.push(r);
                    }
                    Ok(recs)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_cell.into_iter().flatten().collect())
        }
        ExperimentKind::CrossRun => {
            let gen = cfg.gen.as_ref().unwrap().load(base, Role::Generalization)?;
            let cross = cfg.cross.as_ref().unwrap();
            let runs = sources
                .par_iter()
                .map(|(label, spec)| -> Result<(String, Dataset, f64, f64)> {
                    let start = Instant::now();
                    let attack = CrossConfig {
                        model: spec.clone(),
                        seed: child(label, "cross"),
                        ..cross.clone()
                    };
                    let out = enhance_cross(&data, &gen, &attack).map_err(|e| e.context(format!("cross attack by {label}")))?;
                    let tag = format!("cross_{label}");
                    write_jsonl(&dir.join("traces").join(format!("{tag}.jsonl")), &out.trace.points)?;
                    let mut summary = serde_json::to_value(&out.trace).expect("trace serializes");
                    summary.as_object_mut().unwrap().remove("points");
                    let text = serde_json::to_string_pretty(&summary).expect("trace serializes") + "\n";
                    write_file(&dir.join("traces").join(format!("{tag}_summary.json")), text.as_bytes())?;
                    save(&tag, &out.enhancement.enhanced)?;
                    Ok((label.clone(), out.enhancement.enhanced, out.enhancement.similarity_r, start.elapsed().as_secs_f64()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut sets: Vec<(String, &Dataset, Option<f64>, f64)> = vec![(BASELINE.into(), &data, None, 0.0)];
            sets.extend(runs.iter().map(|(l, d, r, t)| (l.clone(), d, Some(*r), *t)));
            let fraction = cross.feature_fraction;
            let cells: Vec<(usize, usize)> = (0..sets.len()).flat_map(|s| (0..evals.len()).map(move |e| (s, e))).collect();
            let per_cell = cells
                .par_iter()
                .map(|&(s, e)| -> Result<Vec<ResultRecord>> {
                    let (src, ds, sim, secs) = &sets[s];
                    let (elabel, espec) = &evals[e];
                    if diagonal_only && src != BASELINE && src != elabel {
                        return Ok(Vec::new());
                    }
                    let gen_acc = generalization_accuracy(ds, &gen, espec, fraction, &cfg.eval_model_seeds)?;
                    let within = crossval_accuracy(ds, espec, &CvOptions { feature_fraction: Some(fraction), ..cv.clone() })?;
                    let mut out = Vec::new();
                    for (metric, acc) in [("generalization", gen_acc), ("within", within)] {
                        let mut r = ResultRecord::new("cross", src, elabel, &[("metric", metric.to_string())], &acc);
                        r.similarity_r = *sim;
                        r.seconds = *secs;
                        out.push(r);
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_cell.into_iter().flatten().collect())
        }
        ExperimentKind::CrossSizeSweep => {
            let pool = cfg.gen.as_ref().unwrap().load(base, Role::Generalization)?;
            let cross = cfg.cross.as_ref().unwrap();
            let sweep = cfg.sweep.as_ref().unwrap();
            let per_model = sources
                .iter()
                .map(|(label, spec)| -> Result<Vec<ResultRecord>> {
                    let start = Instant::now();
                    let attack = CrossConfig {
                        model: spec.clone(),
                        seed: child(label, "cross_sweep"),
                        ..cross.clone()
                    };
                    let rows = sweep_generalization_size(&data, &pool, &sweep.sizes, sweep.repeats, &attack)
                        .map_err(|e| e.context(format!("size sweep by {label}")))?;
                    write_jsonl(&dir.join("traces").join(format!("cross_size_{label}.jsonl")), &rows)?;
                    let secs = start.elapsed().as_secs_f64();
                    Ok(rows
                        .iter()
                        .map(|row| {
                            let acc = CvSummary::from_values(row.best_accuracy.clone());
                            let mut r = ResultRecord::new("cross_size", label, label, &[("size", row.size.to_string())], &acc);
                            r.seconds = secs;
                            r
                        })
                        .collect())
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(per_model.into_iter().flatten().collect())
        }
        ExperimentKind::TransferMatrix => {
            let t = cfg.transfer.as_ref().unwrap();
            let outs = sources
                .par_iter()
                .map(|(label, spec)| -> Result<(String, Dataset)> {
                    let attack = WithinConfig {
                        n_folds: t.within.n_folds,
                        scale: t.scale,
                        objective: t.within.objective,
                        model: spec.clone(),
                        seed: child(label, "within"),
                        stratified: t.within.stratified,
                        evaluate: false,
                    };
                    let out = enhance_within(&data, &attack).map_err(|e| e.context(format!("within attack by {label}")))?;
                    let tag = format!("transfer_{label}");
                    write_jsonl(&dir.join("traces").join(format!("{tag}.jsonl")), &out.per_fold_trace)?;
                    save(&tag, &out.enhanced)?;
                    Ok((label.clone(), out.enhanced))
                })
                .collect::<Result<BTreeMap<_, _>>>()?;
            let eval_specs: Vec<ModelSpec> = if cfg.eval_models.is_empty() {
                cfg.models.clone()
            } else {
                cfg.eval_models.clone()
            };
            let mut recs = transfer_matrix(&data, &outs, &eval_specs, &cv)?;
            for r in &mut recs {
                r.params.insert("scale".into(), fmt_param(t.scale));
            }
            Ok(recs)
        }
    }
}

/// Accuracy on `gen` of `spec` trained on `train` with features selected
/// on `train`, over the given initialization seeds.
pub fn generalization_accuracy(
    train: &Dataset,
    gen: &Dataset,
    spec: &ModelSpec,
    feature_fraction: f64,
    model_seeds: &[u64],
) -> Result<CvSummary> {
    let mask = select_features(train, feature_fraction)?;
    let seeds = if model_seeds.is_empty() { vec![spec.seed] } else { model_seeds.to_vec() };
    let vals = seeds
        .iter()
        .map(|&s| {
            let spec = ModelSpec { seed: s, ..spec.clone() };
            let m = models::fit_masked(&spec, train, &mask)?;
            models::accuracy(&m, gen.features(), gen.labels())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CvSummary::from_values(vals))
}

/// Evaluates the original data and every saved bundle under `enhanced/`
/// with each eval model, writing `evaluation.csv`.
pub fn evaluate_saved(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    cfg.validate()?;
    let dir = cfg.resolved_output_dir();
    let data = cfg.data.load(Path::new("."), Role::Original)?;
    let enhanced_dir = dir.join("enhanced");
    let entries = fs::read_dir(&enhanced_dir)
        .map_err(|e| Error::io(format!("reading {}", enhanced_dir.display()), e))?;
    let mut outs = BTreeMap::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(format!("reading {}", enhanced_dir.display()), e))?;
        if entry.path().join("meta.json").is_file() {
            let name = entry.file_name().to_string_lossy().into_owned();
            outs.insert(name, load_bundle(entry.path())?);
        }
    }
    if outs.is_empty() {
        return Err(Error::config(format!("no enhanced datasets under {}", enhanced_dir.display())));
    }
    let specs: Vec<ModelSpec> = if cfg.eval_models.is_empty() { cfg.models.clone() } else { cfg.eval_models.clone() };
    let mut recs = transfer_matrix(&data, &outs, &specs, &cfg.cv_options())?;
    for r in &mut recs {
        r.experiment_id.clone_from(&cfg.id);
        r.attack_kind = "evaluate".into();
    }
    write_results(&dir.join("evaluation.csv"), &recs, cfg.record_timing)?;
    Ok(recs)
}

/// Materializes the configured data sources as bundles under `data/`.
pub fn generate_data(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let dir = cfg.resolved_output_dir().join("data");
    let mut written = vec![save_bundle(&cfg.data.load(Path::new("."), Role::Original)?, dir.join("train"))?];
    if let Some(g) = &cfg.gen {
        written.push(save_bundle(&g.load(Path::new("."), Role::Generalization)?, dir.join("gen"))?);
    }
    Ok(written)
}
