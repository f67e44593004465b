//! Tidy CSV tables, one row per plotted point, built from a run directory.

use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::{read_results, ResultRecord};
use crate::attack_cross::{CrossTrace, PointTrace};
use crate::{Error, Result};

fn io_err(path: &Path, e: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Error {
    Error::io(format!("writing {}", path.display()), std::io::Error::other(e))
}

fn write_table(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn param(r: &ResultRecord, k: &str) -> String {
    r.params.get(k).cloned().unwrap_or_default()
}

fn sim(r: &ResultRecord) -> String {
    r.similarity_r.map(|v| v.to_string()).unwrap_or_default()
}

fn of<'a>(records: &'a [ResultRecord], kinds: &'a [&str]) -> impl Iterator<Item = &'a ResultRecord> {
    records.iter().filter(move |r| kinds.contains(&r.attack_kind.as_str()))
}

/// Writes the plot tables for `run_dir` into `out_dir` and returns their
/// paths. Tables without rows are not written.
///
/// - `within.csv`: accuracy and similarity against attack scale, per source
///   and evaluated model (within sweeps and transfer matrices).
/// - `method.csv`: accuracy against `lambda` per `eta` and held-down model.
/// - `cross_points.csv`: generalization accuracy against enhanced points.
/// - `cross_transfer.csv`: generalization and within-dataset accuracy per
///   source and evaluated model.
/// - `cross_size.csv`: best accuracy against generalization-set size.
pub fn export_plots(run_dir: &Path, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let results = run_dir.join("results.csv");
    let mut records = read_results(&results)?;
    let evaluation = run_dir.join("evaluation.csv");
    if evaluation.is_file() {
        records.extend(read_results(&evaluation)?);
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(format!("creating {}", out_dir.display()), e))?;
    let mut written = Vec::new();
    let mut emit = |name: &str, header: &[&str], rows: Vec<Vec<String>>| -> Result<()> {
        if !rows.is_empty() {
            let p = out_dir.join(name);
            write_table(&p, header, &rows)?;
            written.push(p);
        }
        Ok(())
    };

    emit(
        "within.csv",
        &["experiment_id", "attack_kind", "source_model", "eval_model", "scale", "acc_mean", "acc_sd", "similarity_r"],
        of(&records, &["within", "transfer", "evaluate"])
            .map(|r| {
                vec![
                    r.experiment_id.clone(),
                    r.attack_kind.clone(),
                    r.source_model.clone(),
                    r.eval_model.clone(),
                    param(r, "scale"),
                    r.acc_mean.to_string(),
                    r.acc_sd.to_string(),
                    sim(r),
                ]
            })
            .collect(),
    )?;
    emit(
        "method.csv",
        &["experiment_id", "f1_model", "f2_model", "lambda", "eta", "eval_model", "acc_mean", "acc_sd", "similarity_r"],
        of(&records, &["method"])
            .map(|r| {
                vec![
                    r.experiment_id.clone(),
                    r.source_model.clone(),
                    param(r, "f2"),
                    param(r, "lambda"),
                    param(r, "eta"),
                    r.eval_model.clone(),
                    r.acc_mean.to_string(),
                    r.acc_sd.to_string(),
                    sim(r),
                ]
            })
            .collect(),
    )?;
    emit(
        "cross_transfer.csv",
        &["experiment_id", "source_model", "eval_model", "metric", "acc_mean", "acc_sd", "similarity_r"],
        of(&records, &["cross"])
            .map(|r| {
                vec![
                    r.experiment_id.clone(),
                    r.source_model.clone(),
                    r.eval_model.clone(),
                    param(r, "metric"),
                    r.acc_mean.to_string(),
                    r.acc_sd.to_string(),
                    sim(r),
                ]
            })
            .collect(),
    )?;
    emit(
        "cross_size.csv",
        &["experiment_id", "model", "size", "acc_mean", "acc_sd"],
        of(&records, &["cross_size"])
            .map(|r| {
                vec![
                    r.experiment_id.clone(),
                    r.source_model.clone(),
                    param(r, "size"),
                    r.acc_mean.to_string(),
                    r.acc_sd.to_string(),
                ]
            })
            .collect(),
    )?;
    emit(
        "cross_points.csv",
        &["model", "points_enhanced", "gen_accuracy", "within_accuracy"],
        cross_point_rows(&run_dir.join("traces"))?,
    )?;
    Ok(written)
}

/// Rows from `traces/cross_<model>.jsonl` and the matching summaries;
/// within-dataset accuracy is known only before and after the attack.
fn cross_point_rows(traces: &Path) -> Result<Vec<Vec<String>>> {
    let Ok(entries) = fs::read_dir(traces) else {
        return Ok(Vec::new());
    };
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter_map(|n| n.strip_suffix("_summary.json").and_then(|s| s.strip_prefix("cross_")).map(str::to_string))
        .collect();
    names.sort();
    let parse = |p: &Path, m: String| Error::Parse {
        path: p.to_path_buf(),
        message: m,
    };
    let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::io(format!("reading {}", p.display()), e));
    let mut rows = Vec::new();
    for model in names {
        let sp = traces.join(format!("cross_{model}_summary.json"));
        let mut summary: serde_json::Value = serde_json::from_str(&read(&sp)?).map_err(|e| parse(&sp, e.to_string()))?;
        summary["points"] = serde_json::Value::Array(Vec::new());
        let summary: CrossTrace = serde_json::from_value(summary).map_err(|e| parse(&sp, e.to_string()))?;
        let pp = traces.join(format!("cross_{model}.jsonl"));
        let points: Vec<PointTrace> = read(&pp)?
            .lines()
            .map(|l| serde_json::from_str(l).map_err(|e| parse(&pp, e.to_string())))
            .collect::<Result<_>>()?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        rows.push(vec![model.clone(), "0".into(), summary.gen_accuracy_original.to_string(), opt(summary.within_accuracy_original)]);
        for (i, p) in points.iter().enumerate() {
            let within = if i + 1 == points.len() { opt(summary.within_accuracy_enhanced) } else { String::new() };
            rows.push(vec![model.clone(), (i + 1).to_string(), p.best_accuracy.to_string(), within]);
        }
    }
    Ok(rows)
}
