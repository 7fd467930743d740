//! Report files: `summary.csv`, `comparison.csv` and `boxplot.csv`.

use std::path::Path;

use super::run::{collect, write_atomic, Manifest, MANIFEST};
use crate::error::{Error, Result};
use crate::metrics::{levene_test, mann_whitney_u, ExperimentReport};

pub(crate) fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}

fn strings<const N: usize>(xs: [&str; N]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Quantile with linear interpolation between order statistics
/// (`h = (n - 1) p`), the common default of statistics packages.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Five-number summary plus the points beyond 1.5 IQR from the quartiles.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub outliers: Vec<f64>,
}

pub fn box_stats(xs: &[f64]) -> Option<BoxStats> {
    if xs.is_empty() {
        return None;
    }
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let (q1, q3) = (quantile(&s, 0.25), quantile(&s, 0.75));
    let iqr = q3 - q1;
    let (lo, hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    Some(BoxStats {
        min: s[0],
        q1,
        median: quantile(&s, 0.5),
        q3,
        max: s[s.len() - 1],
        outliers: s.iter().copied().filter(|&x| x < lo || x > hi).collect(),
    })
}

/// Summarize the runs in `dir` and write the report files. The comparison
/// table tests every strategy against `baseline` (default: `default` when
/// present, else the first strategy).
pub fn report(dir: &Path, baseline: Option<&str>) -> Result<Vec<ExperimentReport>> {
    let manifest_path = dir.join(MANIFEST);
    if !manifest_path.exists() {
        return Err(Error::Empty(format!("{} holds no experiment", dir.display())));
    }
    let manifest: Manifest = serde_json::from_slice(&std::fs::read(manifest_path)?)?;
    let mut reports = Vec::new();
    for entry in &manifest.strategies {
        if let Some(r) = collect(dir, &manifest.config, entry)? {
            reports.push(r);
        }
    }
    if reports.is_empty() {
        return Err(Error::Empty(format!("{} holds no finished runs", dir.display())));
    }

    let summary: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.strategy.clone(),
                r.mean.to_string(),
                opt(r.std),
                r.normalized_cost.to_string(),
                r.results.len().to_string(),
                r.failed.len().to_string(),
            ]
        })
        .collect();
    write_csv(
        &dir.join("summary.csv"),
        &strings(["strategy", "mean", "std", "normalized_cost", "n_seeds", "n_failed"]),
        &summary,
    )?;

    let boxes: Vec<Vec<String>> = reports
        .iter()
        .filter_map(|r| {
            let b = box_stats(&r.scores())?;
            let outliers: Vec<String> = b.outliers.iter().map(f64::to_string).collect();
            Some(vec![
                r.strategy.clone(),
                b.min.to_string(),
                b.q1.to_string(),
                b.median.to_string(),
                b.q3.to_string(),
                b.max.to_string(),
                outliers.join(" "),
            ])
        })
        .collect();
    write_csv(&dir.join("boxplot.csv"), &strings(["strategy", "min", "q1", "median", "q3", "max", "outliers"]), &boxes)?;

    let base_id = match baseline {
        Some(b) => b.to_string(),
        None if reports.iter().any(|r| r.strategy == "default") => "default".into(),
        None => reports[0].strategy.clone(),
    };
    let base = reports
        .iter()
        .find(|r| r.strategy == base_id)
        .ok_or_else(|| Error::config(format!("baseline `{base_id}` has no results")))?;
    let base_scores = base.scores();
    let mut rows = Vec::new();
    for r in &reports {
        let scores = r.scores();
        if scores.is_empty() || base_scores.is_empty() {
            continue;
        }
        let mw = mann_whitney_u(&scores, &base_scores)?;
        let lev = levene_test(&scores, &base_scores).ok();
        rows.push(vec![
            r.strategy.clone(),
            base_id.clone(),
            (r.mean - base.mean).to_string(),
            opt(r.std.zip(base.std).map(|(a, b)| a - b)),
            mw.statistic.to_string(),
            mw.p.to_string(),
            opt(lev.map(|l| l.statistic)),
            opt(lev.map(|l| l.p)),
        ]);
    }
    write_csv(
        &dir.join("comparison.csv"),
        &strings(["strategy", "baseline", "mean_diff", "std_diff", "mwu_u", "mwu_p", "levene_w", "levene_p"]),
        &rows,
    )?;
    Ok(reports)
}
