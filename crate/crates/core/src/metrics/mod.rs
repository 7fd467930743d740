//! Scores, seed-sweep summaries, the cost model and significance tests.

mod cost;
mod stats;

use serde::{Deserialize, Serialize};

pub use cost::normalized_cost;
pub use stats::{levene_test, mann_whitney_u, TestResult};

use crate::error::{Error, Result};
use crate::param::exact_sum;

/// Unweighted mean of per-class F1. A class with no predictions and no gold
/// samples, or with neither precision nor recall, scores 0.
pub fn f1_macro(preds: &[usize], gold: &[usize], num_classes: usize) -> Result<f64> {
    if preds.len() != gold.len() {
        return Err(Error::shape(format!("{} predictions for {} gold labels", preds.len(), gold.len())));
    }
    if num_classes == 0 {
        return Err(Error::config("num_classes must be positive"));
    }
    let mut tp = vec![0usize; num_classes];
    let mut predicted = vec![0usize; num_classes];
    let mut actual = vec![0usize; num_classes];
    for (&p, &g) in preds.iter().zip(gold) {
        if p >= num_classes || g >= num_classes {
            return Err(Error::config(format!("label outside [0, {num_classes})")));
        }
        predicted[p] += 1;
        actual[g] += 1;
        if p == g {
            tp[p] += 1;
        }
    }
    let per_class = (0..num_classes).map(|c| {
        let precision = if predicted[c] == 0 { 0.0 } else { tp[c] as f64 / predicted[c] as f64 };
        let recall = if actual[c] == 0 { 0.0 } else { tp[c] as f64 / actual[c] as f64 };
        if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        }
    });
    Ok(exact_sum(per_class) / num_classes as f64)
}

/// One (strategy, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub strategy: String,
    pub predictions: Vec<usize>,
    pub gold: Vec<usize>,
    pub f1_macro: f64,
    pub member_steps: u64,
}

/// A run that did not produce a score.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedRun {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub strategy: String,
    pub results: Vec<RunResult>,
    pub mean: f64,
    /// Sample standard deviation (divisor n - 1); `None` with a single run.
    pub std: Option<f64>,
    pub normalized_cost: f64,
    #[serde(default)]
    pub failed: Vec<FailedRun>,
}

impl ExperimentReport {
    pub fn scores(&self) -> Vec<f64> {
        self.results.iter().map(|r| r.f1_macro).collect()
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> Result<(f64, Option<f64>)> {
    if xs.is_empty() {
        return Err(Error::Empty("no scores to summarize".into()));
    }
    let n = xs.len() as f64;
    let rough = exact_sum(xs.iter().copied()) / n;
    // one refinement step removes the error of the final division, so equal
    // inputs give back exactly their value
    let mean = rough + exact_sum(xs.iter().map(|x| x - rough)) / n;
    let std = (xs.len() >= 2).then(|| (exact_sum(xs.iter().map(|x| (x - mean) * (x - mean))) / (n - 1.0)).sqrt());
    Ok((mean, std))
}

/// Aggregate the runs of one strategy. The standard deviation needs at least
/// two runs and is reported as missing otherwise.
pub fn summarize(results: Vec<RunResult>, normalized_cost: f64) -> Result<ExperimentReport> {
    let strategy = results
        .first()
        .map(|r| r.strategy.clone())
        .ok_or_else(|| Error::Empty("no runs to summarize".into()))?;
    if let Some(r) = results.iter().find(|r| r.strategy != strategy) {
        return Err(Error::config(format!("cannot summarize `{}` together with `{strategy}`", r.strategy)));
    }
    let scores: Vec<f64> = results.iter().map(|r| r.f1_macro).collect();
    let (mean, std) = mean_std(&scores)?;
    Ok(ExperimentReport { strategy, results, mean, std, normalized_cost, failed: Vec::new() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_fixtures() {
        assert_eq!(f1_macro(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        let f = f1_macro(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert!(f1_macro(&[0], &[0, 1], 2).is_err());
        assert!(f1_macro(&[2], &[0], 2).is_err());
    }

    fn run(score: f64) -> RunResult {
        RunResult { seed: 0, strategy: "default".into(), predictions: vec![], gold: vec![], f1_macro: score, member_steps: 0 }
    }

    #[test]
    fn summaries() {
        let r = summarize(vec![run(0.8), run(0.8), run(0.8)], 1.0).unwrap();
        assert_eq!((r.mean, r.std), (0.8, Some(0.0)));
        let r = summarize(vec![run(0.7), run(0.9)], 1.0).unwrap();
        assert!((r.mean - 0.8).abs() < 1e-15);
        assert!((r.std.unwrap() - 0.02f64.sqrt()).abs() < 1e-15);
        assert_eq!(summarize(vec![run(0.5)], 1.0).unwrap().std, None);
        assert!(summarize(vec![], 1.0).is_err());
        let mut other = run(0.1);
        other.strategy = "deni".into();
        assert!(summarize(vec![run(0.5), other], 1.0).is_err());
    }
}
