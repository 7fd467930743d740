//! Seed sweeps, shot sweeps and sensitivity grids.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{draw_train, prepare, ExperimentConfig, Prepared, SampleBudget};
use super::report::{report, write_csv};
use crate::ensemble::predict;
use crate::error::{Error, Result};
use crate::metrics::{f1_macro, normalized_cost, summarize, ExperimentReport, FailedRun, RunResult};
use crate::mitigation::{run_strategy, DeniConfig, StrategyConfig};

/// Contents of one `runs/<strategy>/seed-<seed>.jsonl` file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RunRecord {
    Ok(RunResult),
    Failed { strategy: String, seed: u64, error: String },
}

/// Written next to the runs; `report` reads it back.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ExperimentConfig,
    pub num_classes: usize,
    pub train_size: usize,
    pub test_size: usize,
    pub strategies: Vec<StrategyEntry>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub id: String,
    pub normalized_cost: f64,
}

pub const MANIFEST: &str = "experiment.json";

pub fn run_path(dir: &Path, strategy: &str, seed: u64) -> PathBuf {
    dir.join("runs").join(strategy).join(format!("seed-{seed}.jsonl"))
}

/// Write via a temporary file and rename, so an interrupted run never
/// leaves a truncated result behind.
pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub(crate) fn read_record(path: &Path) -> Result<Option<RunRecord>> {
    match fs::read_to_string(path) {
        Ok(text) => match text.lines().next().map(serde_json::from_str::<RunRecord>) {
            Some(Ok(r)) => Ok(Some(r)),
            // an unreadable record is recomputed rather than trusted
            _ => Ok(None),
        },
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn execute(cfg: &ExperimentConfig, prep: &Prepared, strategy: &StrategyConfig, seed: u64) -> Result<RunResult> {
    let train = if cfg.vary_shots {
        draw_train(&prep.train_pool, cfg.budget, seed, "shots")?
    } else {
        prep.train.clone()
    };
    let out = run_strategy(strategy, &prep.spec, &prep.backbone, &prep.train_data(&train), &cfg.train, seed)?;
    let test = prep.test.vectorize(prep.text_dim)?;
    let predictions = predict(&out.predictor, &prep.spec, test.features.view())?;
    let f1 = f1_macro(&predictions, &test.labels, test.num_classes)?;
    Ok(RunResult { seed, strategy: strategy.id(), predictions, gold: test.labels, f1_macro: f1, member_steps: out.member_steps })
}

/// Reports of one experiment plus the number of failed runs.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub reports: Vec<ExperimentReport>,
    pub failed_runs: usize,
}

/// Train every strategy on every seed, skipping (strategy, seed) pairs whose
/// result file already exists, then write the report files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let prep = prepare(cfg)?;
    run_prepared(cfg, &prep)
}

fn run_prepared(cfg: &ExperimentConfig, prep: &Prepared) -> Result<Outcome> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for s in &cfg.strategies {
        entries.push(StrategyEntry { id: s.id(), normalized_cost: normalized_cost(s, &cfg.train, prep.train.len())? });
    }
    let manifest = Manifest {
        config: cfg.clone(),
        num_classes: prep.spec.num_classes,
        train_size: prep.train.len(),
        test_size: prep.test.len(),
        strategies: entries,
    };
    write_atomic(&dir.join(MANIFEST), (serde_json::to_string_pretty(&manifest)? + "\n").as_bytes())?;

    for strategy in &cfg.strategies {
        let id = strategy.id();
        for &seed in &cfg.seeds {
            let path = run_path(dir, &id, seed);
            if read_record(&path)?.is_some() {
                log::debug!("{id} seed {seed}: already done");
                continue;
            }
            let record = match execute(cfg, prep, strategy, seed) {
                Ok(r) => {
                    log::info!("{id} seed {seed}: f1 {:.4}", r.f1_macro);
                    RunRecord::Ok(r)
                }
                Err(e) => {
                    log::warn!("{id} seed {seed} failed: {e}");
                    RunRecord::Failed { strategy: id.clone(), seed, error: e.to_string() }
                }
            };
            write_atomic(&path, (serde_json::to_string(&record)? + "\n").as_bytes())?;
        }
    }
    let reports = report(dir, None)?;
    let failed_runs = reports.iter().map(|r| r.failed.len()).sum();
    Ok(Outcome { reports, failed_runs })
}

/// Collect the run files of `strategy` into a report.
pub(crate) fn collect(dir: &Path, cfg: &ExperimentConfig, entry: &StrategyEntry) -> Result<Option<ExperimentReport>> {
    let mut ok = Vec::new();
    let mut failed = Vec::new();
    for &seed in &cfg.seeds {
        match read_record(&run_path(dir, &entry.id, seed))? {
            Some(RunRecord::Ok(r)) => ok.push(r),
            Some(RunRecord::Failed { seed, error, .. }) => failed.push(FailedRun { seed, error }),
            None => {}
        }
    }
    if ok.is_empty() {
        if failed.is_empty() {
            return Ok(None);
        }
        return Ok(Some(ExperimentReport {
            strategy: entry.id.clone(),
            results: Vec::new(),
            mean: f64::NAN,
            std: None,
            normalized_cost: entry.normalized_cost,
            failed,
        }));
    }
    let mut rep = summarize(ok, entry.normalized_cost)?;
    rep.failed = failed;
    Ok(Some(rep))
}

/// One experiment per shot count, each with its own fixed subsample, in
/// `<output_dir>/shots-<k>`. Shot counts the data cannot support are skipped.
pub fn run_shot_sweep(cfg: &ExperimentConfig, shots: &[usize]) -> Result<Vec<(usize, Outcome)>> {
    let mut out = Vec::new();
    for &k in shots {
        let sub = ExperimentConfig {
            budget: SampleBudget::PerClass(k),
            output_dir: cfg.output_dir.join(format!("shots-{k}")),
            ..cfg.clone()
        };
        match prepare(&sub) {
            Ok(prep) => out.push((k, run_prepared(&sub, &prep)?)),
            Err(Error::InsufficientData(msg)) => log::warn!("skipping {k} shots: {msg}"),
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

fn default_repeats() -> usize {
    5
}

fn default_sweep_strategy() -> StrategyConfig {
    StrategyConfig::deni()
}

/// A grid over delayed-ensemble hyperparameters. Each group is a set of axes
/// swept jointly (all value lists in a group have equal length); the grid
/// is the Cartesian product of the groups.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub experiment: ExperimentConfig,
    /// The strategy whose configuration is varied (`de`, `ni`, `deni` or
    /// `denials`).
    #[serde(default = "default_sweep_strategy", deserialize_with = "crate::mitigation::lenient::one")]
    pub strategy: StrategyConfig,
    pub groups: Vec<BTreeMap<String, Vec<Value>>>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    pub values: BTreeMap<String, Value>,
    pub result: std::result::Result<ExperimentReport, String>,
}

fn deni_of(s: &StrategyConfig) -> Option<&DeniConfig> {
    match s {
        StrategyConfig::De(c) | StrategyConfig::Ni(c) | StrategyConfig::Deni(c) => Some(c),
        StrategyConfig::Denials { deni, .. } => Some(deni),
        _ => None,
    }
}

fn with_deni(s: &StrategyConfig, c: DeniConfig) -> StrategyConfig {
    match s {
        StrategyConfig::De(_) => StrategyConfig::De(c),
        StrategyConfig::Ni(_) => StrategyConfig::Ni(c),
        StrategyConfig::Denials { n, .. } => StrategyConfig::Denials { deni: c, n: *n },
        _ => StrategyConfig::Deni(c),
    }
}

impl SweepSpec {
    pub fn from_file(path: &Path) -> Result<SweepSpec> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }

    /// Every grid point as axis → value, in row-major order of the groups.
    pub fn points(&self) -> Result<Vec<BTreeMap<String, Value>>> {
        let base = deni_of(&self.strategy).ok_or_else(|| Error::config("sweeps vary de, ni, deni or denials"))?;
        let fields = match serde_json::to_value(base)? {
            Value::Object(m) => m,
            _ => unreachable!("DeniConfig serializes to an object"),
        };
        let mut points = vec![BTreeMap::new()];
        for group in &self.groups {
            let len = group.values().next().map(Vec::len).unwrap_or(0);
            if len == 0 || group.values().any(|v| v.len() != len) {
                return Err(Error::config("axes in a group need equal, non-empty value lists"));
            }
            if let Some(k) = group.keys().find(|k| !fields.contains_key(*k)) {
                return Err(Error::config(format!("`{k}` is not a delayed-ensemble setting")));
            }
            let mut next = Vec::with_capacity(points.len() * len);
            for p in &points {
                for i in 0..len {
                    let mut q = p.clone();
                    for (k, vals) in group {
                        q.insert(k.clone(), vals[i].clone());
                    }
                    next.push(q);
                }
            }
            points = next;
        }
        Ok(points)
    }

    fn strategy_at(&self, values: &BTreeMap<String, Value>) -> std::result::Result<StrategyConfig, String> {
        let base = deni_of(&self.strategy).expect("checked in points()");
        let mut v = serde_json::to_value(base).map_err(|e| e.to_string())?;
        for (k, x) in values {
            v[k] = x.clone();
        }
        let cfg: DeniConfig = serde_json::from_value(v).map_err(|e| e.to_string())?;
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(with_deni(&self.strategy, cfg))
    }
}

/// Run the grid; points with invalid settings are recorded, not fatal.
/// Point `i` lives in `<output_dir>/point-<i>` and a `sweep.csv` summary is
/// written to the output directory.
pub fn run_sensitivity(sweep: &SweepSpec) -> Result<Vec<SweepPoint>> {
    if sweep.repeats == 0 {
        return Err(Error::config("repeats must be positive"));
    }
    let points = sweep.points()?;
    let base = ExperimentConfig { seeds: (0..sweep.repeats as u64).collect(), ..sweep.experiment.clone() };
    let prep = prepare(&ExperimentConfig { strategies: vec![sweep.strategy.clone()], ..base.clone() })?;
    let mut out = Vec::with_capacity(points.len());
    for (i, values) in points.into_iter().enumerate() {
        let result = match sweep.strategy_at(&values) {
            Err(msg) => {
                log::warn!("grid point {i} is invalid: {msg}");
                Err(msg)
            }
            Ok(strategy) => {
                let cfg = ExperimentConfig {
                    strategies: vec![strategy],
                    output_dir: base.output_dir.join(format!("point-{i}")),
                    ..base.clone()
                };
                let outcome = run_prepared(&cfg, &prep)?;
                outcome.reports.into_iter().next().ok_or_else(|| "no runs".to_string())
            }
        };
        out.push(SweepPoint { values, result });
    }
    write_sweep_csv(&base.output_dir, &out)?;
    Ok(out)
}

fn write_sweep_csv(dir: &Path, points: &[SweepPoint]) -> Result<()> {
    let axes: Vec<String> = points.first().map(|p| p.values.keys().cloned().collect()).unwrap_or_default();
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().cloned());
    header.extend(["status", "mean", "std", "normalized_cost", "n_seeds", "detail"].map(String::from));
    let mut rows = Vec::new();
    for (i, p) in points.iter().enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(axes.iter().map(|a| p.values[a].to_string()));
        match &p.result {
            Ok(r) => row.extend([
                "ok".into(),
                r.mean.to_string(),
                r.std.map(|s| s.to_string()).unwrap_or_default(),
                r.normalized_cost.to_string(),
                r.results.len().to_string(),
                String::new(),
            ]),
            Err(msg) => row.extend(["invalid".into(), String::new(), String::new(), String::new(), "0".into(), msg.clone()]),
        }
        rows.push(row);
    }
    write_csv(&dir.join("sweep.csv"), &header, &rows)
}
