//! Independent oracles shared by the integration tests and the acceptance
//! suite.
#![allow(dead_code, clippy::needless_range_loop)]

use deni_core::model::{backward, forward, init_model, random_backbone, ForwardMode, Model, ModelSpec, TuningMode};
use deni_core::{derive_stream, ParamGroup, ParamSet, RngStream, Tensor};
use ndarray::Array2;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

pub const H: f64 = 1e-5;

pub fn grad_spec(tuning: TuningMode) -> ModelSpec {
    ModelSpec { input_dim: 6, hidden_dims: vec![5, 4], num_classes: 3, dropout_rate: 0.0, tuning }
}

pub fn normal(rng: &mut RngStream, std: f64) -> f64 {
    // Box-Muller keeps the fixture independent of the crate's sampler
    let u1 = rng.uniform().max(1e-300);
    let u2 = rng.uniform();
    std * (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Replace every group matching `pick` with fresh O(`std`) values so no
/// gradient is trivially tiny (zero LoRA `B`, 0.02 head).
pub fn randomize(params: &ParamSet, pick: impl Fn(&str) -> bool, std: f64, rng: &mut RngStream) -> ParamSet {
    let groups = params
        .groups()
        .iter()
        .map(|g| {
            if !pick(g.name()) {
                return g.clone();
            }
            let data = (0..g.values().len()).map(|_| normal(rng, std)).collect();
            g.with_tensor(Tensor::new(g.tensor().shape().to_vec(), data).unwrap()).unwrap()
        })
        .collect();
    ParamSet::from_groups(groups).unwrap()
}

pub fn with_value(params: &ParamSet, group: usize, elem: usize, value: f64) -> ParamSet {
    let mut groups: Vec<ParamGroup> = params.groups().to_vec();
    let g = &groups[group];
    let mut data = g.values().to_vec();
    data[elem] = value;
    groups[group] = g.with_tensor(Tensor::new(g.tensor().shape().to_vec(), data).unwrap()).unwrap();
    ParamSet::from_groups(groups).unwrap()
}

pub fn batch(rng: &mut RngStream) -> (Array2<f64>, Vec<usize>) {
    let x = Array2::from_shape_fn((7, 6), |_| normal(rng, 1.0));
    let y = (0..7).map(|i| i % 3).collect();
    (x, y)
}

pub fn loss(spec: &ModelSpec, params: &ParamSet, x: &Array2<f64>, y: &[usize]) -> f64 {
    let model = Model::from_params(spec, params.clone()).unwrap();
    let (_, cache) = forward(&model, x.view(), ForwardMode::Eval).unwrap();
    backward(&model, &cache, y).unwrap().1
}

/// Largest relative error over every trainable element, and the number of
/// elements checked.
pub fn max_rel_error(tuning: TuningMode) -> (f64, usize) {
    let spec = grad_spec(tuning);
    let mut rng = derive_stream(11, "gradcheck");
    let backbone = random_backbone(&spec, &mut rng).unwrap();
    let model = init_model(&spec, &backbone, &mut rng).unwrap();
    let params = randomize(model.params(), |n| n.starts_with("head") || n.ends_with("lora_b") || n.ends_with("bias"), 0.5, &mut rng);
    let (x, y) = batch(&mut rng);

    let model = Model::from_params(&spec, params.clone()).unwrap();
    let (_, cache) = forward(&model, x.view(), ForwardMode::Eval).unwrap();
    let (grads, _) = backward(&model, &cache, &y).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (gi, group) in params.groups().iter().enumerate() {
        let analytic = grads.groups()[gi].values();
        if !group.trainable() {
            assert!(analytic.iter().all(|&g| g == 0.0), "frozen group {} has gradient", group.name());
            continue;
        }
        for (e, &v) in group.values().iter().enumerate() {
            let plus = loss(&spec, &with_value(&params, gi, e, v + H), &x, &y);
            let minus = loss(&spec, &with_value(&params, gi, e, v - H), &x, &y);
            let numeric = (plus - minus) / (2.0 * H);
            let a = analytic[e];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-7);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    (worst, checked)
}

/// Per-class precision/recall from an explicit confusion matrix.
pub fn confusion_f1(preds: &[usize], gold: &[usize], k: usize) -> f64 {
    let mut m = vec![vec![0.0; k]; k];
    for (&p, &g) in preds.iter().zip(gold) {
        m[g][p] += 1.0;
    }
    let mut total = 0.0;
    for c in 0..k {
        let tp = m[c][c];
        let col: f64 = (0..k).map(|g| m[g][c]).sum();
        let row: f64 = m[c].iter().sum();
        let p = if col > 0.0 { tp / col } else { 0.0 };
        let r = if row > 0.0 { tp / row } else { 0.0 };
        total += if p + r > 0.0 { 2.0 * p * r / (p + r) } else { 0.0 };
    }
    total / k as f64
}

/// Two-sided p-value by listing every subset of pooled positions.
pub fn brute_force_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    // midranks by counting
    let rank = |x: f64| {
        let below = pooled.iter().filter(|&&y| y < x).count() as f64;
        let equal = pooled.iter().filter(|&&y| y == x).count() as f64;
        below + (equal + 1.0) / 2.0
    };
    let ranks: Vec<f64> = pooled.iter().map(|&x| rank(x)).collect();
    let na = a.len();
    let u_of = |sum: f64| sum - (na * (na + 1)) as f64 / 2.0;
    let mean = (na * b.len()) as f64 / 2.0;
    let obs = (u_of(ranks[..na].iter().sum()) - mean).abs();
    let (mut hit, mut all) = (0u32, 0u32);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != na {
            continue;
        }
        let sum: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        all += 1;
        if (u_of(sum) - mean).abs() >= obs - 1e-9 {
            hit += 1;
        }
    }
    hit as f64 / all as f64
}


/// Every file under `dir`, keyed by relative path.
pub fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

