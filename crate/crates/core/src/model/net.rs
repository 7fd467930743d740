//! Forward pass and manual backpropagation.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};

use super::{bias_name, lora_a_name, lora_b_name, weight_name, Model, TuningMode, HEAD_BIAS, HEAD_WEIGHT};
use crate::error::{Error, Result};
use crate::param::{ParamSet, RngStream};

/// Stochastic regularizer used in training mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regularizer {
    /// Inverted dropout after the backbone (and on the LoRA branch input).
    Dropout,
    /// Mix trainable pretrained weights back towards the pretrained snapshot
    /// with probability `p`, rescaled so the expected weight is unchanged.
    /// Replaces dropout entirely.
    Mixout { p: f64 },
}

pub enum ForwardMode<'a> {
    Eval,
    Train {
        rng: &'a mut RngStream,
        regularizer: Regularizer,
    },
}

struct Branch {
    /// Masked and rescaled LoRA branch input.
    input: Array2<f64>,
    /// `input · Aᵀ`
    low: Array2<f64>,
    /// Keep-mask divided by the keep probability.
    mask: Array2<f64>,
}

struct LayerCache {
    input: Array2<f64>,
    pre: Array2<f64>,
    /// Weight actually multiplied with the input on the main path.
    weight: Array2<f64>,
    /// `(1 - m) / (1 - p)` for the weight and (full tuning) the bias.
    mixout: Option<(Array2<f64>, Option<Array1<f64>>)>,
    branch: Option<Branch>,
}

pub struct ForwardCache {
    version: u64,
    layers: Vec<LayerCache>,
    head_input: Array2<f64>,
    dropout_mask: Option<Array2<f64>>,
    logits: Array2<f64>,
}

impl ForwardCache {
    pub fn logits(&self) -> &Array2<f64> {
        &self.logits
    }
}

fn keep_mask(rows: usize, cols: usize, keep: f64, rng: &mut RngStream) -> Array2<f64> {
    let scale = 1.0 / keep;
    Array2::from_shape_fn((rows, cols), |_| if rng.uniform() < keep { scale } else { 0.0 })
}

fn group2<'a>(params: &'a ParamSet, name: &str) -> ArrayView2<'a, f64> {
    params.get(name).expect("layout checked at construction").tensor().view2()
}

fn group1(params: &ParamSet, name: &str) -> Array1<f64> {
    params
        .get(name)
        .expect("layout checked at construction")
        .tensor()
        .view1()
        .to_owned()
}

/// Run the network on a `batch x input_dim` feature matrix.
pub fn forward(model: &Model, features: ArrayView2<'_, f64>, mode: ForwardMode<'_>) -> Result<(Array2<f64>, ForwardCache)> {
    let spec = model.spec();
    if features.ncols() != spec.input_dim {
        return Err(Error::shape(format!(
            "batch has {} features, model expects {}",
            features.ncols(),
            spec.input_dim
        )));
    }
    let full = matches!(spec.tuning, TuningMode::Full);
    let lora = spec.lora_scale();
    let adapter_dropout = match spec.tuning {
        TuningMode::Lora { adapter_dropout, .. } => adapter_dropout,
        _ => 0.0,
    };

    let (mut rng, regularizer) = match mode {
        ForwardMode::Eval => (None, None),
        ForwardMode::Train { rng, regularizer } => (Some(rng), Some(regularizer)),
    };
    let mixout_p = match regularizer {
        Some(Regularizer::Mixout { p }) => {
            if !(0.0..1.0).contains(&p) {
                return Err(Error::config(format!("mixout p must be in [0, 1), got {p}")));
            }
            if !(full || lora.is_some()) {
                return Err(Error::config(
                    "mixout needs trainable groups with a pretrained counterpart; head-only tuning has none",
                ));
            }
            Some(p)
        }
        _ => None,
    };
    let dropout_on = matches!(regularizer, Some(Regularizer::Dropout));

    let params = model.params();
    let batch = features.nrows();
    let mut x = features.to_owned();
    let mut layers = Vec::with_capacity(spec.hidden_dims.len());

    for i in 0..spec.hidden_dims.len() {
        let w = group2(params, &weight_name(i));
        let mut b = group1(params, &bias_name(i));
        let mut weight = match lora {
            Some(s) => {
                let a = group2(params, &lora_a_name(i));
                let bm = group2(params, &lora_b_name(i));
                &w + &(bm.dot(&a) * s)
            }
            None => w.to_owned(),
        };

        let mut mixout = None;
        if let (Some(p), Some(rng)) = (mixout_p, rng.as_deref_mut()) {
            let w0 = group2(model.pretrained_snapshot(), &weight_name(i));
            let keep = 1.0 - p;
            let mut factor = Array2::zeros(weight.raw_dim());
            Zip::from(&mut weight).and(&w0).and(&mut factor).for_each(|w, &w0, f| {
                let m = if rng.uniform() < p { 1.0 } else { 0.0 };
                *w = (m * w0 + (1.0 - m) * *w - p * w0) / keep;
                *f = (1.0 - m) / keep;
            });
            let bias_factor = if full {
                let b0 = group1(model.pretrained_snapshot(), &bias_name(i));
                let mut bf = Array1::zeros(b.len());
                Zip::from(&mut b).and(&b0).and(&mut bf).for_each(|b, &b0, f| {
                    let m = if rng.uniform() < p { 1.0 } else { 0.0 };
                    *b = (m * b0 + (1.0 - m) * *b - p * b0) / keep;
                    *f = (1.0 - m) / keep;
                });
                Some(bf)
            } else {
                None
            };
            mixout = Some((factor, bias_factor));
        }

        let branch_active = dropout_on && lora.is_some() && adapter_dropout > 0.0;
        let (pre, weight, branch) = if branch_active {
            let s = lora.unwrap();
            let rng = rng.as_deref_mut().expect("train mode");
            let mask = keep_mask(batch, x.ncols(), 1.0 - adapter_dropout, rng);
            let input = &x * &mask;
            let low = input.dot(&group2(params, &lora_a_name(i)).t());
            let pre = x.dot(&w.t()) + (low.dot(&group2(params, &lora_b_name(i)).t()) * s) + &b;
            (pre, w.to_owned(), Some(Branch { input, low, mask }))
        } else {
            (x.dot(&weight.t()) + &b, weight, None)
        };

        let out = pre.mapv(|v| v.max(0.0));
        layers.push(LayerCache {
            input: std::mem::replace(&mut x, out),
            pre,
            weight,
            mixout,
            branch,
        });
    }

    let dropout_mask = match rng.as_mut() {
        Some(rng) if dropout_on && spec.dropout_rate > 0.0 => {
            let mask = keep_mask(batch, x.ncols(), 1.0 - spec.dropout_rate, rng);
            x *= &mask;
            Some(mask)
        }
        _ => None,
    };

    let logits = x.dot(&group2(params, HEAD_WEIGHT).t()) + &group1(params, HEAD_BIAS);
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("logits".into()));
    }
    let cache = ForwardCache {
        version: model.version(),
        layers,
        head_input: x,
        dropout_mask,
        logits: logits.clone(),
    };
    Ok((logits, cache))
}

/// Mean softmax cross-entropy and its gradient with respect to every group.
/// Groups that are not trainable get exact zeros.
pub fn backward(model: &Model, cache: &ForwardCache, labels: &[usize]) -> Result<(ParamSet, f64)> {
    if cache.version != model.version() {
        return Err(Error::StaleCache);
    }
    let spec = model.spec();
    let logits = &cache.logits;
    let batch = logits.nrows();
    if labels.len() != batch {
        return Err(Error::shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= spec.num_classes) {
        return Err(Error::shape(format!("label {bad} out of range")));
    }

    let mut dlogits = Array2::zeros(logits.raw_dim());
    let mut loss = 0.0;
    for (r, (row, mut drow)) in logits.outer_iter().zip(dlogits.outer_iter_mut()).enumerate() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let sum: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let lse = max + sum.ln();
        loss += lse - row[labels[r]];
        for (c, d) in drow.iter_mut().enumerate() {
            *d = (row[c] - lse).exp();
        }
        drow[labels[r]] -= 1.0;
    }
    let n = batch as f64;
    loss /= n;
    dlogits /= n;
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss".into()));
    }

    let params = model.params();
    let mut grads = params.zeros_like();
    let mut put = |name: &str, values: &[f64]| {
        let idx = grads.index_of(name).expect("layout");
        grads.groups_mut()[idx].tensor_mut().data_mut().copy_from_slice(values);
    };

    let head_w = group2(params, HEAD_WEIGHT);
    let dw = dlogits.t().dot(&cache.head_input);
    put(HEAD_WEIGHT, dw.as_standard_layout().as_slice().unwrap());
    let db = dlogits.sum_axis(Axis(0));
    put(HEAD_BIAS, db.as_slice().unwrap());

    let full = matches!(spec.tuning, TuningMode::Full);
    let lora = spec.lora_scale();
    if !full && lora.is_none() {
        return Ok((grads, loss));
    }

    let mut dh = dlogits.dot(&head_w);
    if let Some(mask) = &cache.dropout_mask {
        dh *= mask;
    }
    for (i, layer) in cache.layers.iter().enumerate().rev() {
        let mut da = dh;
        Zip::from(&mut da).and(&layer.pre).for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });

        let dx = if let Some(branch) = &layer.branch {
            let s = lora.expect("branch implies LoRA");
            let a = group2(params, &lora_a_name(i));
            let b = group2(params, &lora_b_name(i));
            let db_lora = da.t().dot(&branch.low) * s;
            let dlow = da.dot(&b) * s;
            let da_lora = dlow.t().dot(&branch.input);
            put(&lora_b_name(i), db_lora.as_standard_layout().as_slice().unwrap());
            put(&lora_a_name(i), da_lora.as_standard_layout().as_slice().unwrap());
            da.dot(&layer.weight) + &(dlow.dot(&a) * &branch.mask)
        } else {
            let mut g = da.t().dot(&layer.input);
            if let Some((factor, _)) = &layer.mixout {
                g *= factor;
            }
            if full {
                put(&weight_name(i), g.as_standard_layout().as_slice().unwrap());
                let mut gb = da.sum_axis(Axis(0));
                if let Some((_, Some(bf))) = &layer.mixout {
                    gb *= bf;
                }
                put(&bias_name(i), gb.as_slice().unwrap());
            } else if let Some(s) = lora {
                let a = group2(params, &lora_a_name(i));
                let b = group2(params, &lora_b_name(i));
                let gb = g.dot(&a.t()) * s;
                let ga = b.t().dot(&g) * s;
                put(&lora_b_name(i), gb.as_standard_layout().as_slice().unwrap());
                put(&lora_a_name(i), ga.as_standard_layout().as_slice().unwrap());
            }
            da.dot(&layer.weight)
        };
        dh = dx;
    }
    Ok((grads, loss))
}
