//! Small MLP classifiers on top of a frozen backbone.
//!
//! Parameter layout, in order:
//!
//! * `backbone.<i>.weight` `[out, in]` and `backbone.<i>.bias` `[out]`,
//!   origin `Pretrained`, trainable only under full tuning;
//! * `backbone.<i>.lora_a` `[rank, in]` and `backbone.<i>.lora_b`
//!   `[out, rank]`, origin `Adapter`, present only under LoRA tuning;
//! * `head.weight` `[classes, features]` and `head.bias` `[classes]`,
//!   origin `NewlyInitialized`, always trainable.
//!
//! Backbone layers use ReLU. Dropout sits between the backbone output and the
//! head. A LoRA layer's effective weight is `W + (alpha / sqrt(rank)) * B A`.

mod net;

use std::sync::atomic::{AtomicU64, Ordering};

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use net::{backward, forward, ForwardCache, ForwardMode, Regularizer};

use crate::error::{Error, Result};
use crate::param::{Origin, ParamGroup, ParamSet, RngStream, Tensor};

/// Standard deviation of the freshly initialized head and LoRA `A` factors.
pub const HEAD_INIT_STD: f64 = 0.02;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TuningMode {
    Full,
    HeadOnly,
    Lora {
        rank: usize,
        alpha: f64,
        adapter_dropout: f64,
    },
}

impl TuningMode {
    /// Desk-scale LoRA defaults (rank 4, alpha 4, adapter dropout 0.1).
    pub fn lora() -> Self {
        TuningMode::Lora {
            rank: 4,
            alpha: 4.0,
            adapter_dropout: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub num_classes: usize,
    #[serde(default = "default_dropout")]
    pub dropout_rate: f64,
    #[serde(default = "default_tuning")]
    pub tuning: TuningMode,
}

fn default_dropout() -> f64 {
    0.3
}

fn default_tuning() -> TuningMode {
    TuningMode::HeadOnly
}

impl ModelSpec {
    /// Reference desk model: two 128-unit backbone layers, dropout 0.3.
    pub fn desk(input_dim: usize, num_classes: usize, tuning: TuningMode) -> Self {
        Self {
            input_dim,
            hidden_dims: vec![128, 128],
            num_classes,
            dropout_rate: 0.3,
            tuning,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::config("layer widths must be positive"));
        }
        if self.num_classes < 2 {
            return Err(Error::config("need at least two classes"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::config("dropout_rate must be in [0, 1)"));
        }
        if let TuningMode::Lora {
            rank,
            alpha,
            adapter_dropout,
        } = self.tuning
        {
            if self.hidden_dims.is_empty() {
                return Err(Error::config("LoRA needs at least one backbone layer"));
            }
            if rank == 0 || !(alpha > 0.0) || !(0.0..1.0).contains(&adapter_dropout) {
                return Err(Error::config("LoRA needs rank >= 1, alpha > 0, dropout in [0, 1)"));
            }
            for (fan_in, fan_out) in self.layer_dims() {
                if rank > fan_in.min(fan_out) {
                    return Err(Error::config(format!(
                        "LoRA rank {rank} exceeds layer {fan_in}->{fan_out}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` of each backbone layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len());
        let mut fan_in = self.input_dim;
        for &h in &self.hidden_dims {
            dims.push((fan_in, h));
            fan_in = h;
        }
        dims
    }

    pub fn feature_dim(&self) -> usize {
        self.hidden_dims.last().copied().unwrap_or(self.input_dim)
    }

    pub(crate) fn lora_scale(&self) -> Option<f64> {
        match self.tuning {
            TuningMode::Lora { rank, alpha, .. } => Some(alpha / (rank as f64).sqrt()),
            _ => None,
        }
    }
}

pub(crate) fn weight_name(i: usize) -> String {
    format!("backbone.{i}.weight")
}
pub(crate) fn bias_name(i: usize) -> String {
    format!("backbone.{i}.bias")
}
pub(crate) fn lora_a_name(i: usize) -> String {
    format!("backbone.{i}.lora_a")
}
pub(crate) fn lora_b_name(i: usize) -> String {
    format!("backbone.{i}.lora_b")
}
pub(crate) const HEAD_WEIGHT: &str = "head.weight";
pub(crate) const HEAD_BIAS: &str = "head.bias";

static NEXT_VERSION: AtomicU64 = AtomicU64::new(1);

fn next_version() -> u64 {
    NEXT_VERSION.fetch_add(1, Ordering::Relaxed)
}

/// A classifier: spec, live parameters and the frozen pretrained snapshot.
#[derive(Clone, Debug)]
pub struct Model {
    spec: ModelSpec,
    params: ParamSet,
    pretrained: ParamSet,
    version: u64,
}

fn normal_tensor(shape: &[usize], std: f64, rng: &mut RngStream) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            std * z
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("finite normal draws")
}

/// Randomly initialized backbone (He-normal weights, zero biases), used as
/// the starting point for pretext training.
pub fn random_backbone(spec: &ModelSpec, rng: &mut RngStream) -> Result<ParamSet> {
    spec.validate()?;
    let mut set = ParamSet::new();
    for (i, (fan_in, fan_out)) in spec.layer_dims().into_iter().enumerate() {
        let std = (2.0 / fan_in as f64).sqrt();
        set.push(ParamGroup::new(
            weight_name(i),
            normal_tensor(&[fan_out, fan_in], std, rng),
            Origin::Pretrained,
            false,
        ))?;
        set.push(ParamGroup::new(
            bias_name(i),
            Tensor::zeros(&[fan_out]),
            Origin::Pretrained,
            false,
        ))?;
    }
    Ok(set)
}

/// Attach a fresh head (and LoRA factors when requested) to `backbone`.
///
/// Head weights and LoRA `A` are drawn from `Normal(0, 0.02^2)` in that
/// order; head bias and LoRA `B` start at zero, so the adapter contributes
/// nothing until trained.
pub fn init_model(spec: &ModelSpec, backbone: &ParamSet, rng_init: &mut RngStream) -> Result<Model> {
    spec.validate()?;
    let dims = spec.layer_dims();
    if backbone.len() != 2 * dims.len() {
        return Err(Error::shape(format!(
            "backbone has {} groups, spec needs {}",
            backbone.len(),
            2 * dims.len()
        )));
    }
    let full = matches!(spec.tuning, TuningMode::Full);

    let head_w = normal_tensor(&[spec.num_classes, spec.feature_dim()], HEAD_INIT_STD, rng_init);
    let lora_a: Vec<Tensor> = match spec.tuning {
        TuningMode::Lora { rank, .. } => dims
            .iter()
            .map(|&(fan_in, _)| normal_tensor(&[rank, fan_in], HEAD_INIT_STD, rng_init))
            .collect(),
        _ => Vec::new(),
    };

    let mut params = ParamSet::new();
    for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
        for (name, shape) in [(weight_name(i), vec![fan_out, fan_in]), (bias_name(i), vec![fan_out])] {
            let g = backbone
                .get(&name)
                .ok_or_else(|| Error::shape(format!("backbone lacks `{name}`")))?;
            if g.tensor().shape() != &shape[..] {
                return Err(Error::shape(format!(
                    "`{name}` is {:?}, spec needs {shape:?}",
                    g.tensor().shape()
                )));
            }
            params.push(ParamGroup::new(name, g.tensor().clone(), Origin::Pretrained, full))?;
        }
        if let TuningMode::Lora { rank, .. } = spec.tuning {
            params.push(ParamGroup::new(lora_a_name(i), lora_a[i].clone(), Origin::Adapter, true))?;
            params.push(ParamGroup::new(
                lora_b_name(i),
                Tensor::zeros(&[fan_out, rank]),
                Origin::Adapter,
                true,
            ))?;
        }
    }
    params.push(ParamGroup::new(HEAD_WEIGHT, head_w, Origin::NewlyInitialized, true))?;
    params.push(ParamGroup::new(
        HEAD_BIAS,
        Tensor::zeros(&[spec.num_classes]),
        Origin::NewlyInitialized,
        true,
    ))?;

    let pretrained = params.subset(|o| o == Origin::Pretrained);
    Ok(Model {
        spec: spec.clone(),
        params,
        pretrained,
        version: next_version(),
    })
}

impl Model {
    /// Wrap an existing parameter set (e.g. an ensemble member) for
    /// inference. The pretrained snapshot is taken from `params`.
    pub fn from_params(spec: &ModelSpec, params: ParamSet) -> Result<Model> {
        spec.validate()?;
        let model = Model {
            spec: spec.clone(),
            pretrained: params.subset(|o| o == Origin::Pretrained),
            params,
            version: next_version(),
        };
        model.check_layout()?;
        Ok(model)
    }

    fn check_layout(&self) -> Result<()> {
        let dims = self.spec.layer_dims();
        let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
        for (i, &(fan_in, fan_out)) in dims.iter().enumerate() {
            expected.push((weight_name(i), vec![fan_out, fan_in]));
            expected.push((bias_name(i), vec![fan_out]));
            if let TuningMode::Lora { rank, .. } = self.spec.tuning {
                expected.push((lora_a_name(i), vec![rank, fan_in]));
                expected.push((lora_b_name(i), vec![fan_out, rank]));
            }
        }
        expected.push((HEAD_WEIGHT.into(), vec![self.spec.num_classes, self.spec.feature_dim()]));
        expected.push((HEAD_BIAS.into(), vec![self.spec.num_classes]));
        if expected.len() != self.params.len() {
            return Err(Error::shape("parameter set does not match model spec"));
        }
        for ((name, shape), g) in expected.iter().zip(self.params.groups()) {
            if g.name() != name || g.tensor().shape() != &shape[..] {
                return Err(Error::shape(format!("unexpected group `{}`", g.name())));
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn pretrained_snapshot(&self) -> &ParamSet {
        &self.pretrained
    }

    pub(crate) fn version(&self) -> u64 {
        self.version
    }

    /// Mutable access; invalidates outstanding forward caches.
    pub fn params_mut(&mut self) -> &mut ParamSet {
        self.version = next_version();
        &mut self.params
    }

    pub fn set_params(&mut self, params: ParamSet) -> Result<()> {
        self.params.check_congruent(&params)?;
        // trainability is a property of the model, not of the incoming values
        let groups = params
            .groups()
            .iter()
            .zip(self.params.groups())
            .map(|(new, old)| new.clone().with_trainable(old.trainable()))
            .collect();
        self.params = ParamSet::from_groups(groups)?;
        self.version = next_version();
        Ok(())
    }

    pub fn into_params(self) -> ParamSet {
        self.params
    }
}
