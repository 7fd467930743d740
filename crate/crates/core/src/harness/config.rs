//! Experiment configuration and data preparation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{
    load_augmentations, load_dataset, sample_shots, split_80_20, synth_augmentations, AugmentationMap, Dataset,
    Format, SynthSpec,
};
use crate::error::{Error, Result};
use crate::mitigation::{run_strategy, StrategyConfig, TrainConfig, TrainData};
use crate::model::{random_backbone, ModelSpec, TuningMode};
use crate::param::{derive_stream, load, Origin, ParamSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DataSource {
    /// A JSONL or CSV file, with an optional paraphrase file for the
    /// augmentation strategies.
    File {
        path: PathBuf,
        #[serde(default)]
        classes: Option<Vec<String>>,
        #[serde(default)]
        augmentations: Option<PathBuf>,
    },
    /// Gaussian blobs; paraphrases are jittered copies.
    Synth(SynthSpec),
}

/// How many labelled training samples to draw from the training split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleBudget {
    /// This many samples in total, split uniformly over the classes.
    Total(usize),
    PerClass(usize),
    All,
}

impl Default for SampleBudget {
    fn default() -> Self {
        SampleBudget::Total(1000)
    }
}

/// Where the frozen "pretrained" backbone comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackboneSource {
    /// Hold out `frac` of every class before splitting and fully train a
    /// model of the same architecture on it; its backbone is kept.
    Pretext {
        #[serde(default = "default_pretext_frac")]
        frac: f64,
        #[serde(default = "default_pretext_epochs")]
        epochs: usize,
    },
    /// He-initialized backbone with no training.
    Random,
    /// A parameter container written by [`crate::param::save`].
    File { stem: PathBuf },
}

fn default_pretext_frac() -> f64 {
    0.3
}
fn default_pretext_epochs() -> usize {
    10
}

impl Default for BackboneSource {
    fn default() -> Self {
        BackboneSource::Pretext { frac: default_pretext_frac(), epochs: default_pretext_epochs() }
    }
}

/// Model architecture without the data-dependent input width and class count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelOptions {
    pub hidden_dims: Vec<usize>,
    pub dropout_rate: f64,
    pub tuning: TuningMode,
}

impl Default for ModelOptions {
    fn default() -> Self {
        ModelOptions { hidden_dims: vec![128, 128], dropout_rate: 0.3, tuning: TuningMode::HeadOnly }
    }
}

impl ModelOptions {
    pub fn spec(&self, input_dim: usize, num_classes: usize) -> ModelSpec {
        ModelSpec {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            num_classes,
            dropout_rate: self.dropout_rate,
            tuning: self.tuning,
        }
    }
}

fn default_seeds() -> Vec<u64> {
    (0..20).collect()
}
fn default_text_dim() -> usize {
    1024
}

/// One experiment: every strategy trained once per seed on a fixed
/// train/test split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub budget: SampleBudget,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(deserialize_with = "crate::mitigation::lenient::many")]
    pub strategies: Vec<StrategyConfig>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub model: ModelOptions,
    #[serde(default)]
    pub backbone: BackboneSource,
    /// Hash width for text datasets.
    #[serde(default = "default_text_dim")]
    pub text_dim: usize,
    /// Seed for everything that is fixed across runs: split, shot
    /// subsample, pretext training and synthetic paraphrases.
    #[serde(default)]
    pub data_seed: u64,
    /// Draw a fresh shot subsample for every seed instead of one per
    /// experiment.
    #[serde(default)]
    pub vary_shots: bool,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let cfg: ExperimentConfig = serde_json::from_slice(&std::fs::read(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        if self.strategies.is_empty() {
            return Err(Error::config("at least one strategy is required"));
        }
        let mut ids: Vec<String> = self.strategies.iter().map(StrategyConfig::id).collect();
        ids.sort();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::config(format!("strategy `{}` is listed twice", w[0])));
        }
        let mut seeds = self.seeds.clone();
        seeds.sort();
        seeds.dedup();
        if seeds.len() != self.seeds.len() {
            return Err(Error::config("seeds must be distinct"));
        }
        for s in &self.strategies {
            s.validate()?;
        }
        self.train.validate()?;
        if let BackboneSource::Pretext { frac, epochs } = self.backbone {
            if !(frac > 0.0 && frac < 1.0) || epochs == 0 {
                return Err(Error::config("pretext backbone needs frac in (0, 1) and epochs > 0"));
            }
        }
        match self.budget {
            SampleBudget::Total(0) | SampleBudget::PerClass(0) => Err(Error::config("sample budget must be positive")),
            _ => Ok(()),
        }
    }

    pub(crate) fn max_augmentations(&self) -> usize {
        self.strategies.iter().map(StrategyConfig::augmentations).max().unwrap_or(0)
    }
}

/// Everything that stays fixed across the seeds of one experiment.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub spec: ModelSpec,
    pub backbone: ParamSet,
    /// Pool the training subsample is drawn from.
    pub train_pool: Dataset,
    /// The fixed training subsample.
    pub train: Dataset,
    pub test: Dataset,
    pub augmentations: Option<AugmentationMap>,
    pub text_dim: usize,
}

impl Prepared {
    pub fn train_data<'a>(&'a self, train: &'a Dataset) -> TrainData<'a> {
        TrainData { dataset: train, augmentations: self.augmentations.as_ref(), text_dim: self.text_dim }
    }
}

fn load_source(cfg: &ExperimentConfig) -> Result<(Dataset, Option<AugmentationMap>)> {
    let need = cfg.max_augmentations();
    match &cfg.data {
        DataSource::File { path, classes, augmentations } => {
            let ds = load_dataset(path, Format::from_path(path)?, classes.as_deref())?;
            let aug = match augmentations {
                Some(p) => {
                    let map = load_augmentations(p)?;
                    map.check_keys(&ds)?;
                    Some(map)
                }
                None if need > 0 => {
                    return Err(Error::config("augmentation strategies need `augmentations` in the data source"))
                }
                None => None,
            };
            Ok((ds, aug))
        }
        DataSource::Synth(spec) => {
            let ds = spec.generate()?;
            let aug = if need > 0 {
                Some(synth_augmentations(&ds, need, spec.paraphrase_std, cfg.data_seed)?)
            } else {
                None
            };
            Ok((ds, aug))
        }
    }
}

/// Stratified hold-out of `frac` of every class (rounded) for pretext
/// training; returns (pretext, rest), both in dataset order.
fn hold_out(ds: &Dataset, frac: f64, seed: u64) -> (Dataset, Dataset) {
    use rand::seq::SliceRandom;
    let mut rng = derive_stream(seed, "pretext_split");
    let mut held = vec![false; ds.len()];
    for c in 0..ds.num_classes() {
        let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| ds.samples()[i].label == c).collect();
        idx.shuffle(&mut rng);
        let k = (frac * idx.len() as f64).round() as usize;
        for &i in &idx[..k] {
            held[i] = true;
        }
    }
    let pick = |keep: bool| ds.select(&(0..ds.len()).filter(|&i| held[i] == keep).collect::<Vec<_>>());
    (pick(true), pick(false))
}

pub(crate) fn draw_train(pool: &Dataset, budget: SampleBudget, seed: u64, label: &str) -> Result<Dataset> {
    let k = match budget {
        SampleBudget::All => return Ok(pool.clone()),
        SampleBudget::PerClass(k) => k,
        SampleBudget::Total(t) => {
            let k = t / pool.num_classes();
            if k == 0 {
                return Err(Error::config(format!("a budget of {t} cannot cover {} classes", pool.num_classes())));
            }
            k
        }
    };
    sample_shots(pool, k, &mut derive_stream(seed, label))
}

/// Load data, split it, draw the training subsample and obtain the backbone.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let (full, augmentations) = load_source(cfg)?;
    let input_dim = full.feature_dim(cfg.text_dim);
    let spec = cfg.model.spec(input_dim, full.num_classes());
    spec.validate()?;
    let (pretext, main) = match cfg.backbone {
        BackboneSource::Pretext { frac, .. } => {
            let (p, m) = hold_out(&full, frac, cfg.data_seed);
            (Some(p), m)
        }
        _ => (None, full),
    };
    let (train_pool, test) = split_80_20(&main, cfg.data_seed)?;
    let train = draw_train(&train_pool, cfg.budget, cfg.data_seed, "shots")?;
    let backbone = match &cfg.backbone {
        BackboneSource::Random => random_backbone(&spec, &mut derive_stream(cfg.data_seed, "backbone"))?,
        BackboneSource::File { stem } => load(stem)?.subset(|o| o == Origin::Pretrained),
        BackboneSource::Pretext { epochs, .. } => {
            let pretext = pretext.expect("held out above");
            pretrain_backbone(&spec, &pretext, *epochs, &cfg.train, cfg.text_dim, cfg.data_seed)?
        }
    };
    Ok(Prepared { spec, backbone, train_pool, train, test, augmentations, text_dim: cfg.text_dim })
}

/// Fully fine-tune a randomly initialized network on `pretext` and keep its
/// backbone.
pub fn pretrain_backbone(
    spec: &ModelSpec,
    pretext: &Dataset,
    epochs: usize,
    train: &TrainConfig,
    text_dim: usize,
    seed: u64,
) -> Result<ParamSet> {
    let full = ModelSpec { tuning: TuningMode::Full, ..spec.clone() };
    let start = random_backbone(&full, &mut derive_stream(seed, "backbone"))?;
    let cfg = TrainConfig { epochs, ..train.clone() };
    let data = TrainData { dataset: pretext, augmentations: None, text_dim };
    let out = run_strategy(&StrategyConfig::Default, &full, &start, &data, &cfg, seed)?;
    let params = out.predictor.members()[0].clone();
    Ok(params.subset(|o| o == Origin::Pretrained))
}
