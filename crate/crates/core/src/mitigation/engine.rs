//! The strategy engine.
//!
//! Every model replica draws from its own streams: member `k` of a run with
//! seed `s` uses `("init", k)`, `("model_noise", k)` and
//! `("mitigation_noise", k)`, where member 0 uses the plain labels. Independent
//! ensembles also give each member its own `("data_order", k)` stream; the
//! delayed-ensemble family shares one data order across members so that all
//! replicas see the same batches.
//!
//! Optimizer moments are reset whenever noisy copies are spawned and after
//! they are averaged back into one model.

use ndarray::ArrayView2;

use super::plan::{build_phase_plan, Event, PhasePlan, Variant};
use super::{augment_steps, denials_config, DeniConfig, StrategyConfig, TrainConfig};
use crate::data::{expand_with_augmentations, AugmentationMap, BatchStream, Dataset, TrainingSet};
use crate::ensemble::{interpolate, Predictor};
use crate::error::{Error, Result};
use crate::model::{backward, forward, init_model, ForwardMode, Model, ModelSpec, Regularizer, TuningMode};
use crate::noise::{perturb, perturb_input, NoiseScaling, NoiseSpec, NoiseTarget};
use crate::optim::{OptimizerKind, OptimizerState, ScheduleKind, ScheduleSpec};
use crate::param::{ParamSet, RngStream};

/// Training data handed to [`run_strategy`]. Augmentations are only needed
/// by the augmentation strategies.
#[derive(Clone, Copy, Debug)]
pub struct TrainData<'a> {
    pub dataset: &'a Dataset,
    pub augmentations: Option<&'a AugmentationMap>,
    /// Hash width for text payloads.
    pub text_dim: usize,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub predictor: Predictor,
    /// Optimizer steps summed over every replica, plus one per SWA
    /// averaging step.
    pub member_steps: u64,
    /// Steps the Default strategy takes on the same data.
    pub default_steps: u64,
}

impl RunOutput {
    pub fn measured_cost(&self) -> f64 {
        self.member_steps as f64 / self.default_steps as f64
    }
}

struct Recipe {
    optimizer: OptimizerKind,
    schedule: ScheduleSpec,
    regularizer: Regularizer,
}

impl Recipe {
    fn default_for(cfg: &TrainConfig, total_steps: u64) -> Recipe {
        Recipe {
            optimizer: cfg.optimizer,
            schedule: ScheduleSpec { kind: cfg.schedule, base_lr: cfg.lr, total_steps },
            regularizer: Regularizer::Dropout,
        }
    }
}

struct Ctx<'a> {
    spec: &'a ModelSpec,
    backbone: &'a ParamSet,
    seed: u64,
    batch_size: usize,
    member_steps: u64,
}

impl Ctx<'_> {
    fn stream(&self, label: &str, k: usize) -> RngStream {
        RngStream::member(self.seed, label, k)
    }

    fn fresh_model(&self, k: usize) -> Result<Model> {
        init_model(self.spec, self.backbone, &mut self.stream("init", k))
    }
}

fn train_step(
    model: &mut Model,
    opt: &mut OptimizerState,
    x: ArrayView2<'_, f64>,
    y: &[usize],
    lr: f64,
    regularizer: Regularizer,
    rng: &mut RngStream,
) -> Result<()> {
    let (_, cache) = forward(model, x, ForwardMode::Train { rng, regularizer })?;
    let (grads, loss) = backward(model, &cache, y)?;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    opt.step(model.params_mut(), &grads, lr)
}

#[derive(Default)]
struct Hooks {
    input_noise: Option<(f64, u64)>,
    weight_noise: Option<(f64, u64)>,
    swa_start: Option<u64>,
}

/// `mean += (x - mean) / count`, elementwise.
fn update_running_mean(mean: &mut ParamSet, x: &ParamSet, count: u64) {
    let c = count as f64;
    for (m, g) in mean.groups_mut().iter_mut().zip(x.groups()) {
        for (a, &b) in m.tensor_mut().data_mut().iter_mut().zip(g.values()) {
            *a += (b - *a) / c;
        }
    }
}

/// Train replica `k` as a single model for `steps` steps.
fn train_single(ctx: &mut Ctx<'_>, k: usize, set: &TrainingSet, recipe: &Recipe, steps: u64, hooks: &Hooks) -> Result<ParamSet> {
    let mut model = ctx.fresh_model(k)?;
    let mut opt = OptimizerState::new(recipe.optimizer, model.params());
    let mut batches = BatchStream::new(set.len(), ctx.batch_size, ctx.stream("data_order", k))?;
    let mut dropout = ctx.stream("model_noise", k);
    let mut noise = ctx.stream("mitigation_noise", k);
    let mut swa: Option<(ParamSet, u64)> = None;
    for t in 0..steps {
        let idx = batches.next_batch();
        let (mut x, y) = set.rows(&idx);
        let due = |every: u64| (t + 1) % every == 0;
        if let Some((var, every)) = hooks.input_noise {
            if due(every) {
                x = perturb_input(&x, var, &mut noise)?;
            }
        }
        let lr = recipe.schedule.lr_at(t)?;
        train_step(&mut model, &mut opt, x.view(), &y, lr, recipe.regularizer, &mut dropout)?;
        ctx.member_steps += 1;
        if let Some((var, every)) = hooks.weight_noise {
            if due(every) {
                let spec = NoiseSpec { var_noise: var, scaling: NoiseScaling::StdOverSteps, target: NoiseTarget::default() };
                let noisy = perturb(model.params(), &spec, t + 1, &mut noise)?;
                *model.params_mut() = noisy;
            }
        }
        if let Some(start) = hooks.swa_start {
            if t >= start {
                // the running average is a second model updated every step
                ctx.member_steps += 1;
                match &mut swa {
                    None => swa = Some((model.params().clone(), 1)),
                    Some((mean, n)) => {
                        *n += 1;
                        update_running_mean(mean, model.params(), *n);
                    }
                }
            }
        }
    }
    Ok(match swa {
        Some((mean, _)) => mean,
        None => model.into_params(),
    })
}

struct Replica {
    model: Model,
    opt: OptimizerState,
}

fn run_plan(ctx: &mut Ctx<'_>, set: &TrainingSet, plan: &PhasePlan, deni: &DeniConfig, recipe: &Recipe) -> Result<Predictor> {
    let size = deni.ensemble_size;
    let mut batches = BatchStream::new(set.len(), ctx.batch_size, ctx.stream("data_order", 0))?;
    let mut dropout: Vec<RngStream> = (0..size).map(|k| ctx.stream("model_noise", k)).collect();
    let mut noise: Vec<RngStream> = (0..size).map(|k| ctx.stream("mitigation_noise", k)).collect();
    let first = ctx.fresh_model(0)?;
    let opt = OptimizerState::new(recipe.optimizer, first.params());
    let mut replicas = vec![Replica { model: first, opt }];

    for event in &plan.events {
        match *event {
            Event::TrainSingle { start, end } | Event::TrainParallel { start, end, .. } => {
                for t in start..end {
                    let idx = batches.next_batch();
                    let (x, y) = set.rows(&idx);
                    let lr = recipe.schedule.lr_at(t)?;
                    for (r, rng) in replicas.iter_mut().zip(dropout.iter_mut()) {
                        train_step(&mut r.model, &mut r.opt, x.view(), &y, lr, recipe.regularizer, rng)?;
                    }
                    ctx.member_steps += replicas.len() as u64;
                }
            }
            Event::PerturbSpawn { step, scaling, members } => {
                let spec = NoiseSpec { var_noise: deni.var_noise, scaling, target: deni.target };
                let base = replicas[0].model.clone();
                replicas.truncate(1);
                replicas[0].opt.reset();
                for rng in noise.iter_mut().take(members).skip(1) {
                    let mut model = base.clone();
                    *model.params_mut() = perturb(base.params(), &spec, step, rng)?;
                    let opt = OptimizerState::new(recipe.optimizer, model.params());
                    replicas.push(Replica { model, opt });
                }
            }
            Event::Aggregate { .. } => {
                let avg = {
                    let refs: Vec<&ParamSet> = replicas.iter().map(|r| r.model.params()).collect();
                    interpolate(&refs)?
                };
                replicas.truncate(1);
                *replicas[0].model.params_mut() = avg;
                replicas[0].opt.reset();
            }
            Event::FinalEnsemble { .. } => {
                return Predictor::ensemble(replicas.into_iter().map(|r| r.model.into_params()).collect());
            }
        }
    }
    let last = replicas.into_iter().next().expect("at least one replica");
    Ok(Predictor::SingleModel { params: last.model.into_params() })
}

fn expanded(data: &TrainData<'_>, n: usize) -> Result<TrainingSet> {
    let aug = data
        .augmentations
        .ok_or_else(|| Error::config("augmentation strategies need an augmentation map"))?;
    expand_with_augmentations(data.dataset, aug, n)?.vectorize(data.text_dim)
}

/// Train `strategy` on `data` from the given backbone and return the
/// resulting predictor together with the step accounting.
pub fn run_strategy(
    strategy: &StrategyConfig,
    spec: &ModelSpec,
    backbone: &ParamSet,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<RunOutput> {
    strategy.validate()?;
    cfg.validate()?;
    spec.validate()?;
    let base = data.dataset.vectorize(data.text_dim)?;
    if base.features.ncols() != spec.input_dim || base.num_classes != spec.num_classes {
        return Err(Error::shape(format!(
            "data has {} features and {} classes, model expects {} and {}",
            base.features.ncols(),
            base.num_classes,
            spec.input_dim,
            spec.num_classes
        )));
    }
    base.check_support()?;
    let default_steps = cfg.total_steps(base.len());
    let mut ctx = Ctx { spec, backbone, seed, batch_size: cfg.batch_size, member_steps: 0 };
    let single = |params| Predictor::SingleModel { params };

    let predictor = match strategy {
        StrategyConfig::Default => {
            let recipe = Recipe::default_for(cfg, default_steps);
            single(train_single(&mut ctx, 0, &base, &recipe, default_steps, &Hooks::default())?)
        }
        StrategyConfig::BestPractices => {
            let steps = 2 * default_steps;
            let recipe = Recipe {
                optimizer: OptimizerKind::AdamW { bias_correction: true, weight_decay: 0.01 },
                schedule: ScheduleSpec { kind: ScheduleKind::WarmupLinear { warmup_frac: 0.1 }, base_lr: cfg.lr, total_steps: steps },
                regularizer: Regularizer::Dropout,
            };
            single(train_single(&mut ctx, 0, &base, &recipe, steps, &Hooks::default())?)
        }
        StrategyConfig::Ensemble { size } => {
            let recipe = Recipe::default_for(cfg, default_steps);
            let members = (0..*size)
                .map(|k| train_single(&mut ctx, k, &base, &recipe, default_steps, &Hooks::default()))
                .collect::<Result<Vec<_>>>()?;
            if members.len() == 1 {
                single(members.into_iter().next().expect("one member"))
            } else {
                Predictor::ensemble(members)?
            }
        }
        StrategyConfig::NoiseInput { var, every } => {
            let recipe = Recipe::default_for(cfg, default_steps);
            let hooks = Hooks { input_noise: Some((*var, *every)), ..Hooks::default() };
            single(train_single(&mut ctx, 0, &base, &recipe, default_steps, &hooks)?)
        }
        StrategyConfig::NoiseWeights { var, every } => {
            let recipe = Recipe::default_for(cfg, default_steps);
            let hooks = Hooks { weight_noise: Some((*var, *every)), ..Hooks::default() };
            single(train_single(&mut ctx, 0, &base, &recipe, default_steps, &hooks)?)
        }
        StrategyConfig::Swa { start_frac } => {
            // a constant rate at the model's learning rate throughout
            let recipe = Recipe::default_for(cfg, default_steps);
            let start = (start_frac * default_steps as f64).floor() as u64;
            let hooks = Hooks { swa_start: Some(start), ..Hooks::default() };
            single(train_single(&mut ctx, 0, &base, &recipe, default_steps, &hooks)?)
        }
        StrategyConfig::Mixout { p } => {
            if spec.tuning == TuningMode::HeadOnly {
                return Err(Error::config("mixout needs trainable pretrained weights (full or LoRA tuning)"));
            }
            let recipe = Recipe { regularizer: Regularizer::Mixout { p: *p }, ..Recipe::default_for(cfg, default_steps) };
            single(train_single(&mut ctx, 0, &base, &recipe, default_steps, &Hooks::default())?)
        }
        StrategyConfig::Augment { n } => {
            let set = expanded(data, *n)?;
            let steps = augment_steps(cfg, set.len());
            let recipe = Recipe::default_for(cfg, steps);
            single(train_single(&mut ctx, 0, &set, &recipe, steps, &Hooks::default())?)
        }
        StrategyConfig::De(deni) | StrategyConfig::Ni(deni) | StrategyConfig::Deni(deni) => {
            let variant = match strategy {
                StrategyConfig::De(_) => Variant::De,
                StrategyConfig::Ni(_) => Variant::Ni,
                _ => Variant::Deni,
            };
            let plan = build_phase_plan(deni, default_steps, variant)?;
            let recipe = Recipe::default_for(cfg, default_steps);
            run_plan(&mut ctx, &base, &plan, deni, &recipe)?
        }
        StrategyConfig::Denials { deni, n } => {
            let set = expanded(data, *n)?;
            let steps = cfg.total_steps(set.len());
            let deni = denials_config(deni, *n);
            let plan = build_phase_plan(&deni, steps, Variant::Deni)?;
            let recipe = Recipe::default_for(cfg, steps);
            run_plan(&mut ctx, &set, &plan, &deni, &recipe)?
        }
    };
    Ok(RunOutput { predictor, member_steps: ctx.member_steps, default_steps })
}
