//! Normalized training cost: member-steps divided by the Default strategy's
//! steps on the same data.

use crate::error::Result;
use crate::mitigation::{augment_steps, build_phase_plan, denials_config, StrategyConfig, TrainConfig, Variant};

/// Cost of `strategy` relative to Default for a training set of
/// `train_size` samples. Noise injection, mixout and the SWA average update
/// are free in optimizer steps except that SWA counts its running average as
/// a second model trained from `start_frac` onwards.
pub fn normalized_cost(strategy: &StrategyConfig, cfg: &TrainConfig, train_size: usize) -> Result<f64> {
    strategy.validate()?;
    cfg.validate()?;
    let default_steps = cfg.total_steps(train_size);
    let ratio = |steps: u64| steps as f64 / default_steps as f64;
    Ok(match strategy {
        StrategyConfig::Default
        | StrategyConfig::NoiseInput { .. }
        | StrategyConfig::NoiseWeights { .. }
        | StrategyConfig::Mixout { .. } => 1.0,
        StrategyConfig::BestPractices => 2.0,
        StrategyConfig::Ensemble { size } => *size as f64,
        StrategyConfig::Swa { start_frac } => 1.0 + (1.0 - start_frac),
        StrategyConfig::Augment { n } => ratio(augment_steps(cfg, train_size * (n + 1))),
        StrategyConfig::De(c) => ratio(build_phase_plan(c, default_steps, Variant::De)?.member_steps()),
        StrategyConfig::Ni(c) => ratio(build_phase_plan(c, default_steps, Variant::Ni)?.member_steps()),
        StrategyConfig::Deni(c) => ratio(build_phase_plan(c, default_steps, Variant::Deni)?.member_steps()),
        StrategyConfig::Denials { deni, n } => {
            let steps = cfg.total_steps(train_size * (n + 1));
            ratio(build_phase_plan(&denials_config(deni, *n), steps, Variant::Deni)?.member_steps())
        }
    })
}
