//! Step-level schedules of the delayed-ensemble family.
//!
//! Noisy interpolation trains a single model up to `noise_start`, then
//! repeats {spawn noisy copies, train them in parallel for `steps_noisy`,
//! average them back into one model, train that model for `steps_regular`}
//! for as long as a cycle starts before `noise_end`. The delayed ensemble
//! trains a single model up to `ensemble_start`, spawns noisy copies, trains
//! them to the end and votes. The full method is the first schedule followed
//! by the second. A cycle that would run past the point where the next phase
//! begins is cut short there.

use serde::{Deserialize, Serialize};

use super::DeniConfig;
use crate::error::{Error, Result};
use crate::noise::NoiseScaling;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    De,
    Ni,
    Deni,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    TrainSingle { start: u64, end: u64 },
    PerturbSpawn { step: u64, scaling: NoiseScaling, members: usize },
    TrainParallel { start: u64, end: u64, members: usize },
    Aggregate { step: u64 },
    FinalEnsemble { step: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePlan {
    pub events: Vec<Event>,
    pub total_steps: u64,
}

impl PhasePlan {
    /// Optimizer steps summed over all members.
    pub fn member_steps(&self) -> u64 {
        self.events
            .iter()
            .map(|e| match *e {
                Event::TrainSingle { start, end } => end - start,
                Event::TrainParallel { start, end, members } => (end - start) * members as u64,
                _ => 0,
            })
            .sum()
    }

    /// Steps at which a spawn or aggregation happens, in order.
    pub fn event_steps(&self) -> Vec<u64> {
        let mut steps: Vec<u64> = Vec::new();
        for e in &self.events {
            let s = match *e {
                Event::PerturbSpawn { step, .. } | Event::Aggregate { step } => step,
                _ => continue,
            };
            if steps.last() != Some(&s) {
                steps.push(s);
            }
        }
        steps
    }

    pub fn noisy_cycles(&self) -> usize {
        self.events.iter().filter(|e| matches!(e, Event::Aggregate { .. })).count()
    }

    /// Training segments must tile `[0, total_steps]` without gaps.
    pub fn check(&self) -> Result<()> {
        let mut cursor = 0;
        for e in &self.events {
            if let Event::TrainSingle { start, end } | Event::TrainParallel { start, end, .. } = *e {
                if start != cursor || end <= start {
                    return Err(Error::Plan(format!("segment {start}..{end} does not continue at step {cursor}")));
                }
                cursor = end;
            }
        }
        if cursor != self.total_steps {
            return Err(Error::Plan(format!("plan ends at {cursor}, not {}", self.total_steps)));
        }
        Ok(())
    }
}

struct Builder {
    events: Vec<Event>,
    at: u64,
}

impl Builder {
    fn single_to(&mut self, end: u64) {
        if end <= self.at {
            return;
        }
        if let Some(Event::TrainSingle { end: prev, .. }) = self.events.last_mut() {
            *prev = end;
        } else {
            self.events.push(Event::TrainSingle { start: self.at, end });
        }
        self.at = end;
    }

    fn parallel_to(&mut self, end: u64, members: usize) {
        self.events.push(Event::TrainParallel { start: self.at, end, members });
        self.at = end;
    }
}

fn frac_step(frac: f64, total: u64) -> u64 {
    (frac * total as f64).floor() as u64
}

fn cycle_len(steps: u64, cfg: &DeniConfig, total: u64) -> u64 {
    match cfg.reference_steps {
        None => steps,
        Some(r) => ((steps as f64 * total as f64 / r as f64).round() as u64).max(1),
    }
}

pub fn build_phase_plan(cfg: &DeniConfig, total_steps: u64, variant: Variant) -> Result<PhasePlan> {
    cfg.validate()?;
    let total = total_steps;
    let noise_start = frac_step(cfg.noise_start_frac, total);
    let noise_end = frac_step(cfg.noise_end_frac, total);
    let ensemble_start = frac_step(cfg.ensemble_start_frac, total);
    let noisy = cycle_len(cfg.steps_noisy, cfg, total);
    let regular = cycle_len(cfg.steps_regular, cfg, total);
    let members = cfg.ensemble_size;
    let mut b = Builder { events: Vec::new(), at: 0 };

    if variant != Variant::De {
        if noise_start == 0 || noise_start + noisy + regular > noise_end {
            return Err(Error::Plan(format!(
                "{total} steps leave no room for a {noisy}+{regular} step noisy cycle between steps {noise_start} and {noise_end}"
            )));
        }
        let limit = if variant == Variant::Deni { ensemble_start } else { total };
        b.single_to(noise_start);
        while b.at < noise_end {
            let spawn = b.at;
            b.events.push(Event::PerturbSpawn { step: spawn, scaling: NoiseScaling::StdOverSteps, members });
            b.parallel_to((spawn + noisy).min(limit), members);
            b.events.push(Event::Aggregate { step: b.at });
            b.single_to((spawn + noisy + regular).min(limit));
            if b.at >= limit {
                break;
            }
        }
        b.single_to(limit);
    }

    if variant != Variant::Ni {
        if ensemble_start == 0 || ensemble_start >= total {
            return Err(Error::Plan(format!("{total} steps leave no room for the final ensemble")));
        }
        b.single_to(ensemble_start);
        b.events.push(Event::PerturbSpawn { step: ensemble_start, scaling: NoiseScaling::StdOnly, members });
        b.parallel_to(total, members);
        b.events.push(Event::FinalEnsemble { step: total });
    }

    let plan = PhasePlan { events: b.events, total_steps: total };
    plan.check()?;
    Ok(plan)
}
