//! Adam / AdamW and learning-rate schedules.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamSet;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    Adam {
        #[serde(default)]
        bias_correction: bool,
    },
    AdamW {
        #[serde(default = "yes")]
        bias_correction: bool,
        #[serde(default = "default_weight_decay")]
        weight_decay: f64,
    },
}

fn yes() -> bool {
    true
}

fn default_weight_decay() -> f64 {
    0.01
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::Adam {
            bias_correction: false,
        }
    }
}

impl OptimizerKind {
    fn bias_correction(&self) -> bool {
        match *self {
            OptimizerKind::Adam { bias_correction } | OptimizerKind::AdamW { bias_correction, .. } => {
                bias_correction
            }
        }
    }

    fn weight_decay(&self) -> f64 {
        match *self {
            OptimizerKind::Adam { .. } => 0.0,
            OptimizerKind::AdamW { weight_decay, .. } => weight_decay,
        }
    }
}

/// Adam moments for every trainable group of one model replica.
#[derive(Clone, Debug)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step_count: u64,
    // indexed like the parameter set; empty for frozen groups
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl OptimizerState {
    /// Zeroed state with the usual defaults (0.9, 0.999, 1e-8).
    pub fn new(kind: OptimizerKind, params: &ParamSet) -> Self {
        let zeros: Vec<Vec<f64>> = params
            .groups()
            .iter()
            .map(|g| if g.trainable() { vec![0.0; g.tensor().len()] } else { Vec::new() })
            .collect();
        Self {
            kind,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step_count: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn reset(&mut self) {
        self.step_count = 0;
        for m in self.first.iter_mut().chain(self.second.iter_mut()) {
            m.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    /// One update of every trainable group in place.
    pub fn step(&mut self, params: &mut ParamSet, grads: &ParamSet, lr: f64) -> Result<()> {
        params.check_congruent(grads)?;
        if self.first.len() != params.len() {
            return Err(Error::Incongruent("optimizer state built for another parameter set".into()));
        }
        for (g, grad) in params.groups().iter().zip(grads.groups()) {
            if g.trainable() && grad.values().iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient(g.name().to_owned()));
            }
        }

        self.step_count += 1;
        let t = self.step_count as i32;
        let (bc1, bc2) = if self.kind.bias_correction() {
            (1.0 - self.beta1.powi(t), 1.0 - self.beta2.powi(t))
        } else {
            (1.0, 1.0)
        };
        let decay = lr * self.kind.weight_decay();
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);

        for (idx, (group, grad)) in params.groups_mut().iter_mut().zip(grads.groups()).enumerate() {
            if !group.trainable() {
                continue;
            }
            if self.first[idx].len() != grad.values().len() {
                return Err(Error::Incongruent(format!("optimizer state for `{}`", group.name())));
            }
            let m = &mut self.first[idx];
            let v = &mut self.second[idx];
            for (((w, &g), m), v) in group
                .tensor_mut()
                .data_mut()
                .iter_mut()
                .zip(grad.values())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                if decay != 0.0 {
                    *w -= decay * *w;
                }
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *w -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScheduleKind {
    #[default]
    Constant,
    WarmupLinear { warmup_frac: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub base_lr: f64,
    pub total_steps: u64,
}

impl ScheduleSpec {
    /// Learning rate for the update that follows `step` completed steps.
    pub fn lr_at(&self, step: u64) -> Result<f64> {
        if step > self.total_steps {
            return Err(Error::StepOutOfRange {
                step,
                total: self.total_steps,
            });
        }
        match self.kind {
            ScheduleKind::Constant => Ok(self.base_lr),
            ScheduleKind::WarmupLinear { warmup_frac } => {
                if !(warmup_frac > 0.0 && warmup_frac < 1.0) {
                    return Err(Error::config("warmup_frac must be in (0, 1)"));
                }
                let total = self.total_steps as f64;
                let warmup = warmup_frac * total;
                let s = step as f64;
                if s < warmup {
                    Ok(self.base_lr * s / warmup)
                } else {
                    Ok(self.base_lr * (total - s) / (total - warmup))
                }
            }
        }
    }
}
