use serde::{Deserialize, Serialize};

use super::sum::exact_sum;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Where a parameter group came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Pretrained,
    NewlyInitialized,
    Adapter,
}

impl Origin {
    pub(crate) fn to_byte(self) -> u8 {
        match self {
            Origin::Pretrained => 0,
            Origin::NewlyInitialized => 1,
            Origin::Adapter => 2,
        }
    }

    pub(crate) fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Origin::Pretrained),
            1 => Some(Origin::NewlyInitialized),
            2 => Some(Origin::Adapter),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    name: String,
    tensor: Tensor,
    origin: Origin,
    trainable: bool,
}

impl ParamGroup {
    pub fn new(name: impl Into<String>, tensor: Tensor, origin: Origin, trainable: bool) -> Self {
        Self {
            name: name.into(),
            tensor,
            origin,
            trainable,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &Tensor {
        &self.tensor
    }

    pub(crate) fn tensor_mut(&mut self) -> &mut Tensor {
        &mut self.tensor
    }

    pub fn origin(&self) -> Origin {
        self.origin
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn with_trainable(mut self, trainable: bool) -> Self {
        self.trainable = trainable;
        self
    }

    pub fn with_tensor(&self, tensor: Tensor) -> Result<Self> {
        if tensor.shape() != self.tensor.shape() {
            return Err(Error::shape(format!(
                "group `{}` expects {:?}, got {:?}",
                self.name,
                self.tensor.shape(),
                tensor.shape()
            )));
        }
        Ok(Self {
            tensor,
            ..self.clone()
        })
    }

    pub fn values(&self) -> &[f64] {
        self.tensor.data()
    }
}

/// Ordered collection of uniquely named parameter groups.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    groups: Vec<ParamGroup>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_groups(groups: Vec<ParamGroup>) -> Result<Self> {
        let mut set = Self::new();
        for g in groups {
            set.push(g)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, group: ParamGroup) -> Result<()> {
        if self.get(group.name()).is_some() {
            return Err(Error::config(format!("duplicate parameter group `{}`", group.name())));
        }
        self.groups.push(group);
        Ok(())
    }

    pub fn groups(&self) -> &[ParamGroup] {
        &self.groups
    }

    pub(crate) fn groups_mut(&mut self) -> &mut [ParamGroup] {
        &mut self.groups
    }

    pub fn get(&self, name: &str) -> Option<&ParamGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    pub(crate) fn index_of(&self, name: &str) -> Option<usize> {
        self.groups.iter().position(|g| g.name == name)
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn num_elements(&self) -> usize {
        self.groups.iter().map(|g| g.tensor.len()).sum()
    }

    pub fn num_trainable(&self) -> usize {
        self.groups
            .iter()
            .filter(|g| g.trainable)
            .map(|g| g.tensor.len())
            .sum()
    }

    /// Names, shapes and origins match pairwise.
    pub fn check_congruent(&self, other: &ParamSet) -> Result<()> {
        if self.groups.len() != other.groups.len() {
            return Err(Error::Incongruent(format!(
                "{} groups vs {}",
                self.groups.len(),
                other.groups.len()
            )));
        }
        for (a, b) in self.groups.iter().zip(&other.groups) {
            if a.name != b.name || a.origin != b.origin || a.tensor.shape() != b.tensor.shape() {
                return Err(Error::Incongruent(format!(
                    "`{}` {:?} {:?} vs `{}` {:?} {:?}",
                    a.name,
                    a.origin,
                    a.tensor.shape(),
                    b.name,
                    b.origin,
                    b.tensor.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn is_congruent(&self, other: &ParamSet) -> bool {
        self.check_congruent(other).is_ok()
    }

    pub fn zeros_like(&self) -> ParamSet {
        ParamSet {
            groups: self
                .groups
                .iter()
                .map(|g| ParamGroup {
                    tensor: Tensor::zeros(g.tensor.shape()),
                    ..g.clone()
                })
                .collect(),
        }
    }

    /// Groups whose origin satisfies `keep`, in order.
    pub fn subset(&self, keep: impl Fn(Origin) -> bool) -> ParamSet {
        ParamSet {
            groups: self
                .groups
                .iter()
                .filter(|g| keep(g.origin))
                .cloned()
                .collect(),
        }
    }

    pub fn bit_eq(&self, other: &ParamSet) -> bool {
        self.groups.len() == other.groups.len()
            && self.groups.iter().zip(&other.groups).all(|(a, b)| {
                a.name == b.name && a.origin == b.origin && a.tensor.bit_eq(&b.tensor)
            })
    }

    pub fn all_finite(&self) -> bool {
        self.groups
            .iter()
            .all(|g| g.tensor.data().iter().all(|v| v.is_finite()))
    }
}

/// Elementwise `dst + scale * delta` as a fresh set.
pub fn axpy(dst: &ParamSet, delta: &ParamSet, scale: f64) -> Result<ParamSet> {
    dst.check_congruent(delta)?;
    let mut out = dst.clone();
    for (g, d) in out.groups.iter_mut().zip(&delta.groups) {
        for (w, &dv) in g.tensor.data_mut().iter_mut().zip(d.tensor.data()) {
            *w += scale * dv;
        }
        if g.tensor.data().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("axpy result for `{}`", g.name)));
        }
    }
    Ok(out)
}

/// Population standard deviation (divisor = element count) of a group.
pub fn param_std(group: &ParamGroup) -> Result<f64> {
    let values = group.values();
    if values.len() < 2 {
        return Err(Error::DegenerateGroup(group.name.clone()));
    }
    let first = values[0];
    if values.iter().all(|&v| v == first) {
        return Ok(0.0);
    }
    let n = values.len() as f64;
    let mean = exact_sum(values.iter().copied()) / n;
    let ss = exact_sum(values.iter().map(|&v| (v - mean) * (v - mean)));
    Ok((ss / n).sqrt())
}
