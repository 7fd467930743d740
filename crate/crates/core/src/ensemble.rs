//! Uniform weight interpolation and hard voting.

use ndarray::{ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::model::{forward, ForwardMode, Model, ModelSpec};
use crate::param::{exact_sum, ParamSet, Tensor};

/// A trained classifier: one parameter set or a voting ensemble.
#[derive(Clone, Debug)]
pub enum Predictor {
    SingleModel { params: ParamSet },
    VotingEnsemble { members: Vec<ParamSet> },
}

impl Predictor {
    pub fn ensemble(members: Vec<ParamSet>) -> Result<Predictor> {
        if members.len() < 2 {
            return Err(Error::config("a voting ensemble needs at least 2 members"));
        }
        for m in &members[1..] {
            members[0].check_congruent(m)?;
        }
        Ok(Predictor::VotingEnsemble { members })
    }

    pub fn members(&self) -> Vec<&ParamSet> {
        match self {
            Predictor::SingleModel { params } => vec![params],
            Predictor::VotingEnsemble { members } => members.iter().collect(),
        }
    }
}

/// Elementwise mean of congruent parameter sets. Sums are computed exactly
/// and rounded once, so the result does not depend on member order.
pub fn interpolate(members: &[&ParamSet]) -> Result<ParamSet> {
    let first = members.first().ok_or_else(|| Error::Empty("no members to interpolate".into()))?;
    for m in &members[1..] {
        first.check_congruent(m)?;
    }
    let k = members.len() as f64;
    let mut out = (*first).clone();
    for (gi, group) in out.groups_mut().iter_mut().enumerate() {
        let n = group.tensor().len();
        let data = (0..n)
            .map(|j| exact_sum(members.iter().map(|m| m.groups()[gi].values()[j])) / k)
            .collect();
        *group.tensor_mut() = Tensor::new(group.tensor().shape().to_vec(), data)?;
    }
    Ok(out)
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: ArrayView1<'_, f64>) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Per-sample modal label over `per_member[member][sample]`; ties go to the
/// lowest class index.
pub fn hard_vote(per_member: &[Vec<usize>], num_classes: usize) -> Result<Vec<usize>> {
    let first = per_member.first().ok_or_else(|| Error::Empty("no member votes".into()))?;
    let n = first.len();
    if per_member.iter().any(|m| m.len() != n) {
        return Err(Error::shape("members voted on different numbers of samples"));
    }
    let mut counts = vec![0usize; num_classes];
    let mut out = Vec::with_capacity(n);
    for s in 0..n {
        counts.iter_mut().for_each(|c| *c = 0);
        for m in per_member {
            let label = m[s];
            if label >= num_classes {
                return Err(Error::config(format!("vote {label} outside [0, {num_classes})")));
            }
            counts[label] += 1;
        }
        let mut best = 0;
        for c in 1..num_classes {
            if counts[c] > counts[best] {
                best = c;
            }
        }
        out.push(best);
    }
    Ok(out)
}

fn model_labels(spec: &ModelSpec, params: &ParamSet, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    let model = Model::from_params(spec, params.clone())?;
    let (logits, _) = forward(&model, features, ForwardMode::Eval)?;
    Ok(logits.rows().into_iter().map(argmax).collect())
}

/// Eval-mode labels for every row of `features`.
pub fn predict(predictor: &Predictor, spec: &ModelSpec, features: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
    match predictor {
        Predictor::SingleModel { params } => model_labels(spec, params, features),
        Predictor::VotingEnsemble { members } => {
            let votes = members
                .iter()
                .map(|m| model_labels(spec, m, features))
                .collect::<Result<Vec<_>>>()?;
            hard_vote(&votes, spec.num_classes)
        }
    }
}
