//! Datasets, splits, shot sampling, feature hashing, synthetic data and
//! augmentation expansion.

mod augment;
mod batch;
mod hash;
mod io;
mod split;
mod synth;

use std::collections::HashSet;

use ndarray::Array2;

pub use augment::{expand_with_augmentations, load_augmentations, AugmentationMap, PARAPHRASE_MARK};
pub use batch::{epoch_batches, BatchStream};
pub use hash::{fnv1a64, hash_vectorize};
pub use io::{load_dataset, write_jsonl, Format};
pub use split::{sample_shots, split_80_20};
pub use synth::{synth_augmentations, synth_blobs, SynthSpec};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Payload {
    Text(String),
    Features(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: String,
    pub payload: Payload,
    pub label: usize,
}

/// Labelled samples with a dense label index. `label_names[i]` is the
/// original label of class `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    label_names: Vec<String>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, label_names: Vec<String>) -> Result<Dataset> {
        if label_names.len() < 2 {
            return Err(Error::config("a dataset needs at least 2 classes"));
        }
        let mut ids = HashSet::with_capacity(samples.len());
        let mut width = None;
        let mut text = None;
        for s in &samples {
            if !ids.insert(s.id.as_str()) {
                return Err(Error::config(format!("duplicate sample id `{}`", s.id)));
            }
            if s.label >= label_names.len() {
                return Err(Error::config(format!("sample `{}` has label {} outside [0, {})", s.id, s.label, label_names.len())));
            }
            let is_text = matches!(s.payload, Payload::Text(_));
            if *text.get_or_insert(is_text) != is_text {
                return Err(Error::config("dataset mixes text and feature payloads"));
            }
            if let Payload::Features(f) = &s.payload {
                if f.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite(format!("features of `{}`", s.id)));
                }
                if *width.get_or_insert(f.len()) != f.len() {
                    return Err(Error::shape(format!("sample `{}` has {} features, expected {}", s.id, f.len(), width.unwrap())));
                }
            }
        }
        Ok(Dataset { samples, label_names })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.label).collect()
    }

    pub fn is_text(&self) -> bool {
        matches!(self.samples.first().map(|s| &s.payload), Some(Payload::Text(_)))
    }

    /// Width of the vectorized features: the payload width for feature
    /// datasets, `text_dim` for text.
    pub fn feature_dim(&self, text_dim: usize) -> usize {
        match self.samples.first().map(|s| &s.payload) {
            Some(Payload::Features(f)) => f.len(),
            _ => text_dim,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Samples at `indices`, in the given order, sharing the label map.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            label_names: self.label_names.clone(),
        }
    }

    /// Feature matrix and labels; text is hashed into `text_dim` buckets.
    pub fn vectorize(&self, text_dim: usize) -> Result<TrainingSet> {
        if self.is_empty() {
            return Err(Error::Empty("dataset has no samples".into()));
        }
        let dim = self.feature_dim(text_dim);
        let mut features = Array2::zeros((self.len(), dim));
        for (mut row, s) in features.rows_mut().into_iter().zip(&self.samples) {
            match &s.payload {
                Payload::Features(f) => row.assign(&ndarray::ArrayView1::from(f.as_slice())),
                Payload::Text(t) => row.assign(&ndarray::Array1::from(hash_vectorize(t, dim)?)),
            }
        }
        Ok(TrainingSet { features, labels: self.labels(), num_classes: self.num_classes() })
    }
}

/// Vectorized samples ready for training or evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingSet {
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn rows(&self, indices: &[usize]) -> (Array2<f64>, Vec<usize>) {
        let x = self.features.select(ndarray::Axis(0), indices);
        let y = indices.iter().map(|&i| self.labels[i]).collect();
        (x, y)
    }

    /// Every class present at least once.
    pub fn check_support(&self) -> Result<()> {
        let mut seen = vec![false; self.num_classes];
        for &l in &self.labels {
            seen[l] = true;
        }
        match seen.iter().position(|s| !s) {
            Some(c) => Err(Error::InsufficientData(format!("class {c} has no training samples"))),
            None => Ok(()),
        }
    }
}
