//! Paraphrase augmentation.
//!
//! Augmentation files are JSONL with one `{"id": str, "paraphrases": [..]}`
//! object per original sample. Paraphrases are strings for text datasets or
//! feature arrays for feature datasets, ordered best first.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{Dataset, Payload, Sample};
use crate::error::{Error, Result};

/// Separator between an original id and the paraphrase index.
pub const PARAPHRASE_MARK: &str = "#p";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AugmentationMap {
    paraphrases: BTreeMap<String, Vec<Payload>>,
}

impl AugmentationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: impl Into<String>, paraphrases: Vec<Payload>) -> Result<()> {
        let id = id.into();
        if paraphrases.is_empty() {
            return Err(Error::config(format!("no paraphrases for `{id}`")));
        }
        self.paraphrases.insert(id, paraphrases);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[Payload]> {
        self.paraphrases.get(id).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.paraphrases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paraphrases.is_empty()
    }

    /// Every key must name a sample of `ds`.
    pub fn check_keys(&self, ds: &Dataset) -> Result<()> {
        let ids: std::collections::HashSet<&str> = ds.samples().iter().map(|s| s.id.as_str()).collect();
        match self.paraphrases.keys().find(|k| !ids.contains(k.as_str())) {
            Some(k) => Err(Error::config(format!("augmentation for unknown sample `{k}`"))),
            None => Ok(()),
        }
    }
}

pub fn load_augmentations(path: &Path) -> Result<AugmentationMap> {
    let reader = BufReader::new(File::open(path)?);
    let mut map = AugmentationMap::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| Error::Parse { path: PathBuf::from(path), line: i + 1, msg };
        let v: Value = serde_json::from_str(&line).map_err(|e| err(e.to_string()))?;
        let id = v.get("id").and_then(Value::as_str).ok_or_else(|| err("missing string field `id`".into()))?;
        let list = v
            .get("paraphrases")
            .and_then(Value::as_array)
            .ok_or_else(|| err("missing array field `paraphrases`".into()))?;
        let payloads = list
            .iter()
            .map(|p| match p {
                Value::String(s) => Ok(Payload::Text(s.clone())),
                Value::Array(xs) => xs
                    .iter()
                    .map(|x| x.as_f64().ok_or_else(|| err("non-numeric paraphrase feature".into())))
                    .collect::<Result<Vec<_>>>()
                    .map(Payload::Features),
                other => Err(err(format!("paraphrase must be a string or an array, got {other}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        map.insert(id, payloads).map_err(|e| err(e.to_string()))?;
    }
    Ok(map)
}

/// The original samples followed by the first `n` paraphrases of each, with
/// ids `<id>#p<j>` (`j` starting at 1) and the original label.
pub fn expand_with_augmentations(train: &Dataset, aug: &AugmentationMap, n: usize) -> Result<Dataset> {
    if n == 0 {
        return Ok(train.clone());
    }
    let mut samples = train.samples().to_vec();
    for s in train.samples() {
        let list = aug
            .get(&s.id)
            .ok_or_else(|| Error::InsufficientData(format!("no augmentation for `{}`", s.id)))?;
        if list.len() < n {
            return Err(Error::InsufficientData(format!("`{}` has {} paraphrases, {n} requested", s.id, list.len())));
        }
        for (j, payload) in list[..n].iter().enumerate() {
            samples.push(Sample { id: format!("{}{PARAPHRASE_MARK}{}", s.id, j + 1), payload: payload.clone(), label: s.label });
        }
    }
    Dataset::new(samples, train.label_names().to_vec())
}
