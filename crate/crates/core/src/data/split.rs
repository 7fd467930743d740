//! Stratified 80-20 split and K-shot sampling.

use rand::seq::SliceRandom;

use super::Dataset;
use crate::error::{Error, Result};
use crate::param::{derive_stream, RngStream};

fn by_class(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut classes = vec![Vec::new(); ds.num_classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        classes[s.label].push(i);
    }
    classes
}

/// Keep the chosen indices in dataset order.
fn pick(ds: &Dataset, chosen: &[bool]) -> Dataset {
    let idx: Vec<usize> = (0..ds.len()).filter(|&i| chosen[i]).collect();
    ds.select(&idx)
}

/// Stratified split: each class contributes `round(0.2 * n_c)` samples to
/// the test set. Both halves keep the original sample order.
pub fn split_80_20(ds: &Dataset, seed: u64) -> Result<(Dataset, Dataset)> {
    let mut rng = derive_stream(seed, "data_split");
    let mut test = vec![false; ds.len()];
    for (c, mut members) in by_class(ds).into_iter().enumerate() {
        if members.len() < 5 {
            return Err(Error::InsufficientData(format!(
                "class `{}` has {} samples; the split needs at least 5",
                ds.label_names()[c],
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        let n_test = (0.2 * members.len() as f64).round() as usize;
        for &i in &members[..n_test] {
            test[i] = true;
        }
    }
    let train: Vec<bool> = test.iter().map(|t| !t).collect();
    Ok((pick(ds, &train), pick(ds, &test)))
}

/// Exactly `k` samples per class, without replacement, in dataset order.
pub fn sample_shots(train: &Dataset, k: usize, rng: &mut RngStream) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::config("shots per class must be positive"));
    }
    let mut chosen = vec![false; train.len()];
    for (c, mut members) in by_class(train).into_iter().enumerate() {
        if members.len() < k {
            return Err(Error::InsufficientData(format!(
                "class `{}` has {} samples, {k} requested",
                train.label_names()[c],
                members.len()
            )));
        }
        members.shuffle(rng);
        for &i in &members[..k] {
            chosen[i] = true;
        }
    }
    Ok(pick(train, &chosen))
}
