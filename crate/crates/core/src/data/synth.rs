//! Gaussian-blob classification data.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{AugmentationMap, Dataset, Payload, Sample};
use crate::error::{Error, Result};
use crate::param::derive_stream;

fn default_paraphrase_std() -> f64 {
    0.1
}

/// Parameters of [`synth_blobs`]; also the `gen-synth` input schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub n_per_class: usize,
    pub center_scale: f64,
    pub noise_std: f64,
    #[serde(default)]
    pub label_flip_prob: f64,
    #[serde(default)]
    pub seed: u64,
    /// Std of the jitter that turns a sample into a "paraphrase".
    #[serde(default = "default_paraphrase_std")]
    pub paraphrase_std: f64,
}

impl SynthSpec {
    pub fn generate(&self) -> Result<Dataset> {
        synth_blobs(
            self.num_classes,
            self.dim,
            self.n_per_class,
            self.center_scale,
            self.noise_std,
            self.label_flip_prob,
            self.seed,
        )
    }
}

/// Class centers `~ Normal(0, center_scale^2 I)`, samples `center +
/// Normal(0, noise_std^2 I)`; with probability `label_flip_prob` a sample's
/// label is replaced by a uniformly chosen other class. Samples are ordered
/// class by class with ids `s<index>`.
pub fn synth_blobs(
    num_classes: usize,
    dim: usize,
    n_per_class: usize,
    center_scale: f64,
    noise_std: f64,
    label_flip_prob: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes < 2 || dim == 0 || n_per_class == 0 {
        return Err(Error::config("synth_blobs needs >= 2 classes, dim > 0 and samples per class > 0"));
    }
    if !(center_scale > 0.0) || !(noise_std >= 0.0) || !(0.0..0.5).contains(&label_flip_prob) {
        return Err(Error::config("synth_blobs needs center_scale > 0, noise_std >= 0 and flip probability in [0, 0.5)"));
    }
    let mut centers_rng = derive_stream(seed, "synth/centers");
    let mut sample_rng = derive_stream(seed, "synth/samples");
    let mut flip_rng = derive_stream(seed, "synth/flip");
    let centers: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            (0..dim)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut centers_rng);
                    center_scale * z
                })
                .collect()
        })
        .collect();
    let mut samples = Vec::with_capacity(num_classes * n_per_class);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            let features = center
                .iter()
                .map(|&m| {
                    let z: f64 = StandardNormal.sample(&mut sample_rng);
                    m + noise_std * z
                })
                .collect();
            // both draws are always taken so flips do not shift later samples
            let flip = flip_rng.uniform() < label_flip_prob;
            let other = (flip_rng.uniform() * (num_classes - 1) as f64) as usize;
            let label = if flip { (c + 1 + other.min(num_classes - 2)) % num_classes } else { c };
            samples.push(Sample { id: format!("s{}", samples.len()), payload: Payload::Features(features), label });
        }
    }
    Dataset::new(samples, (0..num_classes).map(|c| c.to_string()).collect())
}

/// `n` jittered copies (`+ Normal(0, std^2)`) of every sample, standing in for
/// paraphrases of a feature dataset.
pub fn synth_augmentations(ds: &Dataset, n: usize, std: f64, seed: u64) -> Result<AugmentationMap> {
    if !(std >= 0.0) || n == 0 {
        return Err(Error::config("augmentation needs n > 0 and std >= 0"));
    }
    let mut rng = derive_stream(seed, "synth/paraphrases");
    let mut map = AugmentationMap::new();
    for s in ds.samples() {
        let Payload::Features(f) = &s.payload else {
            return Err(Error::config("synthetic paraphrases need feature payloads"));
        };
        let list = (0..n)
            .map(|_| {
                Payload::Features(
                    f.iter()
                        .map(|&x| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            x + std * z
                        })
                        .collect(),
                )
            })
            .collect();
        map.insert(s.id.clone(), list)?;
    }
    Ok(map)
}
