//! Fixtures shared by the benchmarks.

use deni_core::data::{Dataset, SynthSpec, TrainingSet};
use deni_core::model::{init_model, random_backbone, Model, ModelSpec, TuningMode};
use deni_core::{derive_stream, ParamSet};

pub const INPUT_DIM: usize = 32;
pub const CLASSES: usize = 4;

/// Four Gaussian blobs in 32 dimensions.
pub fn blobs(n_per_class: usize) -> Dataset {
    SynthSpec {
        num_classes: CLASSES,
        dim: INPUT_DIM,
        n_per_class,
        center_scale: 1.0,
        noise_std: 2.0,
        label_flip_prob: 0.1,
        seed: 0,
        paraphrase_std: 0.1,
    }
    .generate()
    .expect("valid synthetic spec")
}

pub fn training_set(n_per_class: usize) -> TrainingSet {
    blobs(n_per_class).vectorize(INPUT_DIM).expect("feature payloads")
}

/// The reference desk model (two 128-unit layers) with a random backbone.
pub fn desk(tuning: TuningMode) -> (ModelSpec, ParamSet, Model) {
    let spec = ModelSpec::desk(INPUT_DIM, CLASSES, tuning);
    let backbone = random_backbone(&spec, &mut derive_stream(0, "backbone")).expect("valid spec");
    let model = init_model(&spec, &backbone, &mut derive_stream(0, "init")).expect("matching backbone");
    (spec, backbone, model)
}
