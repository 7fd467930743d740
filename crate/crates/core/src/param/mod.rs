//! Parameter substrate: tensors, named parameter groups, deterministic
//! random streams and the on-disk parameter container.

mod container;
mod rng;
mod set;
mod sum;
mod tensor;

pub use container::{decode, encode, load, save, Manifest, ManifestGroup};
pub use rng::{derive_stream, RngStream};
pub use set::{axpy, param_std, Origin, ParamGroup, ParamSet};
pub use sum::exact_sum;
pub use tensor::Tensor;
