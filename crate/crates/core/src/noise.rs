//! Gaussian perturbation of parameters and inputs.
//!
//! `var_noise` is a variance: raw draws have standard deviation
//! `sqrt(var_noise)` and are then multiplied by the scaling factor, so the
//! effective perturbation std is `sqrt(var_noise) * lambda`.
//!
//! Adding noise to every group (`NoiseTarget::AllGroups`) exists for
//! sensitivity studies only. Perturbing the pretrained backbone makes the
//! outcome very sensitive to the noise size: slightly too much noise destroys
//! the model, slightly too little does nothing.

use ndarray::Array2;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{param_std, Origin, ParamGroup, ParamSet, RngStream, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseScaling {
    /// `lambda = std(W)`
    StdOnly,
    /// `lambda = std(W) / step`
    StdOverSteps,
    /// `lambda = 1`
    NoScaling,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseTarget {
    #[default]
    NewlyInitializedAndAdapter,
    AllGroups,
}

impl NoiseTarget {
    pub fn includes(self, origin: Origin) -> bool {
        match self {
            NoiseTarget::AllGroups => true,
            NoiseTarget::NewlyInitializedAndAdapter => origin != Origin::Pretrained,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub var_noise: f64,
    pub scaling: NoiseScaling,
    #[serde(default)]
    pub target: NoiseTarget,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        // zero is accepted as the noise-free degenerate case
        if !(self.var_noise >= 0.0) || !self.var_noise.is_finite() {
            return Err(Error::config(format!("var_noise must be >= 0, got {}", self.var_noise)));
        }
        Ok(())
    }
}

/// I.i.d. `Normal(0, var)` entries. The draws are consumed even when
/// `var == 0`, so streams stay aligned across noise levels.
pub fn sample_gaussian(shape: &[usize], var: f64, rng: &mut RngStream) -> Tensor {
    let n: usize = shape.iter().product();
    let std = var.sqrt();
    let data = (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            if var == 0.0 {
                0.0
            } else {
                std * z
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).expect("finite draws")
}

pub fn lambda_ensemble(group: &ParamGroup) -> Result<f64> {
    param_std(group)
}

pub fn lambda_steps(group: &ParamGroup, step: u64) -> Result<f64> {
    if step == 0 {
        return Err(Error::config("lambda_steps is undefined at step 0"));
    }
    Ok(param_std(group)? / step as f64)
}

fn lambda(group: &ParamGroup, scaling: NoiseScaling, step: u64) -> Result<f64> {
    match scaling {
        NoiseScaling::StdOnly => lambda_ensemble(group),
        NoiseScaling::StdOverSteps => lambda_steps(group, step),
        NoiseScaling::NoScaling => Ok(1.0),
    }
}

/// The additive perturbation for one group: `z * lambda`.
pub fn noise_delta(group: &ParamGroup, spec: &NoiseSpec, step: u64, rng: &mut RngStream) -> Result<Tensor> {
    let lam = lambda(group, spec.scaling, step)?;
    if lam == 0.0 {
        log::warn!("group `{}` is constant; noise scaled by its std is a no-op", group.name());
    }
    let z = sample_gaussian(group.tensor().shape(), spec.var_noise, rng);
    let data = z.data().iter().map(|&v| v * lam).collect();
    Tensor::new(z.shape().to_vec(), data)
}

/// Fresh parameter set with every targeted group perturbed by
/// `Normal(0, var_noise) * lambda`; other groups are copied untouched.
pub fn perturb(params: &ParamSet, spec: &NoiseSpec, step: u64, rng: &mut RngStream) -> Result<ParamSet> {
    spec.validate()?;
    let mut out = params.clone();
    for group in out.groups_mut() {
        if !spec.target.includes(group.origin()) {
            continue;
        }
        let delta = noise_delta(group, spec, step, rng)?;
        for (w, d) in group.tensor_mut().data_mut().iter_mut().zip(delta.data()) {
            *w += d;
        }
        if group.values().iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("perturbed `{}`", group.name())));
        }
    }
    Ok(out)
}

/// Add `Normal(0, var)` to every input feature; labels are untouched.
pub fn perturb_input(features: &Array2<f64>, var: f64, rng: &mut RngStream) -> Result<Array2<f64>> {
    if !(var >= 0.0) {
        return Err(Error::config(format!("input noise variance must be >= 0, got {var}")));
    }
    if var == 0.0 {
        return Ok(features.clone());
    }
    let noise = sample_gaussian(&[features.len()], var, rng);
    let mut out = features.clone();
    for (x, z) in out.iter_mut().zip(noise.data()) {
        *x += z;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param::derive_stream;

    fn group(name: &str, origin: Origin, values: Vec<f64>) -> ParamGroup {
        let n = values.len();
        ParamGroup::new(name, Tensor::new(vec![n], values).unwrap(), origin, true)
    }

    fn sample_var(xs: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n
    }

    #[test]
    fn gaussian_moments() {
        let t = sample_gaussian(&[1_000_000], 0.15, &mut derive_stream(1, "mitigation_noise"));
        let v = sample_var(t.data());
        assert!((v - 0.15).abs() < 0.15 * 0.01, "variance {v}");
        let zero = sample_gaussian(&[10], 0.0, &mut derive_stream(1, "x"));
        assert!(zero.data().iter().all(|&v| v.to_bits() == 0));
        let a = sample_gaussian(&[50], 0.3, &mut derive_stream(2, "x"));
        let b = sample_gaussian(&[50], 0.3, &mut derive_stream(2, "x"));
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn lambdas() {
        let g = group("g", Origin::NewlyInitialized, vec![1.0, -1.0, 1.0, -1.0]);
        assert_eq!(lambda_ensemble(&g).unwrap(), 1.0);
        assert_eq!(lambda_steps(&g, 100).unwrap(), 0.01);
        let half = group("h", Origin::NewlyInitialized, vec![0.5, -0.5]);
        assert_eq!(lambda_steps(&half, 1).unwrap(), 0.5);
        assert!(lambda_steps(&g, 0).is_err());
        let c = group("c", Origin::NewlyInitialized, vec![2.0; 5]);
        assert_eq!(lambda_ensemble(&c).unwrap(), 0.0);

        let mut rng = derive_stream(4, "g");
        let random = group("r", Origin::NewlyInitialized, (0..37).map(|_| rng.uniform()).collect());
        let s = param_std(&random).unwrap();
        assert_eq!(lambda_ensemble(&random).unwrap().to_bits(), s.to_bits());
        assert_eq!(lambda_steps(&random, 375).unwrap().to_bits(), (s / 375.0).to_bits());
    }

    fn mixed_set() -> ParamSet {
        let mut rng = derive_stream(8, "values");
        let mut vals = |n: usize| (0..n).map(|_| rng.uniform() - 0.5).collect::<Vec<_>>();
        ParamSet::from_groups(vec![
            group("backbone.0.weight", Origin::Pretrained, vals(20)),
            group("backbone.0.lora_a", Origin::Adapter, vals(8)),
            group("head.weight", Origin::NewlyInitialized, vals(12)),
        ])
        .unwrap()
    }

    #[test]
    fn target_filter_keeps_pretrained_bits() {
        let p = mixed_set();
        let spec = NoiseSpec { var_noise: 0.15, scaling: NoiseScaling::StdOnly, target: NoiseTarget::NewlyInitializedAndAdapter };
        let out = perturb(&p, &spec, 1, &mut derive_stream(0, "mitigation_noise")).unwrap();
        assert!(out.get("backbone.0.weight").unwrap().tensor().bit_eq(p.get("backbone.0.weight").unwrap().tensor()));
        assert_ne!(out.get("head.weight").unwrap().values(), p.get("head.weight").unwrap().values());
        assert_ne!(out.get("backbone.0.lora_a").unwrap().values(), p.get("backbone.0.lora_a").unwrap().values());
        // input untouched
        assert!(p.bit_eq(&mixed_set()));

        let all = NoiseSpec { target: NoiseTarget::AllGroups, ..spec };
        let out = perturb(&p, &all, 1, &mut derive_stream(0, "mitigation_noise")).unwrap();
        assert_ne!(out.get("backbone.0.weight").unwrap().values(), p.get("backbone.0.weight").unwrap().values());
    }

    #[test]
    fn perturb_is_deterministic() {
        let p = mixed_set();
        let spec = NoiseSpec { var_noise: 0.15, scaling: NoiseScaling::StdOverSteps, target: NoiseTarget::NewlyInitializedAndAdapter };
        let a = perturb(&p, &spec, 10, &mut derive_stream(3, "mitigation_noise")).unwrap();
        let b = perturb(&p, &spec, 10, &mut derive_stream(3, "mitigation_noise")).unwrap();
        assert!(a.bit_eq(&b));
    }

    #[test]
    fn doubling_the_step_halves_the_delta() {
        let p = mixed_set();
        let g = p.get("head.weight").unwrap();
        let spec = NoiseSpec { var_noise: 0.15, scaling: NoiseScaling::StdOverSteps, target: NoiseTarget::NewlyInitializedAndAdapter };
        let at_t = noise_delta(g, &spec, 40, &mut derive_stream(1, "n")).unwrap();
        let at_2t = noise_delta(g, &spec, 80, &mut derive_stream(1, "n")).unwrap();
        for (a, b) in at_t.data().iter().zip(at_2t.data()) {
            assert_eq!((a / 2.0).to_bits(), b.to_bits());
        }
    }

    #[test]
    fn perturbation_is_centered() {
        let base: Vec<f64> = (0..100_000).map(|i| (i % 17) as f64 / 17.0 - 0.5).collect();
        let p = ParamSet::from_groups(vec![group("head.weight", Origin::NewlyInitialized, base.clone())]).unwrap();
        let spec = NoiseSpec { var_noise: 0.15, scaling: NoiseScaling::StdOnly, target: NoiseTarget::NewlyInitializedAndAdapter };
        let out = perturb(&p, &spec, 1, &mut derive_stream(6, "mitigation_noise")).unwrap();
        let deltas: Vec<f64> = out.groups()[0].values().iter().zip(&base).map(|(a, b)| a - b).collect();
        let n = deltas.len() as f64;
        let mean = deltas.iter().sum::<f64>() / n;
        let se = (sample_var(&deltas) / n).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean} se {se}");
    }

    #[test]
    fn input_noise() {
        let x = Array2::from_shape_fn((1000, 100), |(i, j)| (i * j) as f64 * 1e-3);
        let same = perturb_input(&x, 0.0, &mut derive_stream(0, "n")).unwrap();
        assert_eq!(same, x);
        let noisy = perturb_input(&x, 0.15, &mut derive_stream(0, "n")).unwrap();
        let deltas: Vec<f64> = noisy.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
        let v = sample_var(&deltas);
        assert!((v - 0.15).abs() < 0.15 * 0.01, "variance {v}");
        assert!(perturb_input(&x, -1.0, &mut derive_stream(0, "n")).is_err());
    }

    #[test]
    fn degenerate_target_group_errors() {
        let p = ParamSet::from_groups(vec![group("head.bias", Origin::NewlyInitialized, vec![1.0])]).unwrap();
        let spec = NoiseSpec { var_noise: 0.1, scaling: NoiseScaling::StdOnly, target: NoiseTarget::NewlyInitializedAndAdapter };
        assert!(matches!(perturb(&p, &spec, 1, &mut derive_stream(0, "n")), Err(Error::DegenerateGroup(_))));
    }
}
