//! Named model parameters and their initialization.

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum InitSpec {
    /// N(0, 1), used for symbol embeddings.
    StandardNormal,
    /// N(0, 1/fan_in): scaled normal for weight matrices.
    UniformFanIn,
    /// N(0, scale^2).
    ScaledNormal(f64),
    Zeros,
    Constant(f64),
}

impl InitSpec {
    fn sample(&self, shape: &[usize], stream: &mut crate::rng::Stream) -> Tensor {
        let numel: usize = shape.iter().product();
        match self {
            InitSpec::StandardNormal => {
                let data = (0..numel).map(|_| stream.normal()).collect();
                Tensor::new(shape.to_vec(), data).expect("init shape")
            }
            InitSpec::UniformFanIn => {
                // fan-in: everything but the output (last) dimension.
                let fan_in = if shape.len() >= 2 {
                    numel / shape[shape.len() - 1]
                } else {
                    numel
                };
                let std = 1.0 / (fan_in as f64).sqrt();
                let data = (0..numel).map(|_| stream.normal() * std).collect();
                Tensor::new(shape.to_vec(), data).expect("init shape")
            }
            InitSpec::ScaledNormal(scale) => {
                let data = (0..numel).map(|_| stream.normal() * scale).collect();
                Tensor::new(shape.to_vec(), data).expect("init shape")
            }
            InitSpec::Zeros => Tensor::zeros(shape),
            InitSpec::Constant(c) => Tensor::full(shape, *c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

pub struct Parameter {
    pub name: String,
    pub tensor: Tensor,
    pub init: InitSpec,
}

/// Every trainable tensor of a model, registered exactly once under a unique
/// name. Initialization draws from the substream "init/<name>", so parameter
/// registration order never changes the values of other parameters.
#[derive(Default)]
pub struct ParamSet {
    entries: Vec<Parameter>,
    by_name: HashMap<String, usize>,
}

impl ParamSet {
    pub fn new() -> Self {
        ParamSet::default()
    }

    pub fn register(
        &mut self,
        name: &str,
        shape: &[usize],
        init: InitSpec,
        rng: &StreamRng,
    ) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::config(format!("parameter {name} registered twice")));
        }
        let mut stream = rng.stream(&format!("init/{name}"));
        let tensor = init.sample(shape, &mut stream);
        self.entries.push(Parameter { name: name.to_string(), tensor, init });
        let id = ParamId(self.entries.len() - 1);
        self.by_name.insert(name.to_string(), id.0);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn tensor(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].tensor
    }

    pub fn tensor_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].tensor
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> + '_ {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.entries.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    /// Overwrite a parameter's values, e.g. when loading a checkpoint.
    pub fn set(&mut self, name: &str, tensor: Tensor) -> Result<()> {
        let id = self
            .id(name)
            .ok_or_else(|| Error::config(format!("unknown parameter {name}")))?;
        if tensor.shape() != self.tensor(id).shape() {
            return Err(Error::shape(format!(
                "parameter {name}: stored shape {:?} != model shape {:?}",
                tensor.shape(),
                self.tensor(id).shape()
            )));
        }
        self.entries[id.0].tensor = tensor;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_name_rejected() {
        let rng = StreamRng::new(1);
        let mut ps = ParamSet::new();
        ps.register("w", &[2, 2], InitSpec::Zeros, &rng).unwrap();
        assert!(ps.register("w", &[2, 2], InitSpec::Zeros, &rng).is_err());
    }

    #[test]
    fn standard_normal_mean_within_tolerance() {
        let rng = StreamRng::new(5);
        let mut ps = ParamSet::new();
        let id = ps.register("e", &[100, 100], InitSpec::StandardNormal, &rng).unwrap();
        let t = ps.tensor(id);
        let mean = t.data().iter().sum::<f64>() / t.numel() as f64;
        assert!(mean.abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn init_is_bit_deterministic_and_order_free() {
        let rng = StreamRng::new(9);
        let mut a = ParamSet::new();
        a.register("x", &[4, 4], InitSpec::StandardNormal, &rng).unwrap();
        a.register("y", &[4, 4], InitSpec::UniformFanIn, &rng).unwrap();
        // Same seed, registration order swapped: identical values per name.
        let mut b = ParamSet::new();
        b.register("y", &[4, 4], InitSpec::UniformFanIn, &rng).unwrap();
        b.register("x", &[4, 4], InitSpec::StandardNormal, &rng).unwrap();
        let ax = a.tensor(a.id("x").unwrap()).data().to_vec();
        let bx = b.tensor(b.id("x").unwrap()).data().to_vec();
        assert_eq!(ax, bx);
        let ay = a.tensor(a.id("y").unwrap()).data().to_vec();
        let by = b.tensor(b.id("y").unwrap()).data().to_vec();
        assert_eq!(ay, by);
    }

    #[test]
    fn fan_in_scale_respected() {
        let rng = StreamRng::new(2);
        let mut ps = ParamSet::new();
        let id = ps.register("w", &[64, 8], InitSpec::UniformFanIn, &rng).unwrap();
        // std = 1/8: sample standard deviation should sit near it.
        let t = ps.tensor(id);
        let var: f64 = t.data().iter().map(|v| v * v).sum::<f64>() / t.numel() as f64;
        assert!((var.sqrt() - 0.125).abs() < 0.02, "std {}", var.sqrt());
    }
}
