//! Named parameter storage with an explicit trainable/frozen split.
//!
//! Trainable maps register each tensor as a `Var` so candle's backward pass
//! produces gradients for it; frozen maps hold plain tensors, which candle
//! never differentiates — freezing is structural, not a masked update.

use crate::error::{Error, Result};
use candle_core::{DType, Device, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;

pub struct ParamMap {
    tensors: BTreeMap<String, Tensor>,
    vars: Vec<(String, Var)>,
    trainable: bool,
    device: Device,
    dtype: DType,
}

impl ParamMap {
    pub fn new(trainable: bool, device: &Device) -> Self {
        Self::new_with_dtype(trainable, device, DType::F32)
    }

    /// `dtype` other than f32 exists for high-precision gradient checks.
    pub fn new_with_dtype(trainable: bool, device: &Device, dtype: DType) -> Self {
        ParamMap {
            tensors: BTreeMap::new(),
            vars: Vec::new(),
            trainable,
            device: device.clone(),
            dtype,
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn trainable(&self) -> bool {
        self.trainable
    }

    pub fn insert(&mut self, name: &str, data: Vec<f32>, shape: &[usize]) -> Result<()> {
        if self.tensors.contains_key(name) {
            return Err(Error::Invalid(format!("duplicate parameter {name}")));
        }
        let init = Tensor::from_vec(data, shape, &self.device)?.to_dtype(self.dtype)?;
        let tensor = if self.trainable {
            let var = Var::from_tensor(&init)?;
            let t = var.as_tensor().clone();
            self.vars.push((name.to_string(), var));
            t
        } else {
            init
        };
        self.tensors.insert(name.to_string(), tensor);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Invalid(format!("missing parameter {name}")))
    }

    /// Registration-ordered trainable variables; empty for frozen maps.
    pub fn vars(&self) -> &[(String, Var)] {
        &self.vars
    }

    pub fn var_list(&self) -> Vec<Var> {
        self.vars.iter().map(|(_, v)| v.clone()).collect()
    }

    /// Name-sorted snapshot of all parameters for checkpointing.
    pub fn named_tensors(&self) -> &BTreeMap<String, Tensor> {
        &self.tensors
    }

    /// Overwrites every parameter from `source`; names and shapes must match
    /// exactly in both directions.
    pub fn load_from(&mut self, source: &BTreeMap<String, Tensor>) -> Result<()> {
        for name in source.keys() {
            if !self.tensors.contains_key(name) {
                return Err(Error::Incompatible(format!("unexpected parameter {name}")));
            }
        }
        let names: Vec<String> = self.tensors.keys().cloned().collect();
        for name in names {
            let new = source
                .get(&name)
                .ok_or_else(|| Error::Incompatible(format!("missing parameter {name}")))?;
            let current = &self.tensors[&name];
            if new.dims() != current.dims() {
                return Err(Error::Incompatible(format!(
                    "parameter {name}: shape {:?} vs {:?}",
                    new.dims(),
                    current.dims()
                )));
            }
            // rebuild from raw data: detaches `new` from any graph that may
            // reference the very var being set
            let data = new
                .to_dtype(DType::F32)?
                .flatten_all()?
                .to_vec1::<f32>()?;
            let t = Tensor::from_vec(data, new.dims(), &self.device)?.to_dtype(self.dtype)?;
            if self.trainable {
                let var = self
                    .vars
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| v)
                    .expect("var registered for trainable parameter");
                var.set(&t)?;
                self.tensors.insert(name, var.as_tensor().clone());
            } else {
                self.tensors.insert(name, t);
            }
        }
        Ok(())
    }
}

/// Gaussian init with std `1/sqrt(fan_in)`.
pub fn init_normal(rng: &mut ChaCha8Rng, n: usize, fan_in: usize) -> Vec<f32> {
    let std = 1.0 / (fan_in.max(1) as f64).sqrt();
    let dist = Normal::new(0.0, std).expect("valid std");
    (0..n).map(|_| dist.sample(rng) as f32).collect()
}

pub fn init_uniform(rng: &mut ChaCha8Rng, n: usize, limit: f32) -> Vec<f32> {
    (0..n).map(|_| rng.gen_range(-limit..limit)).collect()
}

pub fn zeros(n: usize) -> Vec<f32> {
    vec![0.0; n]
}

/// Row-major identity matrix data.
pub fn identity(n: usize) -> Vec<f32> {
    let mut v = vec![0.0f32; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frozen_map_registers_no_vars() {
        let dev = Device::Cpu;
        let mut p = ParamMap::new(false, &dev);
        p.insert("w", vec![1.0, 2.0], &[2]).unwrap();
        assert!(p.vars().is_empty());
        assert_eq!(p.get("w").unwrap().dims(), &[2]);
    }

    #[test]
    fn trainable_map_vars_follow_insertion_order() {
        let dev = Device::Cpu;
        let mut p = ParamMap::new(true, &dev);
        p.insert("z", vec![0.0], &[1]).unwrap();
        p.insert("a", vec![0.0], &[1]).unwrap();
        let names: Vec<&str> = p.vars().iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names, ["z", "a"]);
    }

    #[test]
    fn load_rejects_unknown_and_mismatched() {
        let dev = Device::Cpu;
        let mut p = ParamMap::new(false, &dev);
        p.insert("w", vec![0.0; 4], &[2, 2]).unwrap();

        let mut bad = BTreeMap::new();
        bad.insert("other".to_string(), Tensor::zeros(&[2, 2], DType::F32, &dev).unwrap());
        assert!(p.load_from(&bad).is_err());

        let mut wrong_shape = BTreeMap::new();
        wrong_shape.insert("w".to_string(), Tensor::zeros(&[4], DType::F32, &dev).unwrap());
        assert!(p.load_from(&wrong_shape).is_err());

        let mut good = BTreeMap::new();
        good.insert("w".to_string(), Tensor::ones(&[2, 2], DType::F32, &dev).unwrap());
        p.load_from(&good).unwrap();
        assert_eq!(p.get("w").unwrap().to_vec2::<f32>().unwrap(), vec![vec![1.0, 1.0]; 2]);
    }

    #[test]
    fn identity_matrix_data() {
        assert_eq!(identity(2), vec![1.0, 0.0, 0.0, 1.0]);
    }
}
