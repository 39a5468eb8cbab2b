use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::error::{NnError, Result};
use crate::graph::StatUpdate;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Trainable weights receive gradients; buffers (BatchNorm running
/// statistics) are only updated from batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Buffer,
}

/// Named tensors of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    kinds: Vec<ParamKind>,
    values: Vec<Tensor>,
}

impl ParamStore {
    pub fn add(&mut self, name: impl Into<String>, value: Tensor, kind: ParamKind) -> ParamId {
        self.names.push(name.into());
        self.kinds.push(kind);
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn kind(&self, id: ParamId) -> ParamKind {
        self.kinds[id.0]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    /// Number of trainable scalars.
    pub fn num_weights(&self) -> usize {
        self.ids()
            .filter(|&id| self.kind(id) == ParamKind::Weight)
            .map(|id| self.get(id).len())
            .sum()
    }

    /// Replaces the value of `name`, checking the shape.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        let id = self.find(name).ok_or_else(|| NnError::Param {
            name: name.into(),
            reason: "no such parameter".into(),
        })?;
        if self.values[id.0].shape() != value.shape() {
            return Err(NnError::Shape {
                expected: self.values[id.0].shape().to_vec(),
                got: value.shape().to_vec(),
            });
        }
        self.values[id.0] = value;
        Ok(())
    }

    /// Exponential moving average of BatchNorm statistics.
    pub fn apply_stat_updates(&mut self, updates: &[StatUpdate]) {
        for u in updates {
            let m = u.momentum;
            for (r, &b) in self.values[u.running_mean.0].data_mut().iter_mut().zip(&u.batch_mean) {
                *r = (1.0 - m) * *r + m * b;
            }
            for (r, &b) in self.values[u.running_var.0].data_mut().iter_mut().zip(&u.batch_var) {
                *r = (1.0 - m) * *r + m * b;
            }
        }
    }
}

/// Seeded parameter initializer; draws happen in registration order.
pub(crate) struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn normal(&mut self, shape: &[usize], std: f32) -> Tensor {
        let dist = Normal::new(0.0, std).expect("finite std");
        let mut t = Tensor::zeros(shape);
        for v in t.data_mut() {
            *v = dist.sample(&mut self.rng);
        }
        t
    }

    pub fn uniform(&mut self, shape: &[usize], bound: f32) -> Tensor {
        let mut t = Tensor::zeros(shape);
        if bound > 0.0 {
            let dist = Uniform::new_inclusive(-bound, bound).expect("valid bound");
            for v in t.data_mut() {
                *v = dist.sample(&mut self.rng);
            }
        }
        t
    }
}
