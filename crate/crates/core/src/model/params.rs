use std::collections::BTreeMap;

use autograd::{Gradients, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Named parameter tensors, iterated in name order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    tensors: BTreeMap<String, Tensor>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) {
        self.tensors.insert(name.into(), t);
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.get(name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.tensors.get_mut(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor)> {
        self.tensors.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&String, &mut Tensor)> {
        self.tensors.iter_mut()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.tensors.keys()
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.values().map(Tensor::numel).sum()
    }

    /// Leaf vars (when `trainable`) or constants for one forward pass.
    pub fn bind(&self, trainable: bool) -> Bound {
        let vars = self
            .tensors
            .iter()
            .map(|(k, t)| {
                let v = if trainable { Var::leaf(t.clone()) } else { Var::constant(t.clone()) };
                (k.clone(), v)
            })
            .collect();
        Bound { vars }
    }

    /// Replaces every tensor with the same-named tensor of `other`, which must
    /// have exactly the same names and shapes.
    pub fn load_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::CheckpointMismatch(format!(
                "expected {} tensors, archive has {}",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (name, t) in &mut self.tensors {
            let src = other
                .get(name)
                .ok_or_else(|| Error::CheckpointMismatch(format!("missing tensor `{name}`")))?;
            if src.shape() != t.shape() {
                return Err(Error::CheckpointMismatch(format!(
                    "`{name}` has shape {:?}, expected {:?}",
                    src.shape(),
                    t.shape()
                )));
            }
            *t = src.clone();
        }
        Ok(())
    }

    /// Order-sensitive fingerprint of all parameter bits.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over names and raw bits.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        for (k, t) in &self.tensors {
            k.bytes().for_each(&mut eat);
            for v in t.data() {
                v.to_bits().to_le_bytes().into_iter().for_each(&mut eat);
            }
        }
        h
    }
}

/// Parameters bound as vars for a single differentiable pass.
#[derive(Clone, Debug)]
pub struct Bound {
    vars: BTreeMap<String, Var>,
}

impl Bound {
    pub fn get(&self, name: &str) -> Result<&Var> {
        self.vars
            .get(name)
            .ok_or_else(|| Error::CheckpointMismatch(format!("parameter `{name}` is not defined")))
    }

    /// Gradient for every bound parameter (zeros where none flowed).
    pub fn gradients(&self, g: &Gradients) -> BTreeMap<String, Tensor> {
        self.vars.iter().map(|(k, v)| (k.clone(), g.get_or_zeros(v))).collect()
    }
}

/// Kaiming-uniform initialization for a layer followed by LeakyReLU(`slope`).
pub(crate) fn kaiming(rng: &mut ChaCha8Rng, shape: &[usize], fan_in: usize, slope: f64) -> Tensor {
    let bound = (6.0 / ((1.0 + slope * slope) * fan_in as f64)).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.random_range(-bound..bound)).collect();
    Tensor::from_vec(shape, data).expect("shape matches data")
}
