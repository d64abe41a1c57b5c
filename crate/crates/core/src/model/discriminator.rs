use autograd::{Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{kaiming, Bound, ParamStore};
use super::LEAKY_SLOPE;
use crate::error::{Error, Result};

/// Cascade of stride-2 4×4 convolutions with a pooled linear head.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscriminatorConfig {
    pub widths: Vec<usize>,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self { widths: vec![32, 64, 128, 256, 512] }
    }
}

impl DiscriminatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.widths.is_empty() || self.widths.contains(&0) {
            return Err(Error::Config("discriminator widths must be nonempty and positive".into()));
        }
        Ok(())
    }

    /// Channel count `q` of the feature tap.
    pub fn feature_channels(&self) -> usize {
        *self.widths.last().expect("validated nonempty")
    }

    /// Smallest accepted input side.
    pub fn min_input(&self) -> usize {
        1 << self.widths.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator {
    config: DiscriminatorConfig,
    params: ParamStore,
}

impl Discriminator {
    pub fn new(config: DiscriminatorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let mut cin = 1;
        for (i, &c) in config.widths.iter().enumerate() {
            params.insert(format!("conv.{i}.weight"), kaiming(&mut rng, &[c, cin, 4, 4], cin * 16, LEAKY_SLOPE));
            params.insert(format!("conv.{i}.bias"), Tensor::zeros(&[c]));
            cin = c;
        }
        params.insert("head.weight", kaiming(&mut rng, &[cin, 1], cin, 1.0));
        params.insert("head.bias", Tensor::zeros(&[1]));
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// Activation of the last convolution, `[B, q, h, w]`, for `[B, 1, H, W]` input.
    pub fn features(&self, p: &Bound, x: &Var) -> Result<Var> {
        let (_, c, h, w) = x.value().dims4()?;
        let m = self.config.min_input();
        if c != 1 {
            return Err(Error::ShapeMismatch(format!("discriminator expects 1 channel, got {c}")));
        }
        if h < m || w < m {
            return Err(Error::TooSmall(format!("discriminator input {h}x{w} is below {m}x{m}")));
        }
        let mut f = x.clone();
        for i in 0..self.config.widths.len() {
            let wt = p.get(&format!("conv.{i}.weight"))?;
            let b = p.get(&format!("conv.{i}.bias"))?;
            f = f.conv2d(wt, Some(b), 2, 1)?.leaky_relu(LEAKY_SLOPE);
        }
        Ok(f)
    }

    /// Logit per sample, `[B]`, computed from already extracted features.
    pub fn score_features(&self, p: &Bound, features: &Var) -> Result<Var> {
        let (b, q, h, w) = features.value().dims4()?;
        let pooled = features.reshape(&[b, q, h * w])?.mean_axis(2, false)?;
        let logit = pooled.matmul(p.get("head.weight")?)?.add(p.get("head.bias")?)?;
        Ok(logit.reshape(&[b])?)
    }

    /// Logit per sample, `[B]`.
    pub fn score(&self, p: &Bound, x: &Var) -> Result<Var> {
        self.score_features(p, &self.features(p, x)?)
    }
}
