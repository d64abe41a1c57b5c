use autograd::{Tensor, Var};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::{kaiming, Bound, ParamStore};
use super::tfr::{split_size, TemporalBuffer};
use super::{sfe, LEAKY_SLOPE};
use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;

/// UNet-style luminance generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub base_channels: usize,
    pub num_scales: usize,
    /// Width multiplier: 1.0, 0.75 or 0.5.
    pub channel_multiplier: f64,
    pub tfr_enabled: bool,
    pub tfr_beta: f64,
    pub sfe_patch: usize,
    pub sfe_knn: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            base_channels: 32,
            num_scales: 4,
            channel_multiplier: 1.0,
            tfr_enabled: false,
            tfr_beta: 1.0 / 32.0,
            sfe_patch: 2,
            sfe_knn: 8,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_scales < 2 {
            return Err(Error::Config(format!("num_scales must be at least 2, got {}", self.num_scales)));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be positive".into()));
        }
        if ![1.0, 0.75, 0.5].contains(&self.channel_multiplier) {
            return Err(Error::Config(format!(
                "channel_multiplier must be 1.0, 0.75 or 0.5, got {}",
                self.channel_multiplier
            )));
        }
        if self.sfe_patch == 0 || self.sfe_knn == 0 {
            return Err(Error::Config("sfe_patch and sfe_knn must be positive".into()));
        }
        if self.tfr_enabled {
            if !(self.tfr_beta > 0.0 && self.tfr_beta <= 1.0) {
                return Err(Error::Config(format!("tfr_beta must lie in (0, 1], got {}", self.tfr_beta)));
            }
            for s in 0..self.num_scales {
                let c = self.channels(s);
                if split_size(self.tfr_beta, c) == 0 {
                    return Err(Error::BetaTooSmall { beta: self.tfr_beta, channels: c });
                }
            }
        }
        Ok(())
    }

    /// Feature width at pyramid level `s`.
    pub fn channels(&self, s: usize) -> usize {
        ((self.base_channels << s) as f64 * self.channel_multiplier).round().max(1.0) as usize
    }

    /// Spatial sizes must be multiples of this.
    pub fn size_divisor(&self) -> usize {
        (1 << (self.num_scales - 1)) * self.sfe_patch
    }

    /// Channels of the penultimate feature tap.
    pub fn tap_channels(&self) -> usize {
        self.channels(0)
    }
}

/// Result of one frame through the generator.
#[derive(Clone, Debug)]
pub struct FrameOutput {
    /// `[B, 1, H, W]` in `[0, 1]`.
    pub output: Var,
    /// Features feeding the output convolution, `[B, C0, H, W]`.
    pub penultimate: Var,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Generator {
    config: GeneratorConfig,
    params: ParamStore,
}

fn conv(x: &Var, p: &Bound, name: &str, pad: usize) -> Result<Var> {
    let w = p.get(&format!("{name}.weight"))?;
    let b = p.get(&format!("{name}.bias"))?;
    Ok(x.conv2d(w, Some(b), 1, pad)?)
}

fn conv_act(x: &Var, p: &Bound, name: &str) -> Result<Var> {
    Ok(conv(x, p, name, 1)?.leaky_relu(LEAKY_SLOPE))
}

impl Generator {
    pub fn new(config: GeneratorConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        let add_conv = |params: &mut ParamStore, rng: &mut ChaCha8Rng, name: String, cin: usize, cout: usize, k: usize| {
            let fan_in = cin * k * k;
            params.insert(format!("{name}.weight"), kaiming(rng, &[cout, cin, k, k], fan_in, LEAKY_SLOPE));
            params.insert(format!("{name}.bias"), Tensor::zeros(&[cout]));
        };
        let s_max = config.num_scales - 1;
        let mut cin = 1;
        for s in 0..config.num_scales {
            let c = config.channels(s);
            add_conv(&mut params, &mut rng, format!("encoder.{s}.conv1"), cin, c, 3);
            add_conv(&mut params, &mut rng, format!("encoder.{s}.conv2"), c, c, 3);
            cin = c;
        }
        sfe::init(&mut params, &mut rng, "sfe", config.channels(s_max), config.sfe_patch);
        for s in (0..s_max).rev() {
            let (c, up) = (config.channels(s), config.channels(s + 1));
            add_conv(&mut params, &mut rng, format!("decoder.{s}.conv1"), up + c, c, 3);
            add_conv(&mut params, &mut rng, format!("decoder.{s}.conv2"), c, c, 3);
        }
        add_conv(&mut params, &mut rng, "head".into(), config.channels(0), 1, 1);
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &GeneratorConfig {
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

    /// Same network with TFR switched on or off; weights are shared because
    /// replacement has no parameters.
    pub fn with_tfr(&self, enabled: bool) -> Result<Self> {
        let config = GeneratorConfig { tfr_enabled: enabled, ..self.config.clone() };
        config.validate()?;
        Ok(Self { config, params: self.params.clone() })
    }

    /// Multiply-accumulates of one `h×w` frame (convolutions and graph layers).
    pub fn mac_count(&self, h: usize, w: usize) -> u64 {
        let cfg = &self.config;
        let conv = |cin: usize, cout: usize, k: usize, hh: usize, ww: usize| (cin * cout * k * k * hh * ww) as u64;
        let mut total = 0;
        let mut cin = 1;
        for s in 0..cfg.num_scales {
            let (hh, ww, c) = (h >> s, w >> s, cfg.channels(s));
            total += conv(cin, c, 3, hh, ww) + conv(c, c, 3, hh, ww);
            cin = c;
        }
        let s_max = cfg.num_scales - 1;
        total += sfe::macs(cfg.channels(s_max), cfg.sfe_patch, h >> s_max, w >> s_max);
        for s in 0..s_max {
            let (hh, ww, c) = (h >> s, w >> s, cfg.channels(s));
            total += conv(cfg.channels(s + 1) + c, c, 3, hh, ww) + conv(c, c, 3, hh, ww);
        }
        total + conv(cfg.channels(0), 1, 1, h, w)
    }

    /// Fresh stream state matching this generator's replacement sites.
    pub fn new_buffer(&self) -> TemporalBuffer {
        TemporalBuffer::new(self.config.num_scales, self.config.tfr_beta)
    }

    pub fn check_input(&self, h: usize, w: usize) -> Result<()> {
        let d = self.config.size_divisor();
        if h % d != 0 || w % d != 0 || h == 0 || w == 0 {
            return Err(Error::ShapeNotDivisible { height: h, width: w, divisor: d });
        }
        Ok(())
    }

    /// One frame `[B, 1, H, W]`. With TFR enabled the buffer carries the stream
    /// state and is updated in place; without one the frame is treated as the
    /// first of its stream. Image mode ignores the buffer.
    pub fn forward_frame(&self, p: &Bound, x: &Var, buffer: Option<&mut TemporalBuffer>) -> Result<FrameOutput> {
        let (_, cin, h, w) = x.value().dims4()?;
        if cin != 1 {
            return Err(Error::ShapeMismatch(format!("generator expects 1 input channel, got {cin}")));
        }
        self.check_input(h, w)?;
        let cfg = &self.config;
        let mut local = None;
        let mut buffer = match buffer {
            _ if !cfg.tfr_enabled => None,
            Some(b) if b.sites() != cfg.num_scales || b.beta() != cfg.tfr_beta => {
                return Err(Error::BufferShapeMismatch(format!(
                    "buffer has {} sites with beta {}, generator needs {} with beta {}",
                    b.sites(),
                    b.beta(),
                    cfg.num_scales,
                    cfg.tfr_beta
                )))
            }
            Some(b) => Some(b),
            None => Some(local.insert(self.new_buffer())),
        };
        let s_max = cfg.num_scales - 1;
        let mut skips = Vec::with_capacity(s_max);
        let mut f = x.clone();
        for s in 0..cfg.num_scales {
            if s > 0 {
                f = f.avg_pool2d(2)?;
            }
            f = conv_act(&f, p, &format!("encoder.{s}.conv1"))?;
            f = conv_act(&f, p, &format!("encoder.{s}.conv2"))?;
            if let Some(b) = buffer.as_deref_mut() {
                f = b.exchange(s, &f)?;
            }
            if s < s_max {
                skips.push(f.clone());
            }
        }
        if let Some(b) = buffer {
            b.finish_frame();
        }
        f = sfe::forward(p, "sfe", &f, cfg.sfe_patch, cfg.sfe_knn)?;
        for s in (0..s_max).rev() {
            let skip = &skips[s];
            let (_, _, sh, sw) = skip.value().dims4()?;
            f = Var::concat(&[f.upsample_bilinear(sh, sw)?, skip.clone()], 1)?;
            f = conv_act(&f, p, &format!("decoder.{s}.conv1"))?;
            f = conv_act(&f, p, &format!("decoder.{s}.conv2"))?;
        }
        let output = self.head(p, &f)?;
        Ok(FrameOutput { output, penultimate: f })
    }

    /// Output convolution and sigmoid applied to a penultimate tap.
    pub fn head(&self, p: &Bound, tap: &Var) -> Result<Var> {
        Ok(conv(tap, p, "head", 0)?.sigmoid())
    }

    /// Clip `[B, T, H, W]` frame by frame; returns `[B, T, H, W]` and the
    /// per-frame penultimate taps. Video mode uses a fresh buffer per call.
    pub fn forward_clip(&self, p: &Bound, clip: &Var) -> Result<(Var, Vec<Var>)> {
        let (b, t, h, w) = clip.value().dims4()?;
        let mut buffer = self.config.tfr_enabled.then(|| self.new_buffer());
        let mut outs = Vec::with_capacity(t);
        let mut taps = Vec::with_capacity(t);
        for i in 0..t {
            let frame = clip.narrow(1, i, 1)?;
            let r = self.forward_frame(p, &frame, buffer.as_mut())?;
            outs.push(r.output);
            taps.push(r.penultimate);
        }
        let out = if t == 1 { outs.pop().expect("one frame") } else { Var::concat(&outs, 1)? };
        debug_assert_eq!(out.shape(), [b, t, h, w]);
        Ok((out, taps))
    }

    /// Inference on a sequence of normalized planes sharing one stream state.
    pub fn tonemap_frames(&self, frames: &[LuminanceMap], buffer: Option<&mut TemporalBuffer>) -> Result<Vec<LuminanceMap>> {
        let p = self.params.bind(false);
        let mut local = None;
        let mut buffer = match buffer {
            Some(b) => Some(b),
            None if self.config.tfr_enabled => Some(local.insert(self.new_buffer())),
            None => None,
        };
        frames
            .iter()
            .map(|y| {
                if !y.is_normalized() {
                    return Err(Error::InvalidArgument("generator input must be normalized luminance".into()));
                }
                let x = Var::constant(Tensor::from_vec(&[1, 1, y.height(), y.width()], y.values().to_vec())?);
                let out = self.forward_frame(&p, &x, buffer.as_deref_mut())?.output;
                LuminanceMap::normalized(y.width(), y.height(), out.value().data().to_vec())
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_size_is_near_five_million() {
        let g = Generator::new(GeneratorConfig::default(), 0).unwrap();
        let n = g.parameter_count() as f64;
        assert!((n - 4.884e6).abs() / 4.884e6 < 0.2, "{n}");
    }

    #[test]
    fn rejects_indivisible_sizes() {
        let cfg = GeneratorConfig { base_channels: 4, num_scales: 2, sfe_knn: 3, ..Default::default() };
        let g = Generator::new(cfg, 0).unwrap();
        let x = Var::constant(Tensor::zeros(&[1, 1, 6, 8]));
        assert!(matches!(
            g.forward_frame(&g.params().bind(false), &x, None),
            Err(Error::ShapeNotDivisible { divisor: 4, .. })
        ));
    }
}
