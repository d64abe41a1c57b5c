use std::collections::BTreeMap;

use autograd::{Tensor, Var};

use super::optim::{clip_global_norm, Adam};
use crate::data::TrainingBatch;
use crate::error::{Error, Result};
use crate::imaging::{downsample, LuminanceMap};
use crate::losses::{
    dcl_d_objective, dcl_g_objective, domain_cl_loss, instance_cl_loss, latent_code, naturalness_inter,
    naturalness_intra, structure_loss, total_generator_loss, tv_loss, GeneratorTerms, LossReport, LossWeights,
    SIMILARITY_C, SIMILARITY_ETA,
};
use crate::metrics::tmqi;
use crate::model::{Bound, Discriminator, Generator};

/// Smallest side kept when frames are shrunk for TMQI ranking.
pub const MIN_RANK_SIDE: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct Models {
    pub generator: Generator,
    pub discriminator: Discriminator,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Optimizers {
    pub generator: Adam,
    pub discriminator: Adam,
}

/// Everything a step needs besides models, optimizers and data.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSettings {
    pub weights: LossWeights,
    pub lr_g: f64,
    pub lr_d: f64,
    pub grad_clip: f64,
    /// Frames are 2×2-pooled this many times (while both sides stay at least
    /// [`MIN_RANK_SIDE`]) before TMQI ranking of instances.
    pub rank_downsample: u32,
    pub eta: f64,
    pub c: f64,
    /// Index of the step, for error reports.
    pub step: u64,
}

impl Default for StepSettings {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            lr_g: 1e-5,
            lr_d: 1.5e-5,
            grad_clip: 5.0,
            rank_downsample: 2,
            eta: SIMILARITY_ETA,
            c: SIMILARITY_C,
            step: 0,
        }
    }
}

/// `[B, T, H, W]` → `[B·T, 1, H, W]`.
fn frames(x: &Var) -> Result<Var> {
    let (b, t, h, w) = x.value().dims4()?;
    Ok(x.reshape(&[b * t, 1, h, w])?)
}

/// Per-clip codes from per-frame codes `[B·T, L]`: the mean over frames, `[B, L]`.
fn clip_codes(per_frame: &Var, b: usize, t: usize) -> Result<Var> {
    let l = per_frame.shape()[1];
    Ok(per_frame.reshape(&[b, t, l])?.mean_axis(1, false)?)
}

/// Discriminator feature codes of clips `[B, T, H, W]`.
fn discriminator_codes(d: &Discriminator, pd: &Bound, clips: &Var) -> Result<Var> {
    let (b, t, _, _) = clips.value().dims4()?;
    clip_codes(&latent_code(&d.features(pd, &frames(clips)?)?)?, b, t)
}

/// Generator run on the normalized HDR clips of a batch: outputs `[B, T, H, W]`
/// and the penultimate feature tap of every frame.
pub fn generator_pass(g: &Generator, pg: &Bound, batch: &TrainingBatch) -> Result<(Var, Vec<Var>)> {
    g.forward_clip(pg, &Var::constant(batch.hdr_input()?))
}

/// Discriminator objective on good-LDR frames against (detached) outputs.
pub fn discriminator_objective(d: &Discriminator, pd: &Bound, good: &Var, fake: &Var) -> Result<Var> {
    let real = d.score(pd, &frames(good)?)?;
    let fake = d.score(pd, &frames(fake)?)?;
    dcl_d_objective(&real, &fake)
}

fn non_finite(step: u64, term: &str) -> Error {
    Error::NonFiniteLoss { step, term: term.to_string() }
}

/// One ascent step of the discriminator objective. Returns the objective
/// before the update; generator parameters are not touched.
pub fn discriminator_step(
    d: &mut Discriminator,
    opt: &mut Adam,
    batch: &TrainingBatch,
    output: &Tensor,
    s: &StepSettings,
) -> Result<f64> {
    let pd = d.params().bind(true);
    let obj = discriminator_objective(d, &pd, &Var::constant(batch.good()?), &Var::constant(output.clone()))?;
    let value = obj.item();
    if !value.is_finite() {
        return Err(non_finite(s.step, "adv_d"));
    }
    let mut grads = pd.gradients(&obj.neg().backward()?);
    update(d.params_mut(), opt, &mut grads, s.lr_d, s.grad_clip, s.step, "discriminator gradient")?;
    Ok(value)
}

fn update(
    params: &mut crate::model::ParamStore,
    opt: &mut Adam,
    grads: &mut BTreeMap<String, Tensor>,
    lr: f64,
    clip: f64,
    step: u64,
    what: &str,
) -> Result<()> {
    let norm = clip_global_norm(grads, clip);
    if !norm.is_finite() {
        return Err(non_finite(step, what));
    }
    opt.step(params, grads, lr)
}

fn shrink(y: &LuminanceMap, levels: u32) -> Result<LuminanceMap> {
    let mut k = 0;
    while k < levels && (y.width() >> (k + 1)).min(y.height() >> (k + 1)) >= MIN_RANK_SIDE {
        k += 1;
    }
    downsample(y, k)
}

/// Mean TMQI over frames of every output clip against its raw HDR clip,
/// on shrunk frames. Used for ranking only.
pub fn rank_scores(batch: &TrainingBatch, output: &Tensor, levels: u32) -> Result<Vec<f64>> {
    let (b, t, h, w) = output.dims4()?;
    let mut scores = Vec::with_capacity(b);
    for (i, clip) in batch.hdr.raw.iter().enumerate().take(b) {
        let mut q = 0.0;
        for (j, raw) in clip.frames().iter().enumerate() {
            let f = (i * t + j) * h * w;
            let o = LuminanceMap::normalized(w, h, output.data()[f..f + h * w].iter().map(|v| v.clamp(0.0, 1.0)).collect())?;
            q += tmqi(&shrink(raw, levels)?, &shrink(&o, levels)?)?.q;
        }
        scores.push(q / t as f64);
    }
    Ok(scores)
}

/// Generator objective with the discriminator frozen. `output` and `taps`
/// come from [`generator_pass`]; `adv_d` is only copied into the report.
pub fn generator_objective(
    d: &Discriminator,
    batch: &TrainingBatch,
    output: &Var,
    taps: &[Var],
    s: &StepSettings,
    adv_d: f64,
) -> Result<(Var, LossReport)> {
    let (b, t, _, _) = output.value().dims4()?;
    let pd = d.params().bind(false);
    let x = Var::constant(batch.hdr_input()?);
    let good = Var::constant(batch.good()?);
    let poor = Var::constant(batch.poor()?);

    let structure = structure_loss(&x, output)?;

    let fake_features = d.features(&pd, &frames(output)?)?;
    let fake = d.score_features(&pd, &fake_features)?;
    let real = d.score(&pd, &frames(&good)?)?;
    let adv_g = dcl_g_objective(&real, &fake)?;

    let z_o = clip_codes(&latent_code(&fake_features)?, b, t)?;
    let z_gl = discriminator_codes(d, &pd, &good)?;
    let z_h = discriminator_codes(d, &pd, &x)?;
    let z_pl = discriminator_codes(d, &pd, &poor)?;
    let cl_domain = domain_cl_loss(&z_o, &z_gl, &z_h, &z_pl, s.eta, s.c)?;

    let cl_instance = if b >= 3 {
        let scores = rank_scores(batch, output.value(), s.rank_downsample)?;
        let mut z: Option<Var> = None;
        for tap in taps {
            let code = latent_code(tap)?;
            z = Some(match z {
                None => code,
                Some(acc) => acc.add(&code)?,
            });
        }
        let z = z.ok_or(Error::EmptyBatch("generator taps"))?.scale(1.0 / taps.len() as f64);
        instance_cl_loss(&z, &scores, s.eta, s.c)?
    } else {
        log::debug!("batch of {b} is too small for the instance term; it is set to 0");
        Var::constant(Tensor::scalar(0.0))
    };

    let nat_inter = naturalness_inter(&good, output)?;
    let quadrant_score = |hq: &LuminanceMap, oq: &LuminanceMap| Ok(tmqi(hq, oq)?.q);
    let (nat_intra, _) = naturalness_intra(output, &batch.hdr_raw()?, &quadrant_score)?;
    let tv = tv_loss(output)?;

    let terms = GeneratorTerms { structure, adv_g, cl_domain, cl_instance, nat_inter, nat_intra, tv };
    total_generator_loss(&terms, adv_d, &s.weights).map_err(|e| match e {
        Error::NonFiniteComponent(term) => non_finite(s.step, term),
        e => e,
    })
}

/// Discriminator update followed by a generator update on one batch.
///
/// On any error (including non-finite losses) models and optimizers are left
/// exactly as they were before the call.
pub fn train_step(models: &mut Models, opt: &mut Optimizers, batch: &TrainingBatch, s: &StepSettings) -> Result<LossReport> {
    let saved = (models.clone(), opt.clone());
    let result = step_inner(models, opt, batch, s);
    if result.is_err() {
        (*models, *opt) = saved;
    }
    result
}

fn step_inner(models: &mut Models, opt: &mut Optimizers, batch: &TrainingBatch, s: &StepSettings) -> Result<LossReport> {
    let pg = models.generator.params().bind(true);
    let (output, taps) = generator_pass(&models.generator, &pg, batch)?;
    let adv_d = discriminator_step(&mut models.discriminator, &mut opt.discriminator, batch, output.value(), s)?;
    let (total, report) = generator_objective(&models.discriminator, batch, &output, &taps, s, adv_d)?;
    if !report.is_finite() {
        return Err(non_finite(s.step, "report"));
    }
    let mut grads = pg.gradients(&total.backward()?);
    update(models.generator.params_mut(), &mut opt.generator, &mut grads, s.lr_g, s.grad_clip, s.step, "generator gradient")?;
    Ok(report)
}
