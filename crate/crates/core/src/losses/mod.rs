//! Unsupervised training objectives.

mod adversarial;
mod contrastive;
mod naturalness;
mod structure;

pub use adversarial::{dcl_d_objective, dcl_g_objective};
pub use contrastive::{
    codes_var, domain_cl_loss, instance_cl_loss, latent_code, log_similarity, select_instances,
    similarity, LatentCode, LatentSource, SIMILARITY_C, SIMILARITY_ETA,
};
pub use naturalness::{
    naturalness_inter, naturalness_intra, naturalness_stats_dist, stats_dist, tv_loss,
    QuadrantScore, NATURALNESS_PATCH,
};
pub use structure::{pearson_corr, pearson_patch_corr, structure_loss, STRUCTURE_PATCH, STRUCTURE_SCALES};

use autograd::{Tensor, Var};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::LuminanceMap;

/// Guard in the denominator of the patch correlation.
pub const PEARSON_EPS: f64 = 1e-8;

/// A single plane as a constant `[1, 1, H, W]` var.
pub(crate) fn plane(m: &LuminanceMap) -> Result<Var> {
    Ok(Var::constant(Tensor::from_vec(&[1, 1, m.height(), m.width()], m.values().to_vec())?))
}

/// Weights of the generator objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossWeights {
    /// `λ1..λ6`: adversarial, domain CL, instance CL, inter naturalness,
    /// intra naturalness, total variation.
    pub lambda: [f64; 6],
    pub lambda_adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { lambda: [1.0, 0.5, 0.1, 0.001, 0.001, 0.001], lambda_adv: 0.1 }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self { lambda: [0.0; 6], lambda_adv: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lambda.iter().chain([&self.lambda_adv]).any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Config(format!("loss weights must be finite and non-negative: {self:?}")));
        }
        Ok(())
    }
}

/// Scalar value of every term of one step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(rename = "struct")]
    pub structure: f64,
    /// Discriminator objective (maximized by the discriminator).
    pub adv_d: f64,
    /// Role-swapped objective (maximized by the generator).
    pub adv_g: f64,
    pub cl_domain: f64,
    pub cl_instance: f64,
    pub nat_inter: f64,
    pub nat_intra: f64,
    pub tv: f64,
    pub total: f64,
}

impl LossReport {
    /// Weighted sum of the generator-side terms.
    pub fn weighted_total(&self, w: &LossWeights) -> f64 {
        let l = &w.lambda;
        self.structure - l[0] * w.lambda_adv * self.adv_g
            + l[1] * self.cl_domain
            + l[2] * self.cl_instance
            + l[3] * self.nat_inter
            + l[4] * self.nat_intra
            + l[5] * self.tv
    }

    pub fn is_finite(&self) -> bool {
        [
            self.structure,
            self.adv_d,
            self.adv_g,
            self.cl_domain,
            self.cl_instance,
            self.nat_inter,
            self.nat_intra,
            self.tv,
            self.total,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Differentiable generator-side terms of one step (scalars).
#[derive(Clone, Debug)]
pub struct GeneratorTerms {
    pub structure: Var,
    /// Role-swapped adversarial objective; enters the total with a minus sign.
    pub adv_g: Var,
    pub cl_domain: Var,
    pub cl_instance: Var,
    pub nat_inter: Var,
    pub nat_intra: Var,
    pub tv: Var,
}

impl GeneratorTerms {
    /// Terms built from plain numbers, for bookkeeping and tests.
    pub fn from_values(v: [f64; 7]) -> Self {
        let c = |x: f64| Var::constant(Tensor::scalar(x));
        Self {
            structure: c(v[0]),
            adv_g: c(v[1]),
            cl_domain: c(v[2]),
            cl_instance: c(v[3]),
            nat_inter: c(v[4]),
            nat_intra: c(v[5]),
            tv: c(v[6]),
        }
    }

    fn named(&self) -> [(&'static str, &Var); 7] {
        [
            ("struct", &self.structure),
            ("adv_g", &self.adv_g),
            ("cl_domain", &self.cl_domain),
            ("cl_instance", &self.cl_instance),
            ("nat_inter", &self.nat_inter),
            ("nat_intra", &self.nat_intra),
            ("tv", &self.tv),
        ]
    }
}

/// `L_struct − λ1·λ_adv·adv_g + λ2·CL_D + λ3·CL_I + λ4·N1 + λ5·N2 + λ6·TV`.
///
/// `adv_d` is only recorded in the report.
pub fn total_generator_loss(terms: &GeneratorTerms, adv_d: f64, w: &LossWeights) -> Result<(Var, LossReport)> {
    for (name, v) in terms.named() {
        if v.value().numel() != 1 {
            return Err(Error::ShapeMismatch(format!("term `{name}` is not a scalar")));
        }
        if !v.item().is_finite() {
            return Err(Error::NonFiniteComponent(name));
        }
    }
    let l = &w.lambda;
    let total = terms
        .structure
        .add(&terms.adv_g.scale(-l[0] * w.lambda_adv))?
        .add(&terms.cl_domain.scale(l[1]))?
        .add(&terms.cl_instance.scale(l[2]))?
        .add(&terms.nat_inter.scale(l[3]))?
        .add(&terms.nat_intra.scale(l[4]))?
        .add(&terms.tv.scale(l[5]))?;
    let report = LossReport {
        structure: terms.structure.item(),
        adv_d,
        adv_g: terms.adv_g.item(),
        cl_domain: terms.cl_domain.item(),
        cl_instance: terms.cl_instance.item(),
        nat_inter: terms.nat_inter.item(),
        nat_intra: terms.nat_intra.item(),
        tv: terms.tv.item(),
        total: total.item(),
    };
    if !total.item().is_finite() {
        return Err(Error::NonFiniteComponent("total"));
    }
    Ok((total, report))
}
