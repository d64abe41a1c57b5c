use autograd::Var;

use crate::error::{Error, Result};

fn logits(v: &Var, what: &'static str) -> Result<usize> {
    match v.shape() {
        &[n] if n > 0 => Ok(n),
        &[0] => Err(Error::EmptyBatch(what)),
        s => Err(Error::ShapeMismatch(format!("{what} logits must be 1-D, got {s:?}"))),
    }
}

/// `mean_a [a_i − lse(a_i, b_1..b_m)]` for 1-D `a`, `b`.
fn contrast(a: &Var, b: &Var) -> Result<Var> {
    let (n, m) = (a.shape()[0], b.shape()[0]);
    let others = b.reshape(&[1, m])?.expand(&[n, m])?;
    let all = Var::concat(&[a.reshape(&[n, 1])?, others], 1)?;
    Ok(a.sub(&all.logsumexp_axis(1, false)?)?.mean())
}

/// Discriminator objective (to be maximized): each real logit against all fake
/// logits, plus each negated fake logit against all negated real logits.
pub fn dcl_d_objective(real: &Var, fake: &Var) -> Result<Var> {
    logits(real, "real")?;
    logits(fake, "fake")?;
    Ok(contrast(real, fake)?.add(&contrast(&fake.neg(), &real.neg())?)?)
}

/// Role-swapped objective: each fake logit against all real logits, plus each
/// negated real logit against all negated fake logits. The generator maximizes
/// it, i.e. minimizes its negation.
pub fn dcl_g_objective(real: &Var, fake: &Var) -> Result<Var> {
    dcl_d_objective(fake, real)
}
