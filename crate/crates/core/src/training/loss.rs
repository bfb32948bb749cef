use alloc::format;

use crate::autograd::Var;
use crate::error::{Error, Result};
use crate::ops;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub epsilon: Scalar,
    /// Weight of the precursor term.
    pub alpha: Scalar,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            epsilon: 1e-3,
            alpha: 0.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("loss", "epsilon must be positive"));
        }
        if !(self.alpha >= 0.0) {
            return Err(Error::invalid("loss", format!("alpha must be >= 0, got {}", self.alpha)));
        }
        Ok(())
    }
}

/// `mean sqrt((HR - SR)^2 + eps^2) + alpha * mean sqrt((HR - SR_p)^2 + eps^2)`.
///
/// The precursor term is built even when `alpha` is zero, so its gradient
/// is an exact zero rather than missing.
pub fn charbonnier_loss(sr: &Var, sr_p: Option<&Var>, hr: &Var, cfg: &LossConfig) -> Result<Var> {
    cfg.validate()?;
    let main = ops::charbonnier(sr, hr, cfg.epsilon)?;
    match sr_p {
        Some(p) => {
            let aux = ops::charbonnier(p, hr, cfg.epsilon)?;
            ops::add(&main, &ops::scale(&aux, cfg.alpha))
        }
        None => Ok(main),
    }
}

/// Mean of the per-frame losses.
pub fn sequence_loss(sr: &[Var], sr_p: Option<&[Var]>, hr: &[Var], cfg: &LossConfig) -> Result<Var> {
    if sr.is_empty() || sr.len() != hr.len() || sr_p.is_some_and(|p| p.len() != sr.len()) {
        return Err(Error::invalid(
            "sequence_loss",
            format!("{} SR frames vs {} HR frames", sr.len(), hr.len()),
        ));
    }
    let mut total: Option<Var> = None;
    for (t, (s, h)) in sr.iter().zip(hr).enumerate() {
        let l = charbonnier_loss(s, sr_p.map(|p| &p[t]), h, cfg)?;
        total = Some(match total {
            Some(acc) => ops::add(&acc, &l)?,
            None => l,
        });
    }
    Ok(ops::scale(&total.expect("non-empty"), 1.0 / sr.len() as Scalar))
}
