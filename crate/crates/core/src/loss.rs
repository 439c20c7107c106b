//! Training objectives for crisp edge maps.
//!
//! - `focal_loss`: per-pixel focal cross-entropy with modulating factors
//!   `(1-p)^gamma` on positives and `p^gamma` on negatives.
//! - `tversky_index`: asymmetric soft set overlap, false positives weighted
//!   by alpha and false negatives by beta (alpha + beta = 1).
//! - `focal_tversky_loss`: the gamma-powered reciprocal Tversky ratio with
//!   squared FP/FN terms; its minimum attainable value is 1, at zero soft
//!   FP and FN mass.
//! - `hybrid_focal_loss`: focal Tversky plus `lambda` times the focal loss.
//! - `weighted_ce`: the per-image class-balanced cross-entropy baseline.
//!
//! All losses reduce per image (sum over pixels) and then take the
//! arithmetic mean over the batch.

use crate::tensor::{Result, Tensor, TensorError};

/// Every constant of the loss family in one place.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossConfig {
    /// False-positive weight in the Tversky ratio.
    pub alpha_tv: f64,
    /// False-negative weight in the Tversky ratio; `alpha_tv + beta_tv = 1`.
    pub beta_tv: f64,
    /// Focusing exponent of the focal Tversky loss.
    pub gamma_ft: f64,
    /// Balance factor of the focal loss.
    pub alpha_fl: f64,
    /// Focusing exponent of the focal loss.
    pub gamma_fl: f64,
    /// Weight of the focal term inside the hybrid loss.
    pub lambda: f64,
    /// Additive constant keeping the Tversky ratio finite on empty maps.
    pub c: f64,
    /// Probabilities are clamped to `[clamp_eps, 1 - clamp_eps]` before logs.
    pub clamp_eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha_tv: 0.3,
            beta_tv: 0.7,
            gamma_ft: 0.75,
            alpha_fl: 1.0,
            gamma_fl: 2.0,
            lambda: 0.001,
            c: 1e-7,
            clamp_eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| TensorError::InvalidArgument { op: "loss_config", detail };
        if (self.alpha_tv + self.beta_tv - 1.0).abs() > 1e-12 {
            return Err(bad(format!(
                "alpha_tv + beta_tv must be 1, got {} + {}",
                self.alpha_tv, self.beta_tv
            )));
        }
        if self.gamma_ft <= 0.0 {
            return Err(bad(format!("gamma_ft must be > 0, got {}", self.gamma_ft)));
        }
        if self.lambda < 0.0 {
            return Err(bad(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.c <= 0.0 {
            return Err(bad(format!("c must be > 0, got {}", self.c)));
        }
        if !(self.clamp_eps > 0.0 && self.clamp_eps < 0.5) {
            return Err(bad(format!("clamp_eps must lie in (0, 0.5), got {}", self.clamp_eps)));
        }
        Ok(())
    }
}

fn check_pair(p: &Tensor, g: &Tensor, op: &'static str) -> Result<()> {
    if p.shape() != g.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            detail: format!("prediction {:?} vs ground truth {:?}", p.shape(), g.shape()),
        });
    }
    let binary = g.with_data(|d| d.iter().all(|&v| v == 0.0 || v == 1.0));
    if !binary {
        return Err(TensorError::InvalidArgument {
            op,
            detail: "ground truth must be binary (0/1)".into(),
        });
    }
    Ok(())
}

fn one_minus(t: &Tensor) -> Tensor {
    t.scale(-1.0).add_scalar(1.0)
}

/// Focal cross-entropy, summed over pixels per image, averaged over batch.
pub fn focal_loss(p: &Tensor, g: &Tensor, alpha_fl: f64, gamma_fl: f64, clamp_eps: f64) -> Result<Tensor> {
    check_pair(p, g, "focal_loss")?;
    let pc = p.clamp(clamp_eps, 1.0 - clamp_eps);
    let not_p = one_minus(&pc);
    let not_g = one_minus(g);
    let pos = not_p.powf(gamma_fl).mul(g)?.mul(&pc.ln())?;
    let neg = pc.powf(gamma_fl).mul(&not_g)?.mul(&not_p.ln())?;
    Ok(pos.add(&neg)?.sum_per_image().scale(-alpha_fl).mean_batch())
}

/// Soft Tversky overlap in `[0, 1]`. Returns 1 when both maps are empty.
pub fn tversky_index(p: &[f64], g: &[f64], alpha_tv: f64, beta_tv: f64) -> Result<f64> {
    if p.len() != g.len() {
        return Err(TensorError::ShapeMismatch {
            op: "tversky_index",
            detail: format!("{} vs {} values", p.len(), g.len()),
        });
    }
    let mut inter = 0.0;
    let mut fp = 0.0;
    let mut fnn = 0.0;
    for (&pv, &gv) in p.iter().zip(g) {
        inter += pv * gv;
        fp += pv * (1.0 - gv);
        fnn += (1.0 - pv) * gv;
    }
    if inter == 0.0 && fp == 0.0 && fnn == 0.0 {
        return Ok(1.0);
    }
    Ok(inter / (inter + alpha_tv * fp + beta_tv * fnn))
}

/// Gamma-powered reciprocal Tversky ratio with squared FP/FN terms,
/// per image then batch-averaged. Always >= 1.
pub fn focal_tversky_loss(p: &Tensor, g: &Tensor, cfg: &LossConfig) -> Result<Tensor> {
    check_pair(p, g, "focal_tversky_loss")?;
    cfg.validate()?;
    let not_g = one_minus(g);
    let not_p = one_minus(p);
    let inter = p.mul(g)?.sum_per_image();
    let fp_sq = p.mul(&not_g)?.powf(2.0).sum_per_image();
    let fn_sq = not_p.mul(g)?.powf(2.0).sum_per_image();
    let num = inter
        .add(&fp_sq.scale(cfg.alpha_tv))?
        .add(&fn_sq.scale(cfg.beta_tv))?
        .add_scalar(cfg.c);
    let den = inter.add_scalar(cfg.c);
    Ok(num.div(&den)?.powf(cfg.gamma_ft).mean_batch())
}

/// `L_FT + lambda * L_FL`.
pub fn hybrid_focal_loss(p: &Tensor, g: &Tensor, cfg: &LossConfig) -> Result<Tensor> {
    let ft = focal_tversky_loss(p, g, cfg)?;
    if cfg.lambda == 0.0 {
        return Ok(ft);
    }
    let fl = focal_loss(p, g, cfg.alpha_fl, cfg.gamma_fl, cfg.clamp_eps)?;
    ft.add(&fl.scale(cfg.lambda))
}

/// Class-balanced cross-entropy with per-image `beta = |negatives| / |all|`
/// weighting the positive term, `1 - beta` the negative term.
pub fn weighted_ce(p: &Tensor, g: &Tensor, clamp_eps: f64) -> Result<Tensor> {
    check_pair(p, g, "weighted_ce")?;
    let [n, c, h, w] = g.shape();
    let per = c * h * w;
    if per == 0 {
        return Err(TensorError::InvalidArgument {
            op: "weighted_ce",
            detail: "image has no pixels".into(),
        });
    }
    let betas: Vec<f64> = g.with_data(|d| {
        d.chunks(per)
            .map(|img| {
                let pos: f64 = img.iter().sum();
                (per as f64 - pos) / per as f64
            })
            .collect()
    });
    let beta_t = Tensor::from_vec([n, 1, 1, 1], betas.clone())?;
    let inv_beta_t = Tensor::from_vec([n, 1, 1, 1], betas.iter().map(|b| 1.0 - b).collect())?;
    let pc = p.clamp(clamp_eps, 1.0 - clamp_eps);
    let pos = g.mul(&pc.ln())?.sum_per_image().mul(&beta_t)?;
    let neg = one_minus(g).mul(&one_minus(&pc).ln())?.sum_per_image().mul(&inv_beta_t)?;
    Ok(pos.add(&neg)?.scale(-1.0).mean_batch())
}
