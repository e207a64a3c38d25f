//! Closed-form regret bounds and the generic implicit bound they specialize.

use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};

use crate::engine::log_total_potential;
use crate::error::{Error, Result};
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::root;

/// Whether [`bound_hedge`] is fed the final time or the second moment `V_T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    Time,
    Variance,
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("eps must lie in (0, 1], got {eps}")))
    }
}

fn check_nonneg(v: f64, what: &str) -> Result<()> {
    if v.is_finite() && v >= 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("{what} must be finite and nonnegative, got {v}")))
    }
}

/// Exponential-weights bound.
///
/// `Time`: `eta t / sqrt 2 + log(1/eps) / (sqrt 2 eta)`.
/// `Variance`: `exp(2 sqrt 2 eta B) eta V / sqrt 2 + log(1/eps) / (sqrt 2 eta)`.
pub fn bound_hedge(eta: f64, t_or_vt: f64, eps: f64, b: f64, mode: BoundMode) -> Result<f64> {
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Domain(format!("eta must be positive, got {eta}")));
    }
    check_eps(eps)?;
    check_nonneg(t_or_vt, "t or V_T")?;
    let scale = match mode {
        BoundMode::Time => 1.0,
        BoundMode::Variance => {
            check_nonneg(b, "B")?;
            (2.0 * SQRT_2 * eta * b).exp()
        }
    };
    Ok(scale * eta * t_or_vt / SQRT_2 + (1.0 / eps).ln() / (SQRT_2 * eta))
}

fn check_t0(t0: f64) -> Result<()> {
    if t0.is_finite() && t0 > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("t0 must be positive, got {t0}")))
    }
}

/// NormalHedge bound in terms of the final time:
/// `sqrt(t (log(t/t0) + 2 log(1/eps)))`.
pub fn bound_nh(t: f64, t0: f64, eps: f64) -> Result<f64> {
    check_t0(t0)?;
    check_eps(eps)?;
    if !(t >= t0) || !t.is_finite() {
        return Err(Error::Domain(format!("need t >= t0, got t={t}, t0={t0}")));
    }
    Ok((t * ((t / t0).ln() + 2.0 * (1.0 / eps).ln())).sqrt())
}

/// NormalHedge bound in terms of `V_T`:
/// `sqrt((t0 + 2V)(log(t0 + 2V) + 2 log(1/eps)))`.
pub fn bound_nh_vt(vt: f64, t0: f64, eps: f64) -> Result<f64> {
    check_t0(t0)?;
    check_eps(eps)?;
    check_nonneg(vt, "V_T")?;
    let s = t0 + 2.0 * vt;
    Ok((s * (s.ln() + 2.0 * (1.0 / eps).ln())).max(0.0).sqrt())
}

/// `144 B max{1, log(t0 + 2V) + 2 log N}`.
pub fn iota(vt: f64, t0: f64, b: f64, n: usize) -> f64 {
    let inner = (t0 + 2.0 * vt).ln() + 2.0 * (n.max(1) as f64).ln();
    144.0 * b * inner.max(1.0)
}

/// Sharper-constant NormalHedge bound:
/// `sqrt((t0 + V + iota sqrt V)(log(t0 + 2V) + 2 log(1/eps)))`.
pub fn bound_nh_improved(vt: f64, t0: f64, eps: f64, b: f64, n: usize) -> Result<f64> {
    check_t0(t0)?;
    check_eps(eps)?;
    check_nonneg(vt, "V_T")?;
    check_nonneg(b, "B")?;
    let s = t0 + vt + iota(vt, t0, b, n) * vt.sqrt();
    let l = (t0 + 2.0 * vt).ln() + 2.0 * (1.0 / eps).ln();
    Ok((s * l).max(0.0).sqrt())
}

/// The generic bound: the `y` in the domain with
/// `eps N phi(y, t) = Phi(proj(0), t0)`, found by bisection on `log phi`.
///
/// Uses the real-valued `eps N`. When the level is already met at the
/// domain's lower end, that end is returned.
pub fn implicit_regret_bound(spec: &PotentialSpec, n: usize, t: f64, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if n == 0 {
        return Err(Error::Domain("need at least one expert".into()));
    }
    spec.check_t(t)?;
    let origin = spec.domain().project(&vec![0.0; n]);
    let level = log_total_potential(spec, &origin, spec.t0())? - (eps * n as f64).ln();
    let above = |y: f64| spec.log_phi_unchecked(y, t) >= level;

    // log phi is nondecreasing in y on the domain for both potentials
    let (lo, hi) = match spec.kind() {
        PotentialKind::NormalHedge => {
            if above(0.0) {
                return Ok(0.0);
            }
            root::expand_upper(above, 0.0, 1.0, 2000)
        }
        PotentialKind::Exponential { .. } => {
            if above(0.0) {
                root::expand_lower(above, 0.0, 1.0, 2000)
            } else {
                root::expand_upper(above, 0.0, 1.0, 2000)
            }
        }
    }
    .ok_or_else(|| Error::Solver("could not bracket the implicit regret bound".into()))?;
    let width = 1e-14 * hi.abs().max(lo.abs()).max(1.0);
    let (_, hi) = root::bisect(above, lo, hi, width, 400);
    Ok(hi)
}

/// The random-walk lower-bound reference `(sqrt(2 log(1/eps)) - 6) sqrt(sum sigma^2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReference {
    pub factor: f64,
    pub value: f64,
    /// The factor is nonpositive, so the reference says nothing.
    pub vacuous: bool,
}

pub fn lower_bound_reference(eps: f64, sigma_sq_sum: f64) -> LowerBoundReference {
    let factor = (2.0 * (1.0 / eps).ln()).sqrt() - 6.0;
    LowerBoundReference {
        factor,
        value: factor * sigma_sq_sum.max(0.0).sqrt(),
        vacuous: factor <= 1e-12,
    }
}
