//! Scalar potentials `phi(y, t)` and their closed-form partial derivatives.
//!
//! Two potentials ship:
//!
//! - exponential weights, `exp(sqrt(2) * eta * y - eta^2 * t)` on the full line;
//! - NormalHedge.BH, `t^(-1/2) * exp(y^2 / (2t))` on the half-line `[0, inf)`.
//!
//! Both solve the backwards heat equation `d_t phi = -1/2 d_yy phi`. Every
//! y-derivative is the potential times a simple coefficient, which is what
//! lets the engine keep all ratios in log space.

use std::f64::consts::{E, SQRT_2};

use crate::error::{Error, Result};

/// Domain of the regret coordinates, together with its projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    FullLine,
    HalfLine { lower: f64 },
}

impl Domain {
    pub fn project_scalar(&self, y: f64) -> f64 {
        match *self {
            Domain::FullLine => y,
            Domain::HalfLine { lower } => y.max(lower),
        }
    }

    /// Coordinatewise projection.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter().map(|&y| self.project_scalar(y)).collect()
    }

    pub fn project_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, &y) in out.iter_mut().zip(x) {
            *o = self.project_scalar(y);
        }
    }

    pub fn contains(&self, y: f64) -> bool {
        match *self {
            Domain::FullLine => y.is_finite(),
            Domain::HalfLine { lower } => y >= lower,
        }
    }
}

/// Free-function form of [`Domain::project`].
pub fn project(domain: Domain, x: &[f64]) -> Vec<f64> {
    domain.project(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Exponential { eta: f64 },
    NormalHedge,
}

impl PotentialKind {
    pub fn name(&self) -> &'static str {
        match self {
            PotentialKind::Exponential { .. } => "exponential",
            PotentialKind::NormalHedge => "normalhedge",
        }
    }
}

/// A fully validated potential: which function, its domain, the starting
/// time `t0` and the loss-spread bound `B`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialSpec {
    kind: PotentialKind,
    t0: f64,
    domain: Domain,
    b: f64,
}

/// `max{512 e^2 B^2 log N, 1}`, the NormalHedge starting time that makes the
/// second-order analysis go through.
pub fn default_normalhedge_t0(b: f64, n: usize) -> f64 {
    (512.0 * E * E * b * b * (n.max(1) as f64).ln()).max(1.0)
}

impl PotentialSpec {
    /// Exponential weights with learning rate `eta`; `t0` defaults to 0.
    pub fn exponential(eta: f64, b: f64) -> Result<Self> {
        if !(eta.is_finite() && eta > 0.0) {
            return Err(Error::Config(format!("eta must be positive, got {eta}")));
        }
        check_b(b)?;
        Ok(Self {
            kind: PotentialKind::Exponential { eta },
            t0: 0.0,
            domain: Domain::FullLine,
            b,
        })
    }

    /// NormalHedge.BH for `n` experts with the default starting time.
    pub fn normalhedge(b: f64, n: usize) -> Result<Self> {
        check_b(b)?;
        Ok(Self {
            kind: PotentialKind::NormalHedge,
            t0: default_normalhedge_t0(b, n),
            domain: Domain::HalfLine { lower: 0.0 },
            b,
        })
    }

    pub fn with_t0(mut self, t0: f64) -> Result<Self> {
        match self.kind {
            PotentialKind::Exponential { .. } if !(t0.is_finite() && t0 >= 0.0) => {
                return Err(Error::Config(format!(
                    "exponential t0 must be nonnegative, got {t0}"
                )))
            }
            PotentialKind::NormalHedge if !(t0.is_finite() && t0 > 0.0) => {
                return Err(Error::Config(format!(
                    "normalhedge t0 must be positive, got {t0}"
                )))
            }
            _ => {}
        }
        self.t0 = t0;
        Ok(self)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn eta(&self) -> Option<f64> {
        match self.kind {
            PotentialKind::Exponential { eta } => Some(eta),
            PotentialKind::NormalHedge => None,
        }
    }

    pub fn is_normalhedge(&self) -> bool {
        matches!(self.kind, PotentialKind::NormalHedge)
    }

    pub(crate) fn check_t(&self, t: f64) -> Result<()> {
        let ok = match self.kind {
            PotentialKind::Exponential { .. } => t.is_finite() && t >= 0.0,
            PotentialKind::NormalHedge => t.is_finite() && t > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "time t={t} is outside the domain of the {} potential",
                self.kind.name()
            )))
        }
    }

    /// `log phi(y, t)`, finite wherever `phi` is defined.
    pub fn log_phi(&self, y: f64, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.log_phi_unchecked(y, t))
    }

    #[inline]
    pub(crate) fn log_phi_unchecked(&self, y: f64, t: f64) -> f64 {
        match self.kind {
            PotentialKind::Exponential { eta } => SQRT_2 * eta * y - eta * eta * t,
            PotentialKind::NormalHedge => -0.5 * t.ln() + y * y / (2.0 * t),
        }
    }

    /// `log phi(y1, t + s) - log phi(y0, t)` without cancellation between the
    /// two evaluations.
    #[cfg(test)]
    pub(crate) fn log_phi_increment(&self, y0: f64, y1: f64, t: f64, s: f64) -> f64 {
        let (a, b) = self.increment_coefficients(y0, y1);
        let (alpha, beta, gamma) = self.increment_time_factors(t, s);
        a * alpha - b * beta + gamma
    }

    /// Per-coordinate part `(a, b)` of the increment
    /// `a * alpha(s) - b * beta(s) + gamma(s)`.
    #[inline]
    pub(crate) fn increment_coefficients(&self, y0: f64, y1: f64) -> (f64, f64) {
        match self.kind {
            PotentialKind::Exponential { eta } => (SQRT_2 * eta * (y1 - y0), 0.0),
            PotentialKind::NormalHedge => ((y1 - y0) * (y1 + y0), y0 * y0),
        }
    }

    /// Time part `(alpha, beta, gamma)` of the increment.
    #[inline]
    pub(crate) fn increment_time_factors(&self, t: f64, s: f64) -> (f64, f64, f64) {
        match self.kind {
            PotentialKind::Exponential { eta } => (1.0, 0.0, -eta * eta * s),
            PotentialKind::NormalHedge => {
                let inv = 1.0 / (2.0 * t * (t + s));
                (t * inv, s * inv, -0.5 * (s / t).ln_1p())
            }
        }
    }

    /// `phi(y, t)`; errors instead of returning infinity.
    pub fn phi(&self, y: f64, t: f64) -> Result<f64> {
        let v = self.log_phi(y, t)?.exp();
        finite(v, "phi", y, t)
    }

    /// Coefficient `c` with `d^k phi / dy^k = c * phi`, for `k` in 0..=4.
    #[inline]
    pub(crate) fn y_coefficient(&self, order: u8, y: f64, t: f64) -> f64 {
        match self.kind {
            PotentialKind::Exponential { eta } => (SQRT_2 * eta).powi(order as i32),
            PotentialKind::NormalHedge => {
                let u = y / t;
                match order {
                    0 => 1.0,
                    1 => u,
                    2 => u * u + 1.0 / t,
                    3 => u * u * u + 3.0 * y / (t * t),
                    4 => {
                        let y2 = y * y;
                        (y2 * y2 + 6.0 * t * y2 + 3.0 * t * t) / (t * t * t * t)
                    }
                    _ => unreachable!("order checked by caller"),
                }
            }
        }
    }

    /// Closed-form `d^order phi / dy^order` for `order` in 1..=4.
    pub fn partial_y(&self, order: u8, y: f64, t: f64) -> Result<f64> {
        if !(1..=4).contains(&order) {
            return Err(Error::Domain(format!(
                "derivative order {order} not in 1..=4"
            )));
        }
        let phi = self.phi(y, t)?;
        finite(self.y_coefficient(order, y, t) * phi, "partial_y", y, t)
    }

    /// Closed-form `d phi / dt`, computed independently of `partial_y`.
    pub fn partial_t(&self, y: f64, t: f64) -> Result<f64> {
        let phi = self.phi(y, t)?;
        let c = match self.kind {
            PotentialKind::Exponential { eta } => -eta * eta,
            PotentialKind::NormalHedge => -0.5 / t - y * y / (2.0 * t * t),
        };
        finite(c * phi, "partial_t", y, t)
    }

    /// `d_t phi + 1/2 d_yy phi`; zero up to rounding for a good potential.
    pub fn heat_residual(&self, y: f64, t: f64) -> Result<f64> {
        Ok(self.partial_t(y, t)? + 0.5 * self.partial_y(2, y, t)?)
    }
}

fn check_b(b: f64) -> Result<()> {
    if b.is_finite() && b > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("loss spread bound B must be positive, got {b}")))
    }
}

fn finite(v: f64, what: &'static str, y: f64, t: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow { what, y, t })
    }
}
