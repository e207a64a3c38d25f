//! Hessian of `log Phi` in quadratic-form mode and the local self-concordance
//! sandwich `exp(-L) H(start) <= H(point) <= exp(L) H(start)` along a step.
//!
//! With `f_i = log phi(x_i, t)` and `I` drawn from `softmax(f)`, the
//! quadratic form along `u = (u_1..u_N, u_t)` is `E[B_I] + Var(A_I)` where
//! `A_i` and `B_i` are the first and second directional derivatives of `f_i`.

use std::f64::consts::SQRT_2;

use rand_distr::{Distribution, StandardNormal};

use crate::diagnostics::CertificateReport;
use crate::error::{Error, Result};
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::rng;

/// Local self-concordance constants for one step segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GscParams {
    pub t_star: f64,
    pub k_seg: f64,
    pub a_x: f64,
    pub a_t: f64,
    pub lambda: f64,
}

/// `A_x = 8 sqrt(max(K,1)) / sqrt(t*)`, `A_t = 16 max(K,1) / t*` and
/// `Lambda = A_x |dx|_inf + A_t |dt|`.
pub fn gsc_params(t_star: f64, k_seg: f64, delta_x_inf: f64, delta_t: f64) -> GscParams {
    let k1 = k_seg.max(1.0);
    let a_x = 8.0 * k1.sqrt() / t_star.sqrt();
    let a_t = 16.0 * k1 / t_star;
    GscParams {
        t_star,
        k_seg,
        a_x,
        a_t,
        lambda: a_x * delta_x_inf + a_t * delta_t.abs(),
    }
}

/// `sup_s max_i x_i(s)^2 / t(s)` over the segment, attained at an endpoint
/// because `y^2 / t` is jointly convex.
pub fn segment_k(x: &[f64], t: f64, delta_x: &[f64], delta_t: f64) -> f64 {
    let t1 = t + delta_t;
    x.iter()
        .zip(delta_x)
        .map(|(&a, &d)| (a * a / t).max((a + d) * (a + d) / t1))
        .fold(0.0, f64::max)
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().map(|d| d.abs()).fold(0.0, f64::max)
}

/// The sandwich exponent for a step from `(x, t)` by `(delta_x, delta_t)`.
pub fn sandwich_lambda(spec: &PotentialSpec, x: &[f64], t: f64, delta_x: &[f64], delta_t: f64) -> f64 {
    match spec.kind() {
        PotentialKind::Exponential { eta } => 2.0 * SQRT_2 * eta * inf_norm(delta_x),
        PotentialKind::NormalHedge => {
            let t_star = t.min(t + delta_t);
            gsc_params(t_star, segment_k(x, t, delta_x, delta_t), inf_norm(delta_x), delta_t).lambda
        }
    }
}

/// Softmax weights and per-coordinate derivatives of `f_i` at one point.
struct HessianAt {
    w: Vec<f64>,
    fx: Vec<f64>,
    ft: Vec<f64>,
    fxx: f64,
    fxt: Vec<f64>,
    ftt: Vec<f64>,
}

impl HessianAt {
    fn new(spec: &PotentialSpec, x: &[f64], t: f64) -> Result<Self> {
        spec.check_t(t)?;
        let f: Vec<f64> = x.iter().map(|&y| spec.log_phi_unchecked(y, t)).collect();
        let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(Error::Overflow {
                what: "log potential Hessian",
                y: x.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                t,
            });
        }
        let mut w: Vec<f64> = f.iter().map(|&v| (v - m).exp()).collect();
        let s: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= s);
        let n = x.len();
        Ok(match spec.kind() {
            PotentialKind::Exponential { eta } => Self {
                w,
                fx: vec![SQRT_2 * eta; n],
                ft: vec![-eta * eta; n],
                fxx: 0.0,
                fxt: vec![0.0; n],
                ftt: vec![0.0; n],
            },
            PotentialKind::NormalHedge => {
                let t2 = t * t;
                Self {
                    w,
                    fx: x.iter().map(|&y| y / t).collect(),
                    ft: x.iter().map(|&y| -0.5 / t - y * y / (2.0 * t2)).collect(),
                    fxx: 1.0 / t,
                    fxt: x.iter().map(|&y| -y / t2).collect(),
                    ftt: x.iter().map(|&y| 0.5 / t2 + y * y / (t2 * t)).collect(),
                }
            }
        })
    }

    fn quad(&self, u: &[f64]) -> f64 {
        let n = self.w.len();
        let ut = u[n];
        let a = |i: usize| self.fx[i] * u[i] + self.ft[i] * ut;
        let mut mean_a = 0.0;
        let mut mean_b = 0.0;
        for i in 0..n {
            let ui = u[i];
            let b = self.fxx * ui * ui + 2.0 * self.fxt[i] * ui * ut + self.ftt[i] * ut * ut;
            mean_a += self.w[i] * a(i);
            mean_b += self.w[i] * b;
        }
        let var_a: f64 = (0..n)
            .map(|i| {
                let d = a(i) - mean_a;
                self.w[i] * d * d
            })
            .sum();
        mean_b + var_a
    }
}

/// `u^T (Hessian of log Phi at (x, t)) u` with `u` of length `N + 1`, the last
/// entry being the time component.
pub fn hessian_logphi_quadform(spec: &PotentialSpec, x_tilde: &[f64], t: f64, u: &[f64]) -> Result<f64> {
    if u.len() != x_tilde.len() + 1 {
        return Err(Error::Domain(format!(
            "direction has {} entries, expected {}",
            u.len(),
            x_tilde.len() + 1
        )));
    }
    Ok(HessianAt::new(spec, x_tilde, t)?.quad(u))
}

/// Sampling density for [`sandwich_check`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SandwichOptions {
    pub n_dirs: usize,
    pub n_points: usize,
    pub seed: u64,
}

impl Default for SandwichOptions {
    fn default() -> Self {
        Self {
            n_dirs: 16,
            n_points: 16,
            seed: 0x5EED_5A4D,
        }
    }
}

/// Directions drawn uniformly from the unit sphere in `dim` dimensions.
pub fn unit_directions(dim: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng::seeded(seed);
    (0..count)
        .map(|_| loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut r)).collect();
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-12 {
                break v.into_iter().map(|a| a / norm).collect();
            }
        })
        .collect()
}

/// Below this both quadratic forms count as zero and the sample is skipped.
const HESSIAN_FLOOR: f64 = 1e-300;

/// Checks the Hessian sandwich at `n_points` points `s = k / n_points`,
/// `k = 1..=n_points`, of the segment and along `n_dirs` random directions.
///
/// Reported as `lhs = max |log(H(s)[u,u] / H(0)[u,u])|` against `rhs = Lambda`.
pub fn sandwich_check(
    spec: &PotentialSpec,
    x: &[f64],
    t: f64,
    delta_x: &[f64],
    delta_t: f64,
    opts: &SandwichOptions,
) -> Result<CertificateReport> {
    if delta_x.len() != x.len() {
        return Err(Error::Domain("step and state lengths differ".into()));
    }
    let lambda = sandwich_lambda(spec, x, t, delta_x, delta_t);
    let dirs = unit_directions(x.len() + 1, opts.n_dirs, opts.seed);
    let start = HessianAt::new(spec, x, t)?;
    let h0: Vec<f64> = dirs.iter().map(|u| start.quad(u)).collect();

    let mut worst: f64 = 0.0;
    let mut point = vec![0.0; x.len()];
    for k in 1..=opts.n_points {
        let s = k as f64 / opts.n_points as f64;
        for ((p, &a), &d) in point.iter_mut().zip(x).zip(delta_x) {
            *p = a + s * d;
        }
        let here = HessianAt::new(spec, &point, t + s * delta_t)?;
        for (u, &base) in dirs.iter().zip(&h0) {
            let h = here.quad(u);
            if base.abs() <= HESSIAN_FLOOR && h.abs() <= HESSIAN_FLOOR {
                continue;
            }
            let dev = if base > 0.0 && h > 0.0 {
                (h / base).ln().abs()
            } else {
                f64::INFINITY
            };
            worst = worst.max(dev);
        }
    }
    Ok(CertificateReport::check("sandwich", None, worst, lambda))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gsc_examples() {
        let g = gsc_params(64.0, 1.0, 1.0, 0.0);
        assert_eq!(g.a_x, 1.0);
        assert_eq!(g.lambda, 1.0);
        assert_eq!(g.a_t, 0.25);
        assert_eq!(gsc_params(10.0, 3.0, 0.0, 0.0).lambda, 0.0);
    }

    #[test]
    fn hessian_examples() {
        let hedge = PotentialSpec::exponential(0.9, 1.0).unwrap();
        let h = hessian_logphi_quadform(&hedge, &[0.7], 2.0, &[0.6, 0.8]).unwrap();
        assert_eq!(h, 0.0);
        let nh = PotentialSpec::normalhedge(1.0, 1).unwrap();
        let h = hessian_logphi_quadform(&nh, &[0.0], 1.0, &[1.0, 0.0]).unwrap();
        assert_relative_eq!(h, 1.0, max_relative = 1e-15);
        assert!(hessian_logphi_quadform(&nh, &[0.0], 1.0, &[1.0]).is_err());
    }

    #[test]
    fn null_step_is_equality() {
        let nh = PotentialSpec::normalhedge(1.0, 3).unwrap();
        let x = [1.0, 0.0, 4.0];
        let r = sandwich_check(&nh, &x, nh.t0(), &[0.0; 3], 0.0, &SandwichOptions::default()).unwrap();
        assert!(r.holds);
        assert_eq!(r.rhs, 0.0);
        assert_eq!(r.lhs, 0.0);
    }

    #[test]
    fn directions_are_unit_and_pinned() {
        let a = unit_directions(5, 4, 9);
        assert_eq!(a, unit_directions(5, 4, 9));
        for u in &a {
            assert_relative_eq!(u.iter().map(|v| v * v).sum::<f64>(), 1.0, max_relative = 1e-14);
        }
    }
}
