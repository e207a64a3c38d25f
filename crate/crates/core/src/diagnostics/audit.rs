//! Batch application of every certificate to a recorded trajectory.

use std::f64::consts::{E, SQRT_2};

use crate::diagnostics::bounds::{
    bound_hedge, bound_nh, bound_nh_improved, bound_nh_vt, implicit_regret_bound, BoundMode,
};
use crate::diagnostics::concordance::{sandwich_check, sandwich_lambda, SandwichOptions};
use crate::diagnostics::taylor::{discretization_error, k_invariant_report};
use crate::diagnostics::CertificateReport;
use crate::engine::{log_sum_exp, quantile_regret, StepRecord};
use crate::error::Result;
use crate::potentials::{default_normalhedge_t0, PotentialKind, PotentialSpec};
use crate::rng;

/// Upper bound on the step exponent under the default NormalHedge `t0`.
pub const LAMBDA_CEILING: f64 = 0.414;

/// What [`trajectory_audit`] evaluates besides the always-on checks.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditOptions {
    /// Quantiles at which realized regret is compared with each bound.
    pub eps_grid: Vec<f64>,
    /// Hessian sandwich sampling; `None` skips the sandwich.
    pub sandwich: Option<SandwichOptions>,
    /// Per-round slack of the constant-potential chain.
    pub chain_tol: f64,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            eps_grid: vec![0.1, 0.25, 0.5],
            sandwich: Some(SandwichOptions::default()),
            chain_tol: 1e-10,
        }
    }
}

/// True when a NormalHedge run starts at or above the default `t0`, which is
/// what the refined time-increment analysis needs.
pub fn t0_is_compliant(spec: &PotentialSpec, n: usize) -> bool {
    spec.is_normalhedge() && spec.t0() >= default_normalhedge_t0(spec.b(), n) * (1.0 - 1e-12)
}

/// `delta_t <= 2 e B^2`, reported only when
/// `t_prev >= 256 e^2 B^2 max{K, 1}` with `K = max_i x_i^2 / t_prev`.
pub fn crude_delta_t_check(spec: &PotentialSpec, record: &StepRecord) -> Option<CertificateReport> {
    if !spec.is_normalhedge() {
        return None;
    }
    let b2 = spec.b() * spec.b();
    let t = record.t_prev;
    let k = record.x_tilde_prev.iter().map(|y| y * y / t).fold(0.0, f64::max);
    if t < 256.0 * E * E * b2 * k.max(1.0) {
        return None;
    }
    Some(CertificateReport::check(
        "crude_delta_t",
        Some(record.round),
        record.delta_t,
        2.0 * E * b2,
    ))
}

fn at(mut r: CertificateReport, round: usize) -> CertificateReport {
    r.round = Some(round);
    r
}

fn or_failed(r: Result<CertificateReport>, name: &str, round: Option<usize>) -> CertificateReport {
    r.unwrap_or_else(|_| CertificateReport::failed(name, round))
}

/// `log sum_i exp(sqrt 2 eta x_i)`; the time term cancels in ratios.
fn exp_log_mass(eta: f64, x: &[f64]) -> f64 {
    log_sum_exp(x.iter().map(|&y| SQRT_2 * eta * y))
}

fn variance(p: &[f64], v: &[f64]) -> f64 {
    let anchor = v.first().copied().unwrap_or(0.0);
    let mean: f64 = p.iter().zip(v).map(|(&w, &a)| w * (a - anchor)).sum();
    p.iter()
        .zip(v)
        .map(|(&w, &a)| {
            let d = a - anchor - mean;
            w * d * d
        })
        .sum()
}

fn step_reports(
    spec: &PotentialSpec,
    rec: &StepRecord,
    compliant: bool,
    opts: &AuditOptions,
    out: &mut Vec<CertificateReport>,
) {
    let j = rec.round;
    let round = Some(j);
    out.push(CertificateReport::check("delta_t_nonnegative", round, -rec.delta_t, 0.0));
    out.push(CertificateReport::check(
        "potential_nonincrease",
        round,
        rec.log_phi_after - rec.log_phi_before,
        0.0,
    ));
    let centering: f64 = rec.p.iter().zip(&rec.delta_x).map(|(a, b)| a * b).sum();
    let dx_inf = rec.delta_x.iter().map(|d| d.abs()).fold(0.0, f64::max);
    out.push(CertificateReport::check(
        "p_centering",
        round,
        centering.abs(),
        1e-10 * dx_inf,
    ));

    match spec.kind() {
        PotentialKind::Exponential { eta } => {
            let oracle = ((exp_log_mass(eta, &rec.x_tilde) - exp_log_mass(eta, &rec.x_tilde_prev))
                / (eta * eta))
                .max(0.0);
            out.push(CertificateReport::check(
                "exp_closed_form_delta_t",
                round,
                (rec.delta_t - oracle).abs(),
                1e-9,
            ));
            let bound = (2.0 * SQRT_2 * eta * spec.b()).exp() * variance(&rec.p, &rec.loss);
            out.push(CertificateReport::check("exp_variance_delta_t", round, rec.delta_t, bound));
        }
        PotentialKind::NormalHedge => {
            out.push(or_failed(
                k_invariant_report(&rec.x_tilde, rec.t, spec.t0(), rec.x.len(), round),
                "k_invariant",
                round,
            ));
            if let Some(r) = crude_delta_t_check(spec, rec) {
                out.push(r);
            }
            let t = rec.t_prev;
            let kmax = rec.x_tilde_prev.iter().map(|y| y * y / t).fold(0.0, f64::max);
            out.push(match discretization_error(spec, &rec.x_tilde_prev, t) {
                Ok(d) => CertificateReport::check("discretization_error", round, d, (kmax + 4.0) / (4.0 * t)),
                Err(_) => CertificateReport::failed("discretization_error", round),
            });
            if compliant {
                out.push(CertificateReport::check(
                    "refined_delta_t",
                    round,
                    rec.delta_t,
                    2.0 * rec.v_increment,
                ));
                let step: Vec<f64> = rec.x_tilde.iter().zip(&rec.x_tilde_prev).map(|(a, b)| a - b).collect();
                let lambda = sandwich_lambda(spec, &rec.x_tilde_prev, t, &step, rec.delta_t);
                out.push(CertificateReport::check("lambda_bound", round, lambda, LAMBDA_CEILING));
            }
        }
    }

    if let Some(sw) = opts.sandwich {
        let step: Vec<f64> = rec.x_tilde.iter().zip(&rec.x_tilde_prev).map(|(a, b)| a - b).collect();
        let sw = SandwichOptions {
            seed: rng::derive_seed(sw.seed, j as u64),
            ..sw
        };
        let r = sandwich_check(spec, &rec.x_tilde_prev, rec.t_prev, &step, rec.delta_t, &sw);
        out.push(at(or_failed(r, "sandwich", round), j));
    }
}

fn eps_label(eps: f64) -> String {
    format!("eps_{eps}")
}

/// Every per-step certificate for every record, then the trajectory-level
/// checks: the constant-potential chain, `t_T` against `V_T`, and realized
/// quantile regret against each bound at each configured quantile.
pub fn trajectory_audit(
    records: &[StepRecord],
    spec: &PotentialSpec,
    opts: &AuditOptions,
) -> Vec<CertificateReport> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let last = records.last().expect("nonempty");
    let n = first.x.len();
    let compliant = t0_is_compliant(spec, n);
    let mut out = Vec::new();

    let log_phi_0 = first.log_phi_before;
    let mut dropped = 0.0;
    for rec in records {
        step_reports(spec, rec, compliant, opts, &mut out);
        if rec.projection_drop {
            dropped += rec.log_phi_before - rec.log_phi_after;
        }
        let slack = rec.round as f64 * opts.chain_tol;
        out.push(CertificateReport::check(
            "constant_potential",
            Some(rec.round),
            (rec.log_phi_after - log_phi_0 + dropped).abs(),
            slack,
        ));
        out.push(CertificateReport::check(
            "potential_below_initial",
            Some(rec.round),
            rec.log_phi_after - log_phi_0,
            slack,
        ));
    }

    let t0 = spec.t0();
    match spec.kind() {
        PotentialKind::Exponential { eta } => {
            let bound = (2.0 * SQRT_2 * eta * spec.b()).exp() * last.v;
            out.push(CertificateReport::check("t_vs_variance", None, last.t - t0, bound));
        }
        PotentialKind::NormalHedge if compliant => {
            out.push(CertificateReport::check("t_vs_t0_plus_2v", None, last.t, t0 + 2.0 * last.v));
        }
        PotentialKind::NormalHedge => {}
    }

    for &eps in &opts.eps_grid {
        let label = eps_label(eps);
        let regret = quantile_regret(&last.x, eps);
        let implicit = implicit_regret_bound(spec, n, last.t, eps);
        let name = format!("regret_implicit_{label}");
        out.push(match &implicit {
            Ok(b) => CertificateReport::check(name, None, regret, *b),
            Err(_) => CertificateReport::failed(name, None),
        });
        let closed = match spec.kind() {
            PotentialKind::Exponential { eta } => {
                bound_hedge(eta, last.t - t0, eps, spec.b(), BoundMode::Time)
            }
            PotentialKind::NormalHedge => bound_nh(last.t, t0, eps),
        };
        let name = format!("implicit_matches_closed_form_{label}");
        out.push(match (&implicit, closed) {
            (Ok(a), Ok(b)) => CertificateReport::check(name, None, (a - b).abs(), 1e-9 * b.abs().max(1.0)),
            _ => CertificateReport::failed(name, None),
        });
        match spec.kind() {
            PotentialKind::Exponential { eta } => {
                let name = format!("regret_hedge_variance_{label}");
                out.push(match bound_hedge(eta, last.v, eps, spec.b(), BoundMode::Variance) {
                    Ok(b) => CertificateReport::check(name, None, regret, b),
                    Err(_) => CertificateReport::failed(name, None),
                });
            }
            PotentialKind::NormalHedge if compliant => {
                let name = format!("regret_nh_vt_{label}");
                out.push(match bound_nh_vt(last.v, t0, eps) {
                    Ok(b) => CertificateReport::check(name, None, regret, b),
                    Err(_) => CertificateReport::failed(name, None),
                });
                let name = format!("regret_nh_improved_{label}");
                out.push(match bound_nh_improved(last.v, t0, eps, spec.b(), n) {
                    Ok(b) => CertificateReport::check(name, None, regret, b),
                    Err(_) => CertificateReport::failed(name, None),
                });
            }
            PotentialKind::NormalHedge => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Engine, VtMode};

    #[test]
    fn empty_trajectory() {
        let spec = PotentialSpec::normalhedge(1.0, 2).unwrap();
        assert!(trajectory_audit(&[], &spec, &AuditOptions::default()).is_empty());
    }

    #[test]
    fn crude_threshold_value() {
        // 256 e^2 for B = 1
        assert!((256.0 * E * E - 1891.598).abs() < 1e-3);
    }

    #[test]
    fn vacuous_round_passes_crude_check() {
        let spec = PotentialSpec::normalhedge(1.0, 3).unwrap();
        let mut e = Engine::new(spec, 3, VtMode::Standard).unwrap();
        let r = e.step(&[0.2, 0.2, 0.2]).unwrap();
        let c = crude_delta_t_check(&spec, &r).expect("applicable at default t0");
        assert!(c.holds);
        assert_eq!(c.lhs, 0.0);
    }

    #[test]
    fn small_runs_pass_every_certificate() {
        let losses = [[1.0, 0.0, 0.5], [0.0, 1.0, 0.2], [0.3, 0.3, 0.3], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        for spec in [
            PotentialSpec::normalhedge(1.0, 3).unwrap(),
            PotentialSpec::exponential(0.4, 1.0).unwrap(),
        ] {
            let mut e = Engine::new(spec, 3, VtMode::Standard).unwrap();
            let recs: Vec<_> = losses.iter().map(|l| e.step(l).unwrap()).collect();
            let reports = trajectory_audit(&recs, &spec, &AuditOptions::default());
            for r in &reports {
                assert!(r.holds, "{} failed: {r:?}", spec.kind().name());
            }
            assert!(reports.iter().any(|r| r.name == "sandwich"));
        }
    }
}
