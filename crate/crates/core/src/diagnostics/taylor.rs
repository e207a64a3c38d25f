//! Discretization error and the `K(t)` regret-growth invariant.

use crate::diagnostics::CertificateReport;
use crate::engine::{log_sum_exp, EngineState};
use crate::error::{Error, Result};
use crate::potentials::PotentialSpec;

/// `sum_i phi'''' / (4 sum_i phi'') - sum_i phi'' / (4 Phi)`, evaluated with a
/// common max shift so that no potential value is ever formed.
pub fn discretization_error(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Result<f64> {
    spec.check_t(t)?;
    let lphi: Vec<f64> = x_tilde.iter().map(|&y| spec.log_phi_unchecked(y, t)).collect();
    let lse = log_sum_exp(lphi.iter().copied());
    if !lse.is_finite() {
        return Err(Error::Overflow {
            what: "discretization error",
            y: x_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t,
        });
    }
    let m = lphi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut s0, mut s2, mut s4) = (0.0, 0.0, 0.0);
    for (&y, &l) in x_tilde.iter().zip(&lphi) {
        let w = (l - m).exp();
        s0 += w;
        s2 += w * spec.y_coefficient(2, y, t);
        s4 += w * spec.y_coefficient(4, y, t);
    }
    Ok(s4 / (4.0 * s2) - s2 / (4.0 * s0))
}

/// `K(t) = log(t / t0) + 2 log N`.
pub fn k_of_t(t: f64, t0: f64, n: usize) -> Result<f64> {
    if !(t0 > 0.0) || t < t0 {
        return Err(Error::Domain(format!("K(t) needs t >= t0 > 0, got t={t}, t0={t0}")));
    }
    Ok((t / t0).ln() + 2.0 * (n as f64).ln())
}

/// `max_i x_i^2 / t <= K(t)` at one state.
pub fn k_invariant_report(
    x_tilde: &[f64],
    t: f64,
    t0: f64,
    n: usize,
    round: Option<usize>,
) -> Result<CertificateReport> {
    let k = k_of_t(t, t0, n)?;
    let lhs = x_tilde.iter().map(|y| y * y / t).fold(0.0, f64::max);
    Ok(CertificateReport::check("k_invariant", round, lhs, k))
}

/// [`k_invariant_report`] for the current engine state.
pub fn check_k_invariant(spec: &PotentialSpec, state: &EngineState) -> Result<CertificateReport> {
    k_invariant_report(
        &state.x_tilde,
        state.t,
        spec.t0(),
        state.x_tilde.len(),
        Some(state.round),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn exponential_error_vanishes() {
        let spec = PotentialSpec::exponential(0.8, 1.0).unwrap();
        let d = discretization_error(&spec, &[0.3, -2.0, 5.0], 1.7).unwrap();
        // each term is eta^2 / 2
        assert!(d.abs() <= 1e-12 * 0.32);
    }

    #[test]
    fn normalhedge_at_origin() {
        let spec = PotentialSpec::normalhedge(1.0, 3).unwrap();
        let d = discretization_error(&spec, &[0.0, 0.0, 0.0], 2.0).unwrap();
        assert!((d - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn k_examples() {
        assert!((k_of_t(5.0, 5.0, 7).unwrap() - 2.0 * 7f64.ln()).abs() < 1e-15);
        assert!((k_of_t(E * 3.0, 3.0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!(k_of_t(1.0, 2.0, 3).is_err());
    }

    #[test]
    fn fresh_state_satisfies_invariant() {
        let spec = PotentialSpec::normalhedge(1.0, 4).unwrap();
        let s = EngineState::initial(&spec, 4);
        assert!(check_k_invariant(&spec, &s).unwrap().holds);
    }
}
