//! Numerical certificates for the learner.
//!
//! Every inequality the analysis of the CP learner relies on is evaluated
//! here on concrete states and reported as a [`CertificateReport`]. The
//! bound formulas used to compare realized regret live in [`bounds`].

use serde::{Deserialize, Serialize};

pub mod audit;
pub mod bounds;
pub mod concordance;
pub mod taylor;

pub use audit::{crude_delta_t_check, t0_is_compliant, trajectory_audit, AuditOptions, LAMBDA_CEILING};
pub use bounds::{
    bound_hedge, bound_nh, bound_nh_improved, bound_nh_vt, implicit_regret_bound, iota,
    lower_bound_reference, BoundMode, LowerBoundReference,
};
pub use concordance::{
    gsc_params, hessian_logphi_quadform, sandwich_check, sandwich_lambda, segment_k, unit_directions,
    GscParams, SandwichOptions,
};
pub use taylor::{check_k_invariant, discretization_error, k_invariant_report, k_of_t};

/// Multiplicative slack on every certificate.
pub const CERT_REL_TOL: f64 = 1e-9;
/// Absolute slack on every certificate.
pub const CERT_ABS_TOL: f64 = 1e-12;

/// Outcome of one inequality `lhs <= rhs` evaluated on a concrete state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub name: String,
    /// 1-based round, or `None` for trajectory-level checks.
    pub round: Option<usize>,
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

impl CertificateReport {
    /// `holds` iff `lhs <= rhs * (1 + CERT_REL_TOL) + CERT_ABS_TOL`, with the
    /// multiplicative slack taken on `|rhs|`.
    pub fn check(name: impl Into<String>, round: Option<usize>, lhs: f64, rhs: f64) -> Self {
        let holds = lhs <= rhs + rhs.abs() * CERT_REL_TOL + CERT_ABS_TOL;
        Self {
            name: name.into(),
            round,
            holds: holds && !lhs.is_nan() && !rhs.is_nan(),
            lhs,
            rhs,
            margin: rhs - lhs,
        }
    }

    /// A report that failed because its inputs could not be evaluated.
    pub fn failed(name: impl Into<String>, round: Option<usize>) -> Self {
        Self {
            name: name.into(),
            round,
            holds: false,
            lhs: f64::NAN,
            rhs: f64::NAN,
            margin: f64::NAN,
        }
    }
}

/// Serializes reports as a JSON list of `{name, round, holds, lhs, rhs, margin}`.
pub fn reports_to_json(reports: &[CertificateReport]) -> serde_json::Result<String> {
    serde_json::to_string_pretty(reports)
}

/// Pass/fail counts over a set of reports.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateCounts {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

impl CertificateCounts {
    pub fn tally(reports: &[CertificateReport]) -> Self {
        let passed = reports.iter().filter(|r| r.holds).count();
        Self {
            total: reports.len(),
            passed,
            failed: reports.len() - passed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_semantics() {
        assert!(CertificateReport::check("a", None, 1.0, 1.0).holds);
        assert!(CertificateReport::check("a", None, 1.0 + 5e-10, 1.0).holds);
        assert!(!CertificateReport::check("a", None, 1.0 + 2e-9, 1.0).holds);
        assert!(CertificateReport::check("a", None, 5e-13, 0.0).holds);
        assert!(!CertificateReport::check("a", None, f64::NAN, 0.0).holds);
        let r = CertificateReport::check("a", Some(3), 0.25, 1.0);
        assert_eq!(r.margin, 0.75);
    }

    #[test]
    fn json_shape() {
        let r = CertificateReport::check("k_invariant", Some(2), 0.5, 1.0);
        let v: serde_json::Value = serde_json::from_str(&reports_to_json(&[r]).unwrap()).unwrap();
        let obj = v[0].as_object().unwrap();
        let mut keys: Vec<&str> = obj.keys().map(String::as_str).collect();
        keys.sort();
        assert_eq!(keys, ["holds", "lhs", "margin", "name", "rhs", "round"]);
    }
}
