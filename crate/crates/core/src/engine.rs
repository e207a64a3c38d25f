//! The constant-potential learner.
//!
//! Each round plays `p ∝ d_y phi`, charges the centered instantaneous regret,
//! projects the cumulative regret onto the domain and then advances the time
//! variable just far enough that the total potential is back at its previous
//! value. The second moment of the instantaneous regret under
//! `q ∝ d_yy phi` is accumulated in `V`.

use crate::error::{Error, Result};
use crate::potentials::{PotentialKind, PotentialSpec};
use crate::root;

/// Grace added to `B` when validating loss spreads.
pub const SPREAD_GRACE: f64 = 1e-12;

/// How the per-round second moment is accumulated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VtMode {
    #[default]
    Standard,
    /// NormalHedge only: coordinates sitting at the boundary before the step
    /// contribute their projected increment instead of the raw one.
    Sparse,
}

impl VtMode {
    pub fn name(&self) -> &'static str {
        match self {
            VtMode::Standard => "standard",
            VtMode::Sparse => "sparse",
        }
    }
}

/// Termination controls for the time-increment solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Bisection stops once the bracket on `delta_t` is narrower than this
    /// times `min(1, delta_t)`.
    pub width_tol: f64,
    pub max_doublings: usize,
    pub max_bisections: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            width_tol: 1e-12,
            max_doublings: 200,
            max_bisections: 200,
        }
    }
}

/// `log sum_i exp(v_i)` with a max shift. Empty input gives `-inf`.
pub(crate) fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || !m.is_finite() {
        return m;
    }
    m + values.map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into a probability vector; `-inf` entries get 0.
fn softmax(log_weights: &[f64]) -> Vec<f64> {
    let m = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = log_weights.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn log_phis(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Vec<f64> {
    x_tilde
        .iter()
        .map(|&y| spec.log_phi_unchecked(y, t))
        .collect()
}

/// `log Phi(x, t) = log sum_i phi(x_i, t)`.
pub fn log_total_potential(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Result<f64> {
    spec.check_t(t)?;
    let v = log_sum_exp(x_tilde.iter().map(|&y| spec.log_phi_unchecked(y, t)));
    if v.is_nan() || v == f64::INFINITY {
        return Err(Error::Overflow {
            what: "log total potential",
            y: x_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t,
        });
    }
    Ok(v)
}

/// `Phi(x, t) = sum_i phi(x_i, t)`.
pub fn total_potential(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Result<f64> {
    let v = log_total_potential(spec, x_tilde, t)?.exp();
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow {
            what: "total potential",
            y: x_tilde.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            t,
        })
    }
}

fn p_from_log_phis(spec: &PotentialSpec, x_tilde: &[f64], lphi: &[f64], t: f64) -> Vec<f64> {
    match spec.kind() {
        // constant coefficient: softmax of log phi, shared with q
        PotentialKind::Exponential { .. } => softmax(lphi),
        PotentialKind::NormalHedge => {
            let lw: Vec<f64> = x_tilde
                .iter()
                .zip(lphi)
                .map(|(&y, &l)| {
                    if y > 0.0 {
                        (y / t).ln() + l
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            if lw.iter().all(|&l| l == f64::NEG_INFINITY) {
                let n = x_tilde.len() as f64;
                vec![1.0 / n; x_tilde.len()]
            } else {
                softmax(&lw)
            }
        }
    }
}

fn q_from_log_phis(spec: &PotentialSpec, x_tilde: &[f64], lphi: &[f64], t: f64) -> Vec<f64> {
    match spec.kind() {
        PotentialKind::Exponential { .. } => softmax(lphi),
        PotentialKind::NormalHedge => {
            let lw: Vec<f64> = x_tilde
                .iter()
                .zip(lphi)
                .map(|(&y, &l)| (1.0 + y * y / t).ln() + l)
                .collect();
            softmax(&lw)
        }
    }
}

/// Play distribution `p_i ∝ d_y phi(x_i, t)`; uniform when every gradient
/// vanishes.
pub fn weights_p(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Result<Vec<f64>> {
    spec.check_t(t)?;
    let lphi = log_phis(spec, x_tilde, t);
    Ok(p_from_log_phis(spec, x_tilde, &lphi, t))
}

/// Second-moment distribution `q_i ∝ d_yy phi(x_i, t)`.
pub fn weights_q(spec: &PotentialSpec, x_tilde: &[f64], t: f64) -> Result<Vec<f64>> {
    spec.check_t(t)?;
    let lphi = log_phis(spec, x_tilde, t);
    Ok(q_from_log_phis(spec, x_tilde, &lphi, t))
}

/// Checks `max_i l_i - min_i l_i <= B` (plus [`SPREAD_GRACE`]).
pub fn check_spread(loss: &[f64], b: f64) -> Result<()> {
    let mut imax = 0;
    let mut imin = 0;
    for (i, &l) in loss.iter().enumerate() {
        if !l.is_finite() {
            return Err(Error::Domain(format!("loss of expert {i} is not finite: {l}")));
        }
        if l > loss[imax] {
            imax = i;
        }
        if l < loss[imin] {
            imin = i;
        }
    }
    if loss.is_empty() {
        return Ok(());
    }
    let spread = loss[imax] - loss[imin];
    if spread > b + SPREAD_GRACE {
        return Err(Error::Spread {
            round: None,
            i: imax,
            k: imin,
            spread,
            bound: b,
        });
    }
    Ok(())
}

/// Result of charging one loss vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossUpdate {
    pub alg_loss: f64,
    pub delta_x: Vec<f64>,
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
}

/// `delta_x_i = <p, l> - l_i`, computed on losses shifted by `l_0` so that
/// constant rows give exactly zero and only loss differences matter.
pub fn instantaneous_regret(p: &[f64], loss: &[f64]) -> (f64, Vec<f64>) {
    let Some(&anchor) = loss.first() else {
        return (0.0, Vec::new());
    };
    let mean_shift: f64 = p.iter().zip(loss).map(|(&pi, &l)| pi * (l - anchor)).sum();
    let dx = loss.iter().map(|&l| mean_shift - (l - anchor)).collect();
    (anchor + mean_shift, dx)
}

/// Charges `loss` against play `p` at cumulative regret `x`.
pub fn apply_loss(spec: &PotentialSpec, p: &[f64], x: &[f64], loss: &[f64]) -> Result<LossUpdate> {
    if loss.len() != x.len() || p.len() != x.len() {
        return Err(Error::Domain(format!(
            "loss has {} entries, expected {}",
            loss.len(),
            x.len()
        )));
    }
    check_spread(loss, spec.b())?;
    let (alg_loss, delta_x) = instantaneous_regret(p, loss);
    let x: Vec<f64> = x.iter().zip(&delta_x).map(|(a, d)| a + d).collect();
    let x_tilde = spec.domain().project(&x);
    Ok(LossUpdate {
        alg_loss,
        delta_x,
        x,
        x_tilde,
    })
}

/// Smallest `delta_t >= 0` with `Phi(next, t + delta_t) <= Phi(prev, t)`.
///
/// The potential change is evaluated as
/// `log(1 + sum_i w_i expm1(d_i))` with `w = softmax(log phi(prev, t))` and
/// `d_i` the per-coordinate log-potential increment, so tiny increments keep
/// their relative precision. The root is bracketed by doubling or halving
/// from `hint` (or `B^2` without one) and bisected until the bracket is
/// narrower than `width_tol * min(1, hi)`; the passing end is returned.
/// Zero is returned when the inequality already holds at `delta_t = 0`,
/// which includes rounds where projection alone lowered the potential.
pub fn solve_delta_t(
    spec: &PotentialSpec,
    x_tilde_prev: &[f64],
    x_tilde_next: &[f64],
    t: f64,
    opts: &SolverOptions,
    hint: f64,
) -> Result<f64> {
    let lse = log_total_potential(spec, x_tilde_prev, t)?;
    let lw: Vec<f64> = log_phis(spec, x_tilde_prev, t).iter().map(|l| l - lse).collect();
    Ok(solve_from_weights(spec, &lw, x_tilde_prev, x_tilde_next, t, opts, hint)?.0)
}

/// `log Phi(next, t + s) - log Phi(prev, t)` as a function of `s`.
struct PotentialChange<'a> {
    spec: &'a PotentialSpec,
    t: f64,
    lw: &'a [f64],
    w: Vec<f64>,
    coef: Vec<(f64, f64)>,
}

impl<'a> PotentialChange<'a> {
    /// `lw` is `log softmax(log phi(prev, t))`.
    fn new(spec: &'a PotentialSpec, lw: &'a [f64], prev: &[f64], next: &[f64], t: f64) -> Self {
        Self {
            spec,
            t,
            lw,
            w: lw.iter().map(|l| l.exp()).collect(),
            coef: prev
                .iter()
                .zip(next)
                .map(|(&y0, &y1)| spec.increment_coefficients(y0, y1))
                .collect(),
        }
    }

    fn at(&self, s: f64) -> f64 {
        let (alpha, beta, gamma) = self.spec.increment_time_factors(self.t, s);
        let mut acc = 0.0;
        for (&w, &(a, b)) in self.w.iter().zip(&self.coef) {
            let d = a * alpha - b * beta + gamma;
            if d > 0.5 {
                return self.at_large(alpha, beta, gamma);
            }
            acc += w * d.exp_m1();
        }
        acc.ln_1p()
    }

    fn at_large(&self, alpha: f64, beta: f64, gamma: f64) -> f64 {
        log_sum_exp(
            self.lw
                .iter()
                .zip(&self.coef)
                .map(|(&l, &(a, b))| l + a * alpha - b * beta + gamma),
        )
    }
}

/// Returns `(delta_t, change at delta_t = 0)`.
fn solve_from_weights(
    spec: &PotentialSpec,
    lw: &[f64],
    prev: &[f64],
    next: &[f64],
    t: f64,
    opts: &SolverOptions,
    hint: f64,
) -> Result<(f64, f64)> {
    let change = PotentialChange::new(spec, lw, prev, next, t);
    let below = |s: f64| change.at(s) <= 0.0;
    let g0 = change.at(0.0);
    if g0.is_nan() {
        return Err(Error::Solver("potential change is not a number".into()));
    }
    if g0 <= 0.0 {
        return Ok((0.0, g0));
    }
    let start = if hint > 0.0 && hint.is_finite() {
        hint
    } else {
        spec.b() * spec.b()
    };
    let (lo, hi) = if below(start) {
        // walk down until the predicate fails
        let mut hi = start;
        loop {
            let lo = 0.5 * hi;
            if lo == 0.0 {
                return Ok((hi, g0));
            }
            if !below(lo) {
                break (lo, hi);
            }
            hi = lo;
        }
    } else {
        root::expand_upper(below, start, start, opts.max_doublings).ok_or_else(|| {
            Error::Solver(format!(
                "no upper bracket for delta_t after {} doublings from {start}",
                opts.max_doublings
            ))
        })?
    };
    let mut lo = lo;
    let mut hi = hi;
    for _ in 0..opts.max_bisections {
        if hi - lo <= opts.width_tol * hi.min(1.0) {
            break;
        }
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if below(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((hi, g0))
}

/// Per-round second moment `sum_i q_i * d_i^2`.
///
/// In sparse mode `d_i` is the projected increment for coordinates that sat
/// at zero before the step and the raw increment elsewhere.
pub fn vt_increment(
    spec: &PotentialSpec,
    q: &[f64],
    delta_x: &[f64],
    x_tilde_prev: &[f64],
    x_tilde_next: &[f64],
    mode: VtMode,
) -> Result<f64> {
    match mode {
        VtMode::Standard => Ok(q.iter().zip(delta_x).map(|(qi, d)| qi * d * d).sum()),
        VtMode::Sparse => {
            if !spec.is_normalhedge() {
                return Err(Error::Config(
                    "sparse V accumulation requires the normalhedge potential".into(),
                ));
            }
            Ok(q.iter()
                .zip(delta_x)
                .zip(x_tilde_prev.iter().zip(x_tilde_next))
                .map(|((qi, &d), (&prev, &next))| {
                    let d = if prev == 0.0 { next - prev } else { d };
                    qi * d * d
                })
                .sum())
        }
    }
}

/// The `max(1, floor(N * eps))`-th largest coordinate of `x`.
pub fn quantile_regret(x: &[f64], eps: f64) -> f64 {
    assert!(!x.is_empty(), "quantile of an empty regret vector");
    let k = quantile_rank(x.len(), eps);
    let mut v = x.to_vec();
    let (_, kth, _) = v.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    *kth
}

/// Rank used by [`quantile_regret`]. A relative nudge of 1e-12 keeps decimal
/// grids such as `N = 100, eps = 0.29` from flooring one rank too low.
pub fn quantile_rank(n: usize, eps: f64) -> usize {
    let raw = (n as f64 * eps * (1.0 + 1e-12)).floor();
    (raw as usize).clamp(1, n)
}

/// Learner state between rounds.
#[derive(Debug, Clone, PartialEq)]
pub struct EngineState {
    pub round: usize,
    pub x: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub t: f64,
    pub v: f64,
}

impl EngineState {
    pub fn initial(spec: &PotentialSpec, n: usize) -> Self {
        let x = vec![0.0; n];
        let x_tilde = spec.domain().project(&x);
        Self {
            round: 0,
            x,
            x_tilde,
            t: spec.t0(),
            v: 0.0,
        }
    }
}

/// Everything computed during one round.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    /// 1-based round index.
    pub round: usize,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub loss: Vec<f64>,
    pub alg_loss: f64,
    pub delta_x: Vec<f64>,
    pub x: Vec<f64>,
    pub x_tilde_prev: Vec<f64>,
    pub x_tilde: Vec<f64>,
    pub t_prev: f64,
    pub delta_t: f64,
    pub t: f64,
    pub v_increment: f64,
    pub v: f64,
    pub log_phi_before: f64,
    pub log_phi_after: f64,
    /// Projection alone pushed the potential below its previous value, so
    /// `delta_t = 0` and the potential decreased.
    pub projection_drop: bool,
}

impl StepRecord {
    pub fn phi_total_before(&self) -> f64 {
        self.log_phi_before.exp()
    }

    pub fn phi_total_after(&self) -> f64 {
        self.log_phi_after.exp()
    }
}

/// A running CP learner over `n` experts.
#[derive(Debug, Clone)]
pub struct Engine {
    spec: PotentialSpec,
    vt_mode: VtMode,
    solver: SolverOptions,
    state: EngineState,
    last_delta_t: f64,
}

impl Engine {
    pub fn new(spec: PotentialSpec, n: usize, vt_mode: VtMode) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("need at least one expert".into()));
        }
        if vt_mode == VtMode::Sparse && !spec.is_normalhedge() {
            return Err(Error::Config(
                "sparse V accumulation requires the normalhedge potential".into(),
            ));
        }
        Ok(Self {
            spec,
            vt_mode,
            solver: SolverOptions::default(),
            state: EngineState::initial(&spec, n),
            last_delta_t: 0.0,
        })
    }

    pub fn with_solver(mut self, solver: SolverOptions) -> Self {
        self.solver = solver;
        self
    }

    pub fn spec(&self) -> &PotentialSpec {
        &self.spec
    }

    pub fn vt_mode(&self) -> VtMode {
        self.vt_mode
    }

    pub fn state(&self) -> &EngineState {
        &self.state
    }

    pub fn n(&self) -> usize {
        self.state.x.len()
    }

    /// Current play distribution.
    pub fn p(&self) -> Result<Vec<f64>> {
        weights_p(&self.spec, &self.state.x_tilde, self.state.t)
    }

    pub fn log_potential(&self) -> Result<f64> {
        log_total_potential(&self.spec, &self.state.x_tilde, self.state.t)
    }

    /// Plays one round against `loss`.
    pub fn step(&mut self, loss: &[f64]) -> Result<StepRecord> {
        let round = self.state.round + 1;
        self.step_inner(loss).map_err(|e| match e {
            Error::Spread {
                i, k, spread, bound, ..
            } => Error::Spread {
                round: Some(round),
                i,
                k,
                spread,
                bound,
            },
            other => other.at_round(round),
        })
    }

    fn step_inner(&mut self, loss: &[f64]) -> Result<StepRecord> {
        let spec = self.spec;
        let t_prev = self.state.t;
        let x_tilde_prev = self.state.x_tilde.clone();

        let lphi = log_phis(&spec, &x_tilde_prev, t_prev);
        let log_phi_before = log_sum_exp(lphi.iter().copied());
        if !log_phi_before.is_finite() {
            return Err(Error::Overflow {
                what: "log total potential",
                y: x_tilde_prev.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                t: t_prev,
            });
        }
        let p = p_from_log_phis(&spec, &x_tilde_prev, &lphi, t_prev);
        let q = q_from_log_phis(&spec, &x_tilde_prev, &lphi, t_prev);

        let LossUpdate {
            alg_loss,
            delta_x,
            x,
            x_tilde,
        } = apply_loss(&spec, &p, &self.state.x, loss)?;

        let lw: Vec<f64> = lphi.iter().map(|l| l - log_phi_before).collect();
        let (delta_t, change_at_zero) = solve_from_weights(
            &spec,
            &lw,
            &x_tilde_prev,
            &x_tilde,
            t_prev,
            &self.solver,
            self.last_delta_t,
        )?;
        let t = t_prev + delta_t;
        let log_phi_after = log_total_potential(&spec, &x_tilde, t)?;
        let projection_drop = delta_t == 0.0 && change_at_zero < 0.0 && x_tilde != x;

        let v_increment = vt_increment(&spec, &q, &delta_x, &x_tilde_prev, &x_tilde, self.vt_mode)?;
        let v = self.state.v + v_increment;

        if delta_t > 0.0 {
            self.last_delta_t = delta_t;
        }
        self.state = EngineState {
            round: self.state.round + 1,
            x: x.clone(),
            x_tilde: x_tilde.clone(),
            t,
            v,
        };

        Ok(StepRecord {
            round: self.state.round,
            p,
            q,
            loss: loss.to_vec(),
            alg_loss,
            delta_x,
            x,
            x_tilde_prev,
            x_tilde,
            t_prev,
            delta_t,
            t,
            v_increment,
            v,
            log_phi_before,
            log_phi_after,
            projection_drop,
        })
    }
}
