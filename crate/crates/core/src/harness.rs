//! Experiment configuration, runs, Monte Carlo studies and file output.
//!
//! A config is a flat JSON object:
//!
//! ```json
//! {"version": 1, "kind": "normalhedge", "N": 2, "T": 1, "B": 1,
//!  "adversary": "random_walk", "sigma": 0.5, "seed": 1}
//! ```
//!
//! Optional keys: `eta` (required for `exponential`), `t0`, `gap`
//! (`two_phase_leader`), `path` (`csv`), `eps_grid`, `vt_mode`, `audit`,
//! `output`, `repeats` and `max_cells`. Unknown keys are rejected.
//!
//! Each repeat `s` in `seed..seed + repeats` writes `rounds_seed{s}.csv` and
//! `summary_seed{s}.json`, plus `certificates_seed{s}.json` when auditing.
//! Emitted files contain no timing data, so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::adversaries::{self, LossMatrix, SigmaSchedule};
use crate::diagnostics::{
    self, bound_hedge, bound_nh, bound_nh_improved, bound_nh_vt, implicit_regret_bound,
    lower_bound_reference, AuditOptions, BoundMode, CertificateCounts, CertificateReport,
    LowerBoundReference,
};
use crate::engine::{quantile_rank, quantile_regret, Engine, StepRecord, VtMode};
use crate::error::{Error, Result};
use crate::potentials::{PotentialKind, PotentialSpec};

pub const CONFIG_VERSION: u32 = 1;
pub const DEFAULT_EPS_GRID: [f64; 3] = [0.1, 0.25, 0.5];
pub const DEFAULT_MAX_CELLS: u64 = 100_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindName {
    Exponential,
    Normalhedge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum AdversaryName {
    RandomWalk,
    TwoPhaseLeader,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum VtModeName {
    Standard,
    Sparse,
}

/// On-disk form of a config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    version: Option<u32>,
    kind: KindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t0: Option<f64>,
    #[serde(rename = "B")]
    b: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: usize,
    adversary: AdversaryName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    eps_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vt_mode: Option<VtModeName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    audit: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    repeats: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_cells: Option<u64>,
}

/// Where the losses come from.
#[derive(Debug, Clone, PartialEq)]
pub enum AdversarySpec {
    RandomWalk { sigma: f64 },
    TwoPhaseLeader { gap: f64 },
    Csv { path: PathBuf },
}

impl AdversarySpec {
    pub fn name(&self) -> &'static str {
        match self {
            AdversarySpec::RandomWalk { .. } => "random_walk",
            AdversarySpec::TwoPhaseLeader { .. } => "two_phase_leader",
            AdversarySpec::Csv { .. } => "csv",
        }
    }
}

/// A validated experiment with every default resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub spec: PotentialSpec,
    pub n: usize,
    pub t: usize,
    pub adversary: AdversarySpec,
    pub seed: u64,
    pub eps_grid: Vec<f64>,
    pub vt_mode: VtMode,
    pub audit: bool,
    pub output: PathBuf,
    pub repeats: usize,
    pub max_cells: u64,
}

fn schema(path: &str, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        msg: msg.into(),
    }
}

impl ExperimentConfig {
    /// Defaults for everything but the potential, sizes and adversary.
    pub fn new(spec: PotentialSpec, n: usize, t: usize, adversary: AdversarySpec) -> Self {
        Self {
            spec,
            n,
            t,
            adversary,
            seed: 0,
            eps_grid: DEFAULT_EPS_GRID.to_vec(),
            vt_mode: VtMode::Standard,
            audit: false,
            output: PathBuf::from("out"),
            repeats: 1,
            max_cells: DEFAULT_MAX_CELLS,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            schema(&path, e.into_inner().to_string())
        })?;
        Self::from_raw(raw)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        if let Some(v) = raw.version {
            if v != CONFIG_VERSION {
                return Err(schema("version", format!("unsupported version {v}")));
            }
        }
        if raw.n == 0 {
            return Err(schema("N", "must be at least 1"));
        }
        if !(raw.b.is_finite() && raw.b > 0.0) {
            return Err(schema("B", "must be positive"));
        }
        let spec = match raw.kind {
            KindName::Exponential => {
                let eta = raw.eta.ok_or_else(|| schema("eta", "required for exponential"))?;
                PotentialSpec::exponential(eta, raw.b).map_err(|e| schema("eta", e.to_string()))?
            }
            KindName::Normalhedge => {
                if raw.eta.is_some() {
                    return Err(schema("eta", "only meaningful for exponential"));
                }
                PotentialSpec::normalhedge(raw.b, raw.n).map_err(|e| schema("B", e.to_string()))?
            }
        };
        let spec = match raw.t0 {
            Some(t0) => spec.with_t0(t0).map_err(|e| schema("t0", e.to_string()))?,
            None => spec,
        };

        let adversary = match raw.adversary {
            AdversaryName::RandomWalk => {
                let sigma = raw.sigma.ok_or_else(|| schema("sigma", "required for random_walk"))?;
                if !(sigma.is_finite() && sigma >= 0.0 && sigma <= raw.b / 2.0 + 1e-12) {
                    return Err(schema("sigma", format!("must lie in [0, B/2], got {sigma}")));
                }
                AdversarySpec::RandomWalk { sigma }
            }
            AdversaryName::TwoPhaseLeader => {
                let gap = raw.gap.ok_or_else(|| schema("gap", "required for two_phase_leader"))?;
                if !(gap.is_finite() && gap >= 0.0 && gap <= raw.b) {
                    return Err(schema("gap", format!("must lie in [0, B], got {gap}")));
                }
                AdversarySpec::TwoPhaseLeader { gap }
            }
            AdversaryName::Csv => AdversarySpec::Csv {
                path: raw.path.clone().ok_or_else(|| schema("path", "required for csv"))?,
            },
        };
        let stray = [
            ("sigma", raw.sigma.is_some() && raw.adversary != AdversaryName::RandomWalk),
            ("gap", raw.gap.is_some() && raw.adversary != AdversaryName::TwoPhaseLeader),
            ("path", raw.path.is_some() && raw.adversary != AdversaryName::Csv),
        ];
        if let Some((field, _)) = stray.iter().find(|(_, bad)| *bad) {
            return Err(schema(field, "not used by this adversary"));
        }

        let eps_grid = raw.eps_grid.unwrap_or_else(|| DEFAULT_EPS_GRID.to_vec());
        if eps_grid.is_empty() {
            return Err(schema("eps_grid", "must be nonempty"));
        }
        for (i, &e) in eps_grid.iter().enumerate() {
            if !(e > 0.0 && e <= 1.0) {
                return Err(schema(&format!("eps_grid[{i}]"), format!("{e} is outside (0, 1]")));
            }
            if i > 0 && e <= eps_grid[i - 1] {
                return Err(schema(&format!("eps_grid[{i}]"), "grid must be strictly increasing"));
            }
        }

        let vt_mode = match raw.vt_mode.unwrap_or(VtModeName::Standard) {
            VtModeName::Standard => VtMode::Standard,
            VtModeName::Sparse => VtMode::Sparse,
        };
        if vt_mode == VtMode::Sparse && !spec.is_normalhedge() {
            return Err(schema("vt_mode", "sparse requires the normalhedge potential"));
        }
        let repeats = raw.repeats.unwrap_or(1);
        if repeats == 0 {
            return Err(schema("repeats", "must be at least 1"));
        }
        let max_cells = raw.max_cells.unwrap_or(DEFAULT_MAX_CELLS);
        let cells = (raw.n as u128) * (raw.t as u128);
        if cells > max_cells as u128 {
            return Err(schema(
                "max_cells",
                format!("N*T = {cells} exceeds the cap {max_cells}; raise max_cells to allow it"),
            ));
        }

        Ok(Self {
            spec,
            n: raw.n,
            t: raw.t,
            adversary,
            seed: raw.seed.unwrap_or(0),
            eps_grid,
            vt_mode,
            audit: raw.audit.unwrap_or(false),
            output: raw.output.unwrap_or_else(|| PathBuf::from("out")),
            repeats,
            max_cells,
        })
    }

    fn to_raw(&self) -> RawConfig {
        let (sigma, gap, path, adversary) = match &self.adversary {
            AdversarySpec::RandomWalk { sigma } => (Some(*sigma), None, None, AdversaryName::RandomWalk),
            AdversarySpec::TwoPhaseLeader { gap } => (None, Some(*gap), None, AdversaryName::TwoPhaseLeader),
            AdversarySpec::Csv { path } => (None, None, Some(path.clone()), AdversaryName::Csv),
        };
        RawConfig {
            version: Some(CONFIG_VERSION),
            kind: match self.spec.kind() {
                PotentialKind::Exponential { .. } => KindName::Exponential,
                PotentialKind::NormalHedge => KindName::Normalhedge,
            },
            eta: self.spec.eta(),
            t0: Some(self.spec.t0()),
            b: self.spec.b(),
            n: self.n,
            t: self.t,
            adversary,
            sigma,
            gap,
            path,
            seed: Some(self.seed),
            eps_grid: Some(self.eps_grid.clone()),
            vt_mode: Some(match self.vt_mode {
                VtMode::Standard => VtModeName::Standard,
                VtMode::Sparse => VtModeName::Sparse,
            }),
            audit: Some(self.audit),
            output: Some(self.output.clone()),
            repeats: Some(self.repeats),
            max_cells: Some(self.max_cells),
        }
    }

    /// Every field written out explicitly, so loading it back is the identity.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("config serializes")
    }

    pub fn seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.repeats as u64).map(move |r| self.seed.wrapping_add(r))
    }

    /// Builds the loss matrix for one seed.
    pub fn losses(&self, seed: u64) -> Result<LossMatrix> {
        let b = self.spec.b();
        let m = match &self.adversary {
            AdversarySpec::RandomWalk { sigma } => {
                let schedule = SigmaSchedule::constant(*sigma, self.t, b)?;
                adversaries::random_walk(&schedule, self.n, seed)?
            }
            AdversarySpec::TwoPhaseLeader { gap } => {
                adversaries::two_phase_leader(self.n, self.t, *gap, b, seed)?
            }
            AdversarySpec::Csv { path } => {
                let m = adversaries::load_csv(path)?;
                if m.n() != self.n || m.t() != self.t {
                    return Err(Error::Config(format!(
                        "{} holds a {}x{} matrix but the config says T={}, N={}",
                        path.display(),
                        m.t(),
                        m.n(),
                        self.t,
                        self.n
                    )));
                }
                m.validate(b)?;
                m
            }
        };
        Ok(m)
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ExperimentConfig::from_json(&text)
}

pub fn emit_config(config: &ExperimentConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, config.to_json() + "\n").map_err(|e| Error::io(path, e))
}

/// Regret and bounds at one quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsSummary {
    pub eps: f64,
    pub rank: usize,
    pub regret: f64,
    /// Generic bound from the final time, solved numerically.
    pub implicit_bound: f64,
    /// Closed form of the same bound in terms of the final time.
    pub time_bound: f64,
    /// Bound in terms of `V_T`.
    pub variance_bound: f64,
    /// Sharper-constant `V_T` bound; NormalHedge only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub improved_bound: Option<f64>,
}

/// Everything written to `summary_seed{s}.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub t0: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t_rounds: usize,
    pub adversary: String,
    pub seed: u64,
    pub vt_mode: String,
    /// NormalHedge started at or above its default `t0`.
    pub t0_compliant: bool,
    pub final_t: f64,
    #[serde(rename = "V_T")]
    pub v_t: f64,
    pub final_x: Vec<f64>,
    pub regret: Vec<EpsSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificates: Option<CertificateCounts>,
}

/// Result of one seeded run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub seed: u64,
    pub rounds_csv: Option<PathBuf>,
    pub summary_json: Option<PathBuf>,
    pub summary: RunSummary,
    /// Empty unless the config asked for an audit.
    pub certificates: Vec<CertificateReport>,
    pub duration: Duration,
}

impl RunReport {
    pub fn certificates_hold(&self) -> bool {
        self.certificates.iter().all(|r| r.holds)
    }
}

/// Drives the learner over every row of `losses`.
pub fn play(spec: PotentialSpec, vt_mode: VtMode, losses: &LossMatrix) -> Result<Vec<StepRecord>> {
    let mut engine = Engine::new(spec, losses.n(), vt_mode)?;
    losses.rows().map(|row| engine.step(row)).collect()
}

fn eps_summaries(
    spec: &PotentialSpec,
    n: usize,
    x: &[f64],
    t: f64,
    v: f64,
    eps_grid: &[f64],
) -> Result<Vec<EpsSummary>> {
    let t0 = spec.t0();
    eps_grid
        .iter()
        .map(|&eps| {
            let (time_bound, variance_bound, improved_bound) = match spec.kind() {
                PotentialKind::Exponential { eta } => (
                    bound_hedge(eta, t - t0, eps, spec.b(), BoundMode::Time)?,
                    bound_hedge(eta, v, eps, spec.b(), BoundMode::Variance)?,
                    None,
                ),
                PotentialKind::NormalHedge => (
                    bound_nh(t, t0, eps)?,
                    bound_nh_vt(v, t0, eps)?,
                    Some(bound_nh_improved(v, t0, eps, spec.b(), n)?),
                ),
            };
            Ok(EpsSummary {
                eps,
                rank: quantile_rank(n, eps),
                regret: quantile_regret(x, eps),
                implicit_bound: implicit_regret_bound(spec, n, t, eps)?,
                time_bound,
                variance_bound,
                improved_bound,
            })
        })
        .collect()
}

/// Runs one seed entirely in memory.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
) -> Result<(Vec<StepRecord>, RunSummary, Vec<CertificateReport>)> {
    let losses = config.losses(seed)?;
    let records = play(config.spec, config.vt_mode, &losses)?;
    let spec = &config.spec;
    let (x, t, v) = match records.last() {
        Some(r) => (r.x.clone(), r.t, r.v),
        None => (vec![0.0; config.n], spec.t0(), 0.0),
    };
    let certificates = if config.audit {
        let opts = AuditOptions {
            eps_grid: config.eps_grid.clone(),
            ..AuditOptions::default()
        };
        diagnostics::trajectory_audit(&records, spec, &opts)
    } else {
        Vec::new()
    };
    let summary = RunSummary {
        kind: spec.kind().name().into(),
        eta: spec.eta(),
        t0: spec.t0(),
        b: spec.b(),
        n: config.n,
        t_rounds: config.t,
        adversary: config.adversary.name().into(),
        seed,
        vt_mode: config.vt_mode.name().into(),
        t0_compliant: diagnostics::audit::t0_is_compliant(spec, config.n),
        final_t: t,
        v_t: v,
        regret: eps_summaries(spec, config.n, &x, t, v, &config.eps_grid)?,
        final_x: x,
        certificates: config.audit.then(|| CertificateCounts::tally(&certificates)),
    };
    Ok((records, summary, certificates))
}

/// Runs every repeat, writing per-seed files under `config.output`.
pub fn run(config: &ExperimentConfig) -> Result<Vec<RunReport>> {
    run_with(config, true)
}

/// [`run`] with file output optional; `write = false` keeps everything in memory.
pub fn run_with(config: &ExperimentConfig, write: bool) -> Result<Vec<RunReport>> {
    if write {
        fs::create_dir_all(&config.output).map_err(|e| Error::io(&config.output, e))?;
    }
    config
        .seeds()
        .map(|seed| {
            let start = Instant::now();
            let (records, summary, certificates) = run_seed(config, seed)?;
            let (mut rounds_csv, mut summary_json) = (None, None);
            if write {
                let rounds = config.output.join(format!("rounds_seed{seed}.csv"));
                emit_round_csv(&records, &config.eps_grid, &rounds)?;
                let sj = config.output.join(format!("summary_seed{seed}.json"));
                emit_summary_json(&summary, &sj)?;
                if config.audit {
                    let cj = config.output.join(format!("certificates_seed{seed}.json"));
                    let text = diagnostics::reports_to_json(&certificates)?;
                    fs::write(&cj, text + "\n").map_err(|e| Error::io(&cj, e))?;
                }
                rounds_csv = Some(rounds);
                summary_json = Some(sj);
            }
            Ok(RunReport {
                seed,
                rounds_csv,
                summary_json,
                summary,
                certificates,
                duration: start.elapsed(),
            })
        })
        .collect()
}

/// Header of the per-round CSV for a quantile grid.
pub fn round_csv_header(eps_grid: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["round", "t", "delta_t", "v_increment", "V", "log_phi_total", "alg_loss"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.extend(eps_grid.iter().map(|e| format!("regret_eps_{e}")));
    h
}

/// Writes one row per record; floats use the shortest round-trip form.
pub fn emit_round_csv(records: &[StepRecord], eps_grid: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(round_csv_header(eps_grid))?;
    for r in records {
        let mut row = vec![
            r.round.to_string(),
            r.t.to_string(),
            r.delta_t.to_string(),
            r.v_increment.to_string(),
            r.v.to_string(),
            r.log_phi_after.to_string(),
            r.alg_loss.to_string(),
        ];
        row.extend(eps_grid.iter().map(|&e| quantile_regret(&r.x, e).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn emit_summary_json(summary: &RunSummary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(summary)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// One seed of the lower-bound study at one quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundSeedRow {
    pub seed: u64,
    pub eps: f64,
    pub regret: f64,
    /// `regret / sqrt(sum sigma^2)`.
    pub ratio: f64,
    pub upper_bound: f64,
    pub upper_bound_ratio: f64,
    /// The rank-`floor(N eps)` largest of the negated walk sums.
    pub walk_quantile: f64,
}

/// Aggregate of the study at one quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundRow {
    pub eps: f64,
    pub rank: usize,
    pub mean_regret: f64,
    pub mean_ratio: f64,
    pub fraction_positive: f64,
    pub mean_upper_bound_ratio: f64,
    pub upper_bound_violations: usize,
    pub mean_walk_quantile: f64,
    pub reference: LowerBoundReference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundTable {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub sigma_sq_sum: f64,
    pub repeats: usize,
    pub seed: u64,
    pub rows: Vec<LowerBoundRow>,
    pub per_seed: Vec<LowerBoundSeedRow>,
}

/// Random-walk Monte Carlo against CP-NormalHedge with the default `t0`.
///
/// Seeds `seed..seed + repeats`. Alongside the learner's quantile regret the
/// study records the algorithm-free order statistic of the walk sums, which
/// is what the random-walk lower bound controls.
pub fn lowerbound_study(
    eps_grid: &[f64],
    n: usize,
    schedule: &SigmaSchedule,
    repeats: usize,
    seed: u64,
) -> Result<LowerBoundTable> {
    if n == 0 || repeats == 0 {
        return Err(Error::Config("need N >= 1 and repeats >= 1".into()));
    }
    for &e in eps_grid {
        if !(e > 0.0 && e <= 1.0) {
            return Err(Error::Config(format!("eps {e} is outside (0, 1]")));
        }
    }
    let spec = PotentialSpec::normalhedge(schedule.b(), n)?;
    let s2 = schedule.sigma_sq_sum();
    let scale = s2.sqrt();
    let ratio = |v: f64| if scale > 0.0 { v / scale } else { 0.0 };

    let mut per_seed = Vec::with_capacity(repeats * eps_grid.len());
    for r in 0..repeats as u64 {
        let s = seed.wrapping_add(r);
        let losses = adversaries::random_walk(schedule, n, s)?;
        let mut engine = Engine::new(spec, n, VtMode::Standard)?;
        for row in losses.rows() {
            engine.step(row)?;
        }
        let state = engine.state();
        let neg_sums: Vec<f64> = losses.column_sums().into_iter().map(|v| -v).collect();
        for &eps in eps_grid {
            let regret = quantile_regret(&state.x, eps);
            let upper = bound_nh_vt(state.v, spec.t0(), eps)?;
            per_seed.push(LowerBoundSeedRow {
                seed: s,
                eps,
                regret,
                ratio: ratio(regret),
                upper_bound: upper,
                upper_bound_ratio: ratio(upper),
                walk_quantile: quantile_regret(&neg_sums, eps),
            });
        }
    }

    let k = repeats as f64;
    let rows = eps_grid
        .iter()
        .map(|&eps| {
            let mine: Vec<&LowerBoundSeedRow> = per_seed.iter().filter(|r| r.eps == eps).collect();
            let mean = |f: fn(&LowerBoundSeedRow) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / k;
            LowerBoundRow {
                eps,
                rank: quantile_rank(n, eps),
                mean_regret: mean(|r| r.regret),
                mean_ratio: mean(|r| r.ratio),
                fraction_positive: mine.iter().filter(|r| r.regret > 0.0).count() as f64 / k,
                mean_upper_bound_ratio: mean(|r| r.upper_bound_ratio),
                upper_bound_violations: mine.iter().filter(|r| r.regret > r.upper_bound).count(),
                mean_walk_quantile: mean(|r| r.walk_quantile),
                reference: lower_bound_reference(eps, s2),
            }
        })
        .collect();

    Ok(LowerBoundTable {
        n,
        t: schedule.len(),
        sigma_sq_sum: s2,
        repeats,
        seed,
        rows,
        per_seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    const MINIMAL: &str = r#"{"kind": "normalhedge", "N": 2, "T": 1, "adversary": "random_walk",
        "sigma": 0.5, "B": 1, "seed": 1}"#;

    #[test]
    fn minimal_config_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.spec.t0(), (512.0 * E * E * 2f64.ln()).max(1.0));
        assert_eq!(c.eps_grid, vec![0.1, 0.25, 0.5]);
        assert_eq!(c.vt_mode, VtMode::Standard);
        assert_eq!(c.seed, 1);
        assert_eq!(c.repeats, 1);
        assert!(!c.audit);
    }

    #[test]
    fn config_round_trip() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.eps_grid = vec![0.05, 0.3];
        c.audit = true;
        c.vt_mode = VtMode::Sparse;
        assert_eq!(ExperimentConfig::from_json(&c.to_json()).unwrap(), c);
        let e = ExperimentConfig::new(
            PotentialSpec::exponential(0.2, 1.0).unwrap().with_t0(3.0).unwrap(),
            4,
            9,
            AdversarySpec::TwoPhaseLeader { gap: 0.5 },
        );
        assert_eq!(ExperimentConfig::from_json(&e.to_json()).unwrap(), e);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let bad = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"colour\": 3");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Schema { .. })));
        let bad = MINIMAL.replace("\"N\": 2", "\"N\": \"two\"");
        match ExperimentConfig::from_json(&bad).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "N"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"eps_grid\": [0.5, 0.1]");
        match ExperimentConfig::from_json(&bad).unwrap_err() {
            Error::Schema { path, .. } => assert_eq!(path, "eps_grid[1]"),
            e => panic!("{e}"),
        }
        let bad = MINIMAL.replace("\"normalhedge\"", "\"exponential\"");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Schema { .. })));
        let bad = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"max_cells\": 1");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Schema { .. })));
        let bad = MINIMAL.replace("\"seed\": 1", "\"seed\": 1, \"version\": 2");
        assert!(matches!(ExperimentConfig::from_json(&bad), Err(Error::Schema { .. })));
    }

    #[test]
    fn zero_rounds() {
        let mut c = ExperimentConfig::from_json(MINIMAL).unwrap();
        c.t = 0;
        let (records, s, _) = run_seed(&c, 1).unwrap();
        assert!(records.is_empty());
        assert_eq!(s.final_t, c.spec.t0());
        assert_eq!(s.v_t, 0.0);
        assert!(s.regret.iter().all(|e| e.regret == 0.0));
    }

    #[test]
    fn study_with_silent_walk() {
        let schedule = SigmaSchedule::constant(0.0, 20, 1.0).unwrap();
        let table = lowerbound_study(&[0.1, 0.5], 10, &schedule, 3, 4).unwrap();
        for row in &table.rows {
            assert_eq!(row.mean_regret, 0.0);
            assert_eq!(row.mean_ratio, 0.0);
            assert_eq!(row.mean_walk_quantile, 0.0);
            assert_eq!(row.reference.value, 0.0);
        }
    }
}
