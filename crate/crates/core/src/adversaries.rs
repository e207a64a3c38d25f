//! Oblivious loss sequences.
//!
//! All generators are pure functions of their parameters and seed, and every
//! row they produce satisfies the spread constraint `max_i l_i - min_i l_i <= B`.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::engine::{check_spread, SPREAD_GRACE};
use crate::error::{Error, Result};
use crate::rng;

/// Where a loss matrix came from.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorMeta {
    pub name: String,
    pub seed: Option<u64>,
    pub params: Vec<(String, f64)>,
}

impl GeneratorMeta {
    fn new(name: &str, seed: Option<u64>, params: &[(&str, f64)]) -> Self {
        Self {
            name: name.to_string(),
            seed,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}

/// `T` rounds of losses for `N` experts, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    n: usize,
    losses: Vec<f64>,
    b: f64,
    meta: GeneratorMeta,
}

impl LossMatrix {
    /// Builds a matrix and checks every row against the spread bound `b`.
    pub fn new(n: usize, losses: Vec<f64>, b: f64, meta: GeneratorMeta) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config("loss matrix needs at least one expert".into()));
        }
        if losses.len() % n != 0 {
            return Err(Error::Config(format!(
                "{} losses do not fill rows of {n}",
                losses.len()
            )));
        }
        let m = Self { n, losses, b, meta };
        m.validate(b)?;
        Ok(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.losses.len() / self.n
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn meta(&self) -> &GeneratorMeta {
        &self.meta
    }

    /// Round `j` (0-based).
    pub fn row(&self, j: usize) -> &[f64] {
        &self.losses[j * self.n..(j + 1) * self.n]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.losses.chunks_exact(self.n)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.losses
    }

    /// Largest row spread actually present.
    pub fn realized_spread(&self) -> f64 {
        self.rows()
            .map(|r| {
                let (lo, hi) = r
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                        (lo.min(v), hi.max(v))
                    });
                hi - lo
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, b: f64) -> Result<()> {
        for (j, row) in self.rows().enumerate() {
            check_spread(row, b).map_err(|e| match e {
                Error::Spread {
                    i, k, spread, bound, ..
                } => Error::Spread {
                    round: Some(j + 1),
                    i,
                    k,
                    spread,
                    bound,
                },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Cumulative loss of each expert.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for row in self.rows() {
            for (acc, &l) in s.iter_mut().zip(row) {
                *acc += l;
            }
        }
        s
    }

    /// Writes the CSV loss format: header `expert_1,...,expert_N`, then one
    /// row per round in shortest round-trip decimal notation.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_csv_string()).map_err(|e| Error::io(path, e))
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        let header: Vec<String> = (1..=self.n).map(|i| format!("expert_{i}")).collect();
        out.push_str(&header.join(","));
        out.push('\n');
        for row in self.rows() {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{v}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Per-round amplitudes `sigma_j <= B/2` for the random-walk adversary.
#[derive(Debug, Clone, PartialEq)]
pub struct SigmaSchedule {
    sigmas: Vec<f64>,
    b: f64,
}

impl SigmaSchedule {
    pub fn new(sigmas: Vec<f64>, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::Config(format!("schedule bound B must be positive, got {b}")));
        }
        for (j, &s) in sigmas.iter().enumerate() {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::Config(format!("sigma_{} = {s} is not a nonnegative number", j + 1)));
            }
            if s > b / 2.0 + SPREAD_GRACE {
                return Err(Error::Config(format!(
                    "sigma_{} = {s} exceeds B/2 = {}",
                    j + 1,
                    b / 2.0
                )));
            }
        }
        Ok(Self { sigmas, b })
    }

    pub fn constant(sigma: f64, t: usize, b: f64) -> Result<Self> {
        Self::new(vec![sigma; t], b)
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn len(&self) -> usize {
        self.sigmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigmas.is_empty()
    }

    pub fn sigma_sq_sum(&self) -> f64 {
        self.sigmas.iter().map(|s| s * s).sum()
    }

    /// `Q = 1/2 sqrt(sum_j sigma_j^2)`.
    pub fn q(&self) -> f64 {
        0.5 * self.sigma_sq_sum().sqrt()
    }
}

/// Independent `±sigma_j` losses; see [`crate::rng`] for the exact stream.
pub fn random_walk(schedule: &SigmaSchedule, n: usize, seed: u64) -> Result<LossMatrix> {
    let mut r = rng::seeded(seed);
    let mut losses = Vec::with_capacity(schedule.len() * n);
    for &s in schedule.sigmas() {
        for _ in 0..n {
            losses.push(if rng::coin(&mut r) { s } else { -s });
        }
    }
    let sigma = if schedule.is_empty() {
        0.0
    } else {
        schedule.sigmas()[0]
    };
    let meta = GeneratorMeta::new(
        "random_walk",
        Some(seed),
        &[("sigma_1", sigma), ("T", schedule.len() as f64)],
    );
    LossMatrix::new(n, losses, schedule.b(), meta)
}

/// Inserts constant rows so that output rows (1-based) listed in
/// `positions` are vacuous and the base rows keep their order.
pub fn inject_vacuous(base: &LossMatrix, positions: &BTreeSet<usize>, value: f64) -> Result<LossMatrix> {
    let total = base.t() + positions.len();
    if let Some(&p) = positions.iter().find(|&&p| p == 0 || p > total) {
        return Err(Error::Config(format!(
            "vacuous position {p} outside 1..={total}"
        )));
    }
    let n = base.n();
    let mut losses = Vec::with_capacity(total * n);
    let mut src = base.rows();
    for r in 1..=total {
        if positions.contains(&r) {
            losses.extend(std::iter::repeat_n(value, n));
        } else {
            losses.extend_from_slice(src.next().expect("row count matches"));
        }
    }
    let mut meta = base.meta().clone();
    meta.params.push(("vacuous_rows".into(), positions.len() as f64));
    LossMatrix::new(n, losses, base.b(), meta)
}

/// Parses the CSV loss format. The header row is optional; the recorded
/// bound is the realized spread.
pub fn load_csv(path: impl AsRef<Path>) -> Result<LossMatrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut m = parse_csv(&text)?;
    m.meta.params.push(("realized_B".into(), m.b));
    m.meta.name = format!("csv:{}", path.display());
    Ok(m)
}

pub fn parse_csv(text: &str) -> Result<LossMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut n: Option<usize> = None;
    let mut losses = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let row = idx + 1;
        let rec = rec?;
        if rec.iter().all(|c| c.is_empty()) {
            continue;
        }
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if idx == 0 && parsed.iter().all(|p| p.is_err()) {
            n = Some(rec.len());
            continue;
        }
        match n {
            None => n = Some(rec.len()),
            Some(expected) if expected != rec.len() => {
                return Err(Error::Parse {
                    row,
                    col: rec.len().min(expected) + 1,
                    msg: format!("expected {expected} columns, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for (col, (cell, p)) in rec.iter().zip(parsed).enumerate() {
            match p {
                Ok(v) if v.is_finite() => losses.push(v),
                _ => {
                    return Err(Error::Parse {
                        row,
                        col: col + 1,
                        msg: format!("not a finite number: {cell:?}"),
                    })
                }
            }
        }
    }
    let n = n.unwrap_or(0);
    if losses.is_empty() {
        return Err(Error::Parse {
            row: 1,
            col: 1,
            msg: "no loss rows".into(),
        });
    }
    let mut m = LossMatrix {
        n,
        losses,
        b: 0.0,
        meta: GeneratorMeta::new("csv", None, &[]),
    };
    m.b = m.realized_spread();
    Ok(m)
}

/// Drift scenario: one expert leads by `gap` per round in the first half,
/// a different one in the second half. Leaders get loss 0, everyone else
/// `gap`. The seed picks the two leaders.
pub fn two_phase_leader(n: usize, t: usize, gap: f64, b: f64, seed: u64) -> Result<LossMatrix> {
    if n == 0 {
        return Err(Error::Config("need at least one expert".into()));
    }
    if !(gap.is_finite() && gap >= 0.0) || gap > b {
        return Err(Error::Config(format!("gap {gap} must lie in [0, B = {b}]")));
    }
    let mut r = rng::seeded(seed);
    let first = (rand::Rng::random_range(&mut r, 0..n as u64)) as usize;
    let second = if n == 1 {
        0
    } else {
        let k = rand::Rng::random_range(&mut r, 0..(n - 1) as u64) as usize;
        if k >= first {
            k + 1
        } else {
            k
        }
    };
    let half = t / 2;
    let mut losses = Vec::with_capacity(n * t);
    for j in 0..t {
        let leader = if j < half { first } else { second };
        for i in 0..n {
            losses.push(if i == leader || n == 1 { 0.0 } else { gap });
        }
    }
    let meta = GeneratorMeta::new(
        "two_phase_leader",
        Some(seed),
        &[("gap", gap), ("leader_1", first as f64), ("leader_2", second as f64)],
    );
    LossMatrix::new(n, losses, b, meta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_sigma_gives_zero_matrix() {
        let s = SigmaSchedule::constant(0.0, 5, 1.0).unwrap();
        let m = random_walk(&s, 3, 9).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn entries_are_plus_minus_sigma() {
        let s = SigmaSchedule::new(vec![0.1, 0.5, 0.25, 0.0], 1.0).unwrap();
        let m = random_walk(&s, 7, 3).unwrap();
        for (j, row) in m.rows().enumerate() {
            let sj = s.sigmas()[j];
            assert!(row.iter().all(|&v| v == sj || v == -sj));
        }
        assert!(m.realized_spread() <= 1.0);
    }

    #[test]
    fn seeded_generation_is_reproducible() {
        let s = SigmaSchedule::constant(0.5, 3, 1.0).unwrap();
        let a = random_walk(&s, 2, 42).unwrap();
        let b = random_walk(&s, 2, 42).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
        let c = random_walk(&s, 2, 43).unwrap();
        assert_eq!(c.t(), 3);
    }

    #[test]
    fn schedule_rejects_large_sigma() {
        assert!(SigmaSchedule::constant(0.6, 3, 1.0).is_err());
        assert!(SigmaSchedule::constant(-0.1, 3, 1.0).is_err());
        assert!(SigmaSchedule::constant(0.5, 3, 1.0).is_ok());
    }

    #[test]
    fn inject_vacuous_rows() {
        let s = SigmaSchedule::constant(0.5, 4, 1.0).unwrap();
        let base = random_walk(&s, 3, 1).unwrap();
        let same = inject_vacuous(&base, &BTreeSet::new(), 0.0).unwrap();
        assert_eq!(same.as_slice(), base.as_slice());

        let pos: BTreeSet<usize> = [1, 3, 4, 8, 9].into_iter().collect();
        let m = inject_vacuous(&base, &pos, 0.2).unwrap();
        assert_eq!(m.t(), 9);
        let kept: Vec<&[f64]> = (1..=9).filter(|r| !pos.contains(r)).map(|r| m.row(r - 1)).collect();
        let orig: Vec<&[f64]> = base.rows().collect();
        assert_eq!(kept, orig);
        for r in &pos {
            assert_eq!(m.row(r - 1), &[0.2, 0.2, 0.2]);
        }
        let bad: BTreeSet<usize> = [11].into_iter().collect();
        assert!(inject_vacuous(&base, &bad, 0.0).is_err());
    }

    #[test]
    fn csv_examples() {
        let m = parse_csv("0\n").unwrap();
        assert_eq!((m.t(), m.n(), m.b()), (1, 1, 0.0));
        let m = parse_csv("1,0\n0,1\n").unwrap();
        assert_eq!(m.b(), 1.0);
        let m = parse_csv("expert_1,expert_2\n1,0\n0,1\n").unwrap();
        assert_eq!((m.t(), m.n()), (2, 2));
    }

    #[test]
    fn csv_errors_carry_location() {
        match parse_csv("1,0\n0\n").unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            e => panic!("{e}"),
        }
        match parse_csv("1,0\n0,abc\n").unwrap_err() {
            Error::Parse { row, col, .. } => assert_eq!((row, col), (2, 2)),
            e => panic!("{e}"),
        }
        assert!(matches!(parse_csv(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_csv("a,b\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let s = SigmaSchedule::new(vec![0.1, 1.0 / 3.0, 0.123456789012345], 1.0).unwrap();
        let m = random_walk(&s, 4, 5).unwrap();
        let back = parse_csv(&m.to_csv_string()).unwrap();
        assert_eq!(back.as_slice(), m.as_slice());
    }

    #[test]
    fn two_phase_examples() {
        let m = two_phase_leader(4, 6, 0.0, 1.0, 1).unwrap();
        assert_eq!(m.realized_spread(), 0.0);

        let m = two_phase_leader(2, 4, 1.0, 1.0, 7).unwrap();
        let first = m.row(0).to_vec();
        let second = m.row(3).to_vec();
        assert!(first == vec![0.0, 1.0] || first == vec![1.0, 0.0]);
        assert_eq!(second, vec![first[1], first[0]]);
        assert_eq!(m.row(1), &first[..]);
        assert_eq!(m.row(2), &second[..]);

        let (n, t, gap) = (5, 10, 0.4);
        let m = two_phase_leader(n, t, gap, 1.0, 3).unwrap();
        let sums = m.column_sums();
        let best = sums.iter().copied().fold(f64::INFINITY, f64::min);
        let mid_field = sums.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!((mid_field - best - t as f64 * gap / 2.0).abs() < 1e-12);

        assert!(two_phase_leader(2, 4, 1.5, 1.0, 0).is_err());
    }

    #[test]
    fn column_means_concentrate() {
        let t = 400;
        let s = SigmaSchedule::constant(0.5, t, 1.0).unwrap();
        let bound = 4.0 * s.sigma_sq_sum().sqrt() / t as f64;
        for seed in 0..10 {
            let m = random_walk(&s, 8, seed).unwrap();
            for sum in m.column_sums() {
                assert!((sum / t as f64).abs() <= bound, "seed {seed}");
            }
        }
    }
}
