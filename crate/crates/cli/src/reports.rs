//! External artifact schema: the JSON reports every command prints (and the
//! `check` command re-parses), plus the fixed-format CSV writers.
//!
//! Reports deserialize with `deny_unknown_fields`, so the shapes are mutually
//! exclusive and a report file identifies its own kind. CSV floats are
//! printed as `{:.16e}` (17 significant digits) and JSON goes through
//! `serde_json` with fixed field order, so identical inputs produce
//! byte-identical artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rglab_core::adversarial::Certificate;
use rglab_core::evolution::{DiagnosticRow, Trajectory};
use rglab_core::stationary::{BoundaryEstimate, S0Result};
use rglab_core::{Normalizability, S0Classification};

/// `stationary`: the normalized candidate in summary form.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StationaryReport {
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "S0")]
    pub s0: S0Summary,
    pub boundary_limit: BoundaryEstimate,
    pub normalizable: Normalizability,
}

/// Reset-weight summary embedded in [`StationaryReport`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct S0Summary {
    pub partial: f64,
    #[serde(rename = "N")]
    pub n: usize,
    pub classification: S0Classification,
    pub bracket: (f64, f64),
}

/// `transient`: stationary points of the watched deviation.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransientReport {
    pub n: usize,
    /// Distinct positive stationary times, ascending.
    pub points: Vec<f64>,
    /// Total count with multiplicity.
    pub count: usize,
}

/// `adversarial`: the constructed initial condition's certificate.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialReport {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: f64,
    pub points: Vec<f64>,
    pub epsilon: f64,
    pub checks: ChecksReport,
}

/// Serialized form of the verification certificate.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksReport {
    pub probability_ok: bool,
    pub deltas_consistent: bool,
    pub root_count_ok: bool,
    pub points_match: bool,
    pub latest_exceeds_m: bool,
    pub sign_changes_ok: bool,
    pub monotone_after_last: bool,
    pub degenerate: bool,
    pub pass: bool,
    pub failures: Vec<String>,
}

impl From<&Certificate> for ChecksReport {
    fn from(c: &Certificate) -> Self {
        Self {
            probability_ok: c.probability_ok,
            deltas_consistent: c.deltas_consistent,
            root_count_ok: c.root_count_ok,
            points_match: c.points_match,
            latest_exceeds_m: c.latest_exceeds_m,
            sign_changes_ok: c.sign_changes_ok,
            monotone_after_last: c.monotone_after_last,
            degenerate: c.degenerate,
            pass: c.pass(),
            failures: c.failures.clone(),
        }
    }
}

/// `evolve`: end-of-run summary (the trajectories themselves go to CSV).
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolveReport {
    pub states: usize,
    pub t_end: f64,
    pub final_mass: f64,
    pub final_leak: f64,
    /// Largest gap between the differenced mass and the variant's exact
    /// mass-balance expression, over interior trajectory points.
    pub max_identity_residual: f64,
}

/// `check`: one row per invariant.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckReport {
    pub pass: bool,
    pub checks: Vec<CheckRow>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRow {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Any report this binary can emit; `check --report` proves round-trips.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnyReport {
    Stationary,
    S0,
    Transient,
    Adversarial,
    Evolve,
    Check,
}

impl AnyReport {
    /// Identifies a report file by fully deserializing it against each
    /// schema in turn; the `deny_unknown_fields` markers make at most one
    /// of them fit. The parsed value itself is discarded — a successful
    /// round-trip is the point.
    pub fn parse(text: &str) -> Result<Self, String> {
        if serde_json::from_str::<StationaryReport>(text).is_ok() {
            return Ok(Self::Stationary);
        }
        if serde_json::from_str::<S0Result>(text).is_ok() {
            return Ok(Self::S0);
        }
        if serde_json::from_str::<TransientReport>(text).is_ok() {
            return Ok(Self::Transient);
        }
        if serde_json::from_str::<AdversarialReport>(text).is_ok() {
            return Ok(Self::Adversarial);
        }
        if serde_json::from_str::<EvolveReport>(text).is_ok() {
            return Ok(Self::Evolve);
        }
        if serde_json::from_str::<CheckReport>(text).is_ok() {
            return Ok(Self::Check);
        }
        Err("file does not match any report schema".into())
    }

    pub fn kind(self) -> &'static str {
        match self {
            Self::Stationary => "stationary",
            Self::S0 => "s0",
            Self::Transient => "transient",
            Self::Adversarial => "adversarial",
            Self::Evolve => "evolve",
            Self::Check => "check",
        }
    }
}

/// 17-significant-digit scientific notation: the fixed CSV float format.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_file(path: &Path, content: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, content)
}

/// `n,Q` — one row per retained state.
pub fn write_q_csv(path: &Path, values: &[f64]) -> io::Result<()> {
    let mut out = String::from("n,Q\n");
    for (n, v) in values.iter().enumerate() {
        let _ = writeln!(out, "{n},{}", fmt_f64(*v));
    }
    write_file(path, &out)
}

/// `k,P0` — the constructed initial distribution.
pub fn write_initial_csv(path: &Path, p: &[f64]) -> io::Result<()> {
    let mut out = String::from("k,P0\n");
    for (k, v) in p.iter().enumerate() {
        let _ = writeln!(out, "{k},{}", fmt_f64(*v));
    }
    write_file(path, &out)
}

/// `t,Delta_0,…,Delta_n` — closed-form deviation trajectories.
pub fn write_delta_csv(path: &Path, times: &[f64], rows: &[Vec<f64>]) -> io::Result<()> {
    let n = rows.first().map_or(0, |r| r.len());
    let mut out = String::from("t");
    for k in 0..n {
        let _ = write!(out, ",Delta_{k}");
    }
    out.push('\n');
    for (t, row) in times.iter().zip(rows) {
        let _ = write!(out, "{}", fmt_f64(*t));
        for v in row {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        out.push('\n');
    }
    write_file(path, &out)
}

/// `t,P0,...,PN,mass,leak` — the integrated window distribution.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> io::Result<()> {
    let n = traj.states.first().map_or(0, |s| s.p.len());
    let mut out = String::from("t");
    for k in 0..n {
        let _ = write!(out, ",P{k}");
    }
    out.push_str(",mass,leak\n");
    for st in &traj.states {
        let _ = write!(out, "{}", fmt_f64(st.t));
        for v in &st.p {
            let _ = write!(out, ",{}", fmt_f64(*v));
        }
        let _ = writeln!(out, ",{},{}", fmt_f64(st.mass()), fmt_f64(st.leak));
    }
    write_file(path, &out)
}

/// `t,mass,dmass_dt_numeric,identity_rhs,residual` — the mass ledger.
pub fn write_diagnostic_csv(path: &Path, rows: &[DiagnosticRow]) -> io::Result<()> {
    let mut out = String::from("t,mass,dmass_dt_numeric,identity_rhs,residual\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.mass),
            fmt_f64(r.dmass_dt_numeric),
            fmt_f64(r.identity_rhs),
            fmt_f64(r.residual)
        );
    }
    write_file(path, &out)
}

/// Serializes a report as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization cannot fail");
    s.push('\n');
    s
}

/// Writes a report file (creating parent directories).
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    write_file(path, &to_json(value))
}
