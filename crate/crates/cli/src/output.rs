//! Trajectory tables and their CSV / JSON encodings.

use crate::config::RunConfig;
use serde::Serialize;
use spintoda::liealg::{GElement, LieAlgebraData};
use spintoda::models::{ReducedState, ReducedTodaState, SpinCMState, TodaState, Trajectory};
use spintoda::numint::{Monitor, MonitorSuite};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("expected csv or json, got {other:?}")),
        }
    }
}

/// How a run ended.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunStatus {
    pub complete: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl RunStatus {
    pub fn complete() -> Self {
        RunStatus { complete: true, failure_time: None, reason: None, warnings: vec![] }
    }

    pub fn truncated(t: f64, reason: String) -> Self {
        RunStatus { complete: false, failure_time: Some(t), reason: Some(reason), warnings: vec![] }
    }
}

/// Column-major-free table: one row per sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

fn spin_columns(alg: &LieAlgebraData, prefix: &str, with_cartan: bool) -> Vec<String> {
    let mut out = Vec::new();
    if with_cartan {
        out.extend((1..=alg.rank).map(|i| format!("{prefix}_h_{i}")));
    }
    out.extend((0..alg.num_roots()).map(|a| format!("{prefix}[{}]", alg.root_key(a))));
    out
}

fn push_spin(row: &mut Vec<f64>, x: &GElement, with_cartan: bool) {
    if with_cartan {
        row.extend(x.h.iter());
    }
    row.extend(x.roots.iter());
}

/// State columns (without `t` and monitors) for a system.
pub trait Columns {
    fn names(alg: &LieAlgebraData) -> Vec<String>;
    fn values(&self, row: &mut Vec<f64>);
}

fn coords(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |i| format!("{prefix}_{i}"))
}

impl Columns for SpinCMState {
    fn names(alg: &LieAlgebraData) -> Vec<String> {
        coords("q", alg.rank).chain(coords("p", alg.rank)).chain(spin_columns(alg, "xi", true)).collect()
    }
    fn values(&self, row: &mut Vec<f64>) {
        row.extend(self.q.iter().chain(self.p.iter()));
        push_spin(row, &self.xi, true);
    }
}

impl Columns for ReducedState {
    fn names(alg: &LieAlgebraData) -> Vec<String> {
        coords("q", alg.rank).chain(coords("p", alg.rank)).chain(spin_columns(alg, "s", false)).collect()
    }
    fn values(&self, row: &mut Vec<f64>) {
        row.extend(self.q.iter().chain(self.p.iter()));
        push_spin(row, &self.s, false);
    }
}

impl Columns for TodaState {
    fn names(alg: &LieAlgebraData) -> Vec<String> {
        coords("x", alg.rank).chain(coords("p", alg.rank)).chain(spin_columns(alg, "eta", true)).collect()
    }
    fn values(&self, row: &mut Vec<f64>) {
        row.extend(self.x.iter().chain(self.p.iter()));
        push_spin(row, &self.eta, true);
    }
}

impl Columns for ReducedTodaState {
    fn names(alg: &LieAlgebraData) -> Vec<String> {
        coords("x", alg.rank).chain(coords("p", alg.rank)).collect()
    }
    fn values(&self, row: &mut Vec<f64>) {
        row.extend(self.x.iter().chain(self.p.iter()));
    }
}

/// Monitors matching the state type of a suite.
pub trait FromSuite: Sized {
    fn monitors(suite: MonitorSuite) -> Vec<Monitor<Self>>;
}

macro_rules! from_suite {
    ($ty:ty, $variant:ident) => {
        impl FromSuite for $ty {
            fn monitors(suite: MonitorSuite) -> Vec<Monitor<Self>> {
                match suite {
                    MonitorSuite::$variant(m) => m,
                    _ => unreachable!("monitor suite does not match the state type"),
                }
            }
        }
    };
}

from_suite!(SpinCMState, SpinCm);
from_suite!(ReducedState, ReducedCm);
from_suite!(TodaState, SpinToda);
from_suite!(ReducedTodaState, ReducedToda);

/// Number of state columns, used to split a row from its monitors.
pub fn state_width<S: Columns>(alg: &LieAlgebraData) -> usize {
    S::names(alg).len()
}

pub fn table<S: Columns>(alg: &LieAlgebraData, traj: &Trajectory<S>, monitors: &[Monitor<S>]) -> Table {
    let mut columns = vec!["t".to_string()];
    columns.extend(S::names(alg));
    columns.extend(monitors.iter().map(|m| m.name.clone()));
    let rows = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, s)| {
            let mut row = vec![*t];
            s.values(&mut row);
            row.extend(monitors.iter().map(|m| (m.f)(s)));
            row
        })
        .collect();
    Table { columns, rows }
}

/// 17 significant digits in scientific notation.
pub fn fmt_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(out: W, config: &RunConfig, status: &RunStatus, table: &Table) -> std::io::Result<()> {
    let mut out = out;
    writeln!(out, "# config: {}", serde_json::to_string(config).expect("config serializes"))?;
    writeln!(out, "# status: {}", serde_json::to_string(status).expect("status serializes"))?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| fmt_value(*v)))?;
    }
    w.flush()
}

#[derive(Serialize)]
struct JsonTrajectory<'a> {
    config: &'a RunConfig,
    status: &'a RunStatus,
    columns: &'a [String],
    rows: &'a [Vec<f64>],
}

pub fn write_json<W: Write>(out: W, config: &RunConfig, status: &RunStatus, table: &Table) -> std::io::Result<()> {
    let doc = JsonTrajectory { config, status, columns: &table.columns, rows: &table.rows };
    let mut out = out;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)
}
