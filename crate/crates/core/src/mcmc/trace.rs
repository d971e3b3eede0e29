//! Per-iteration chain trace.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Init,
    Hisp,
    Interval,
    Birth,
    Death,
    Extend,
    Reduce,
    Split,
    Merge,
    Switch,
}

impl MoveKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MoveKind::Init => "init",
            MoveKind::Hisp => "hisp",
            MoveKind::Interval => "interval",
            MoveKind::Birth => "birth",
            MoveKind::Death => "death",
            MoveKind::Extend => "extend",
            MoveKind::Reduce => "reduce",
            MoveKind::Split => "split",
            MoveKind::Merge => "merge",
            MoveKind::Switch => "switch",
        }
    }
}

impl fmt::Display for MoveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MoveKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::Usage(format!("unknown move kind '{s}'")))
    }
}

/// One row of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: u64,
    pub wall_ms: f64,
    pub log_pi_current: f64,
    pub log_pi_best: f64,
    pub rho: f64,
    pub move_kind: MoveKind,
    pub accepted: bool,
    pub n_tracks: usize,
}

/// Writes the trace as CSV with a header row. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_csv<W: Write>(records: &[TraceRecord], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in records {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (i, row) in rd.deserialize().enumerate() {
        out.push(row.map_err(|e| Error::Parse { line: i + 2, msg: e.to_string() })?);
    }
    Ok(out)
}
