//! File formats for trajectories, control schedules, curves, and bound tables.
//!
//! Numbers are written in the shortest decimal form that parses back to the same `f64`, so a
//! write followed by a read reproduces every value bitwise. Agents and edges are 0-based; an
//! edge index is the position of the ordered pair in lexicographic `(i, j)` order.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::edges::EdgeSet;
use crate::error::{Error, Result};
use crate::experiments::{Frame, TrialRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Self::Csv => "csv",
            Self::Json => "json",
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(Error::Domain(format!("unknown output format {other:?}; expected csv or json"))),
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> Error + '_ {
    move |source| Error::Json { path: path.to_path_buf(), source }
}

fn bad_field(path: &Path, line: usize, what: &str) -> Error {
    Error::InvalidRecords(format!("{}: record {line}: {what}", path.display()))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(io_err(path))?;
    Ok(csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(BufWriter::new(file)))
}

fn write_json(path: &Path, value: &Value) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value).map_err(json_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

fn read_json(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(json_err(path))
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

/// One agent's opinion at one time in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub trial_id: u64,
    pub t: u64,
    pub agent: usize,
    pub x: Vec<f64>,
}

/// Stored frames of a record; without a trajectory, the initial and final states.
fn frames(record: &TrialRecord) -> Vec<Frame> {
    if !record.trajectory.is_empty() {
        return record.trajectory.clone();
    }
    let mut out = vec![Frame { t: record.initial.time(), coords: record.initial.coords().to_vec() }];
    if record.final_state.time() != record.initial.time() {
        out.push(Frame { t: record.final_state.time(), coords: record.final_state.coords().to_vec() });
    }
    out
}

pub fn trajectory_rows(records: &[TrialRecord]) -> Vec<TrajectoryRow> {
    let mut rows = Vec::new();
    for r in records {
        let d = r.d();
        for f in frames(r) {
            for (agent, x) in f.coords.chunks(d).enumerate() {
                rows.push(TrajectoryRow { trial_id: r.trial_id, t: f.t, agent, x: x.to_vec() });
            }
        }
    }
    rows
}

/// Writes columns `trial_id, t, agent, x_1, ..., x_d`, or a JSON array of objects with the same
/// keys.
pub fn write_trajectory(records: &[TrialRecord], path: &Path, format: Format) -> Result<()> {
    let d = records
        .first()
        .map(TrialRecord::d)
        .ok_or_else(|| Error::InvalidRecords("no trial records to write".into()))?;
    if records.iter().any(|r| r.d() != d) {
        return Err(Error::InvalidRecords("records mix opinion dimensions".into()));
    }
    let rows = trajectory_rows(records);
    let coord_names: Vec<String> = (1..=d).map(|k| format!("x_{k}")).collect();
    match format {
        Format::Csv => {
            let mut w = csv_writer(path)?;
            let mut header = vec!["trial_id".to_string(), "t".into(), "agent".into()];
            header.extend(coord_names);
            w.write_record(&header).map_err(csv_err(path))?;
            for row in rows {
                let mut rec = vec![row.trial_id.to_string(), row.t.to_string(), row.agent.to_string()];
                rec.extend(row.x.iter().map(|&v| num(v)));
                w.write_record(&rec).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        Format::Json => {
            let items = rows
                .into_iter()
                .map(|row| {
                    let mut obj = Map::new();
                    obj.insert("trial_id".into(), row.trial_id.into());
                    obj.insert("t".into(), row.t.into());
                    obj.insert("agent".into(), row.agent.into());
                    for (name, v) in coord_names.iter().zip(row.x) {
                        obj.insert(name.clone(), json_f64(v));
                    }
                    Value::Object(obj)
                })
                .collect();
            write_json(path, &Value::Array(items))
        }
    }
}

pub fn read_trajectory(path: &Path, format: Format) -> Result<Vec<TrajectoryRow>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
            let header = r.headers().map_err(csv_err(path))?.clone();
            let d = header.len().saturating_sub(3);
            let mut expected = vec!["trial_id".to_string(), "t".into(), "agent".into()];
            expected.extend((1..=d).map(|k| format!("x_{k}")));
            if d == 0 || header.iter().ne(expected.iter().map(String::as_str)) {
                return Err(bad_field(path, 0, "unexpected trajectory header"));
            }
            let mut rows = Vec::new();
            for (line, rec) in r.records().enumerate() {
                let rec = rec.map_err(csv_err(path))?;
                let int = |k: usize| rec[k].parse::<u64>().map_err(|_| bad_field(path, line + 1, &expected[k]));
                let x = (3..3 + d)
                    .map(|k| rec[k].parse::<f64>().map_err(|_| bad_field(path, line + 1, &expected[k])))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(TrajectoryRow { trial_id: int(0)?, t: int(1)?, agent: int(2)? as usize, x });
            }
            Ok(rows)
        }
        Format::Json => {
            let Value::Array(items) = read_json(path)? else {
                return Err(bad_field(path, 0, "expected a JSON array"));
            };
            items
                .iter()
                .enumerate()
                .map(|(line, item)| {
                    let obj = item.as_object().ok_or_else(|| bad_field(path, line, "expected an object"))?;
                    let int = |key: &str| {
                        obj.get(key).and_then(Value::as_u64).ok_or_else(|| bad_field(path, line, key))
                    };
                    let d = obj.len().saturating_sub(3);
                    let x = (1..=d)
                        .map(|k| {
                            let key = format!("x_{k}");
                            obj.get(&key).and_then(Value::as_f64).ok_or_else(|| bad_field(path, line, &key))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(TrajectoryRow { trial_id: int("trial_id")?, t: int("t")?, agent: int("agent")? as usize, x })
                })
                .collect()
        }
    }
}

/// Writes one line per step: `t, n, edges`, where `edges` lists the step's edge indices in
/// ascending order, separated by spaces.
pub fn write_schedule(schedule: &[EdgeSet], path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv_writer(path)?;
            w.write_record(["t", "n", "edges"]).map_err(csv_err(path))?;
            for (t, e) in schedule.iter().enumerate() {
                let list = e.indices().map(|k| k.to_string()).collect::<Vec<_>>().join(" ");
                w.write_record([t.to_string(), e.agent_count().to_string(), list]).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        Format::Json => {
            let items = schedule
                .iter()
                .enumerate()
                .map(|(t, e)| {
                    let mut obj = Map::new();
                    obj.insert("t".into(), t.into());
                    obj.insert("n".into(), e.agent_count().into());
                    obj.insert("edges".into(), e.indices().collect::<Vec<_>>().into());
                    Value::Object(obj)
                })
                .collect();
            write_json(path, &Value::Array(items))
        }
    }
}

pub fn read_schedule(path: &Path, format: Format) -> Result<Vec<EdgeSet>> {
    let mut out = Vec::new();
    let mut push = |line: usize, t: u64, n: usize, idx: Vec<usize>| -> Result<()> {
        if t != out.len() as u64 {
            return Err(bad_field(path, line, "steps must be listed in order from t = 0"));
        }
        out.push(EdgeSet::from_indices(n, idx)?);
        Ok(())
    };
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
            for (line, rec) in r.records().enumerate() {
                let rec = rec.map_err(csv_err(path))?;
                let t = rec[0].parse().map_err(|_| bad_field(path, line + 1, "t"))?;
                let n = rec[1].parse().map_err(|_| bad_field(path, line + 1, "n"))?;
                let idx = rec[2]
                    .split_whitespace()
                    .map(|s| s.parse().map_err(|_| bad_field(path, line + 1, "edges")))
                    .collect::<Result<Vec<usize>>>()?;
                push(line + 1, t, n, idx)?;
            }
        }
        Format::Json => {
            let Value::Array(items) = read_json(path)? else {
                return Err(bad_field(path, 0, "expected a JSON array"));
            };
            for (line, item) in items.iter().enumerate() {
                let field = |key: &str| item.get(key).and_then(Value::as_u64).ok_or_else(|| bad_field(path, line, key));
                let idx = item
                    .get("edges")
                    .and_then(Value::as_array)
                    .ok_or_else(|| bad_field(path, line, "edges"))?
                    .iter()
                    .map(|v| v.as_u64().map(|k| k as usize).ok_or_else(|| bad_field(path, line, "edges")))
                    .collect::<Result<Vec<_>>>()?;
                push(line, field("t")?, field("n")? as usize, idx)?;
            }
        }
    }
    Ok(out)
}

/// An empirical curve next to its theoretical bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub t: u64,
    pub empirical: f64,
    pub bound: f64,
}

/// Columns `t, empirical, bound`.
pub fn write_curve(points: &[CurvePoint], path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv_writer(path)?;
            w.write_record(["t", "empirical", "bound"]).map_err(csv_err(path))?;
            for p in points {
                w.write_record([p.t.to_string(), num(p.empirical), num(p.bound)]).map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        Format::Json => {
            let value = serde_json::to_value(points).map_err(json_err(path))?;
            write_json(path, &value)
        }
    }
}

/// One row of the bound table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: usize,
    pub r_n: f64,
    pub delta: f64,
    pub tn_star: u64,
    pub tn: f64,
    pub tn_floor: u64,
}

/// Columns `n, r_n, delta, tn_star, tn, tn_floor`.
pub fn write_bounds_table(rows: &[BoundsRow], path: &Path, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv_writer(path)?;
            w.write_record(["n", "r_n", "delta", "tn_star", "tn", "tn_floor"]).map_err(csv_err(path))?;
            for r in rows {
                w.write_record([
                    r.n.to_string(),
                    num(r.r_n),
                    num(r.delta),
                    r.tn_star.to_string(),
                    num(r.tn),
                    r.tn_floor.to_string(),
                ])
                .map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        Format::Json => {
            let value = serde_json::to_value(rows).map_err(json_err(path))?;
            write_json(path, &value)
        }
    }
}

pub fn read_bounds_table(path: &Path, format: Format) -> Result<Vec<BoundsRow>> {
    match format {
        Format::Csv => {
            let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
            r.deserialize().map(|row| row.map_err(csv_err(path))).collect()
        }
        Format::Json => serde_json::from_value(read_json(path)?).map_err(json_err(path)),
    }
}

/// Per-trial summary: `trial_id, tau, consensus, clusters`. A missing `tau` (step cap reached)
/// is written empty; clusters are separated by `|` and members by spaces.
pub fn write_trial_summary(records: &[TrialRecord], path: &Path, format: Format) -> Result<()> {
    let clusters = |r: &TrialRecord| {
        r.clusters
            .iter()
            .map(|c| c.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("|")
    };
    match format {
        Format::Csv => {
            let mut w = csv_writer(path)?;
            w.write_record(["trial_id", "tau", "consensus", "clusters"]).map_err(csv_err(path))?;
            for r in records {
                let tau = r.tau.map(|t| t.to_string()).unwrap_or_default();
                w.write_record([r.trial_id.to_string(), tau, r.consensus.to_string(), clusters(r)])
                    .map_err(csv_err(path))?;
            }
            w.flush().map_err(io_err(path))
        }
        Format::Json => {
            let items = records
                .iter()
                .map(|r| {
                    let mut obj = Map::new();
                    obj.insert("trial_id".into(), r.trial_id.into());
                    obj.insert("tau".into(), r.tau.map(Value::from).unwrap_or(Value::Null));
                    obj.insert("consensus".into(), r.consensus.into());
                    obj.insert("clusters".into(), serde_json::to_value(&r.clusters).expect("plain integers"));
                    Value::Object(obj)
                })
                .collect();
            write_json(path, &Value::Array(items))
        }
    }
}
