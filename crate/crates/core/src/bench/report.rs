//! JSON bench reports and CSV convergence histories.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::experiment::{BenchError, MethodResult};
use crate::engine::HistoryEntry;

/// A metric value; non-finite values serialize as the strings `"inf"`,
/// `"-inf"` and `"nan"` so that reports round-trip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(pub f64);

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&format_float(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Metric {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Metric(v)),
            Raw::Str(s) => parse_float(&s)
                .map(Metric)
                .ok_or_else(|| serde::de::Error::custom(format!("invalid metric '{s}'"))),
        }
    }
}

fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:e}")
    }
}

fn parse_float(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryPoint {
    pub iteration: usize,
    pub row: Option<usize>,
    pub metric: Metric,
}

impl From<&HistoryEntry> for HistoryPoint {
    fn from(h: &HistoryEntry) -> Self {
        Self {
            iteration: h.iteration,
            row: h.row,
            metric: Metric(h.metric),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub name: String,
    pub m: usize,
    pub n: usize,
    pub nnz: usize,
    pub frobenius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub instance: InstanceMeta,
    pub tol: f64,
    pub trials: usize,
    pub seed_base: u64,
    pub methods: Vec<MethodResult>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<(), BenchError> {
        let path = path.as_ref();
        let mut f = File::create(path).map_err(|e| BenchError::io(path, e))?;
        f.write_all(self.to_json().as_bytes())
            .and_then(|_| f.write_all(b"\n"))
            .map_err(|e| BenchError::io(path, e))
    }

    pub fn read_json(path: impl AsRef<Path>) -> Result<Self, BenchError> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| BenchError::io(path, e))?;
        serde_json::from_reader(BufReader::new(f)).map_err(|e| BenchError::Format(e.to_string()))
    }

    /// Copy with timing fields zeroed, for determinism comparisons.
    pub fn without_timings(&self) -> Self {
        let mut r = self.clone();
        for m in &mut r.methods {
            m.mean_seconds = 0.0;
            m.setup_seconds = 0.0;
            m.seconds.iter_mut().for_each(|s| *s = 0.0);
        }
        r
    }
}

impl fmt::Display for BenchReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = &self.instance;
        writeln!(
            f,
            "{}: {}x{}, nnz {}, ||A||_F {:.6e}, tol {:e}, {} trial(s)",
            i.name, i.m, i.n, i.nnz, i.frobenius, self.tol, self.trials
        )?;
        let width = self.methods.iter().map(|m| m.method.len()).max().unwrap_or(6).max(6);
        writeln!(f, "{:<width$}  {:>12}  {:>12}  status", "method", "mean IT", "mean s")?;
        for m in &self.methods {
            writeln!(
                f,
                "{:<width$}  {:>12.1}  {:>12.6}  {}",
                m.method,
                m.mean_it,
                m.mean_seconds,
                if m.failed { "failed" } else { "ok" }
            )?;
        }
        Ok(())
    }
}

/// Convergence histories laid out by iteration, one column per method.
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryTable {
    pub methods: Vec<String>,
    /// `(iteration, metric per method)`; `None` where a method has no entry.
    pub rows: Vec<(usize, Vec<Option<f64>>)>,
}

impl HistoryTable {
    /// Tabulates the first trial's history of every method that recorded one.
    pub fn from_report(report: &BenchReport) -> Self {
        let with_history: Vec<&MethodResult> = report
            .methods
            .iter()
            .filter(|m| m.history.is_some())
            .collect();
        let methods = with_history.iter().map(|m| m.method.clone()).collect();
        let mut iterations: Vec<usize> = with_history
            .iter()
            .flat_map(|m| m.history.as_ref().unwrap().iter().map(|h| h.iteration))
            .collect();
        iterations.sort_unstable();
        iterations.dedup();
        let rows = iterations
            .into_iter()
            .map(|k| {
                let vals = with_history
                    .iter()
                    .map(|m| {
                        let h = m.history.as_ref().unwrap();
                        h.binary_search_by_key(&k, |p| p.iteration)
                            .ok()
                            .map(|idx| h[idx].metric.0)
                    })
                    .collect();
                (k, vals)
            })
            .collect();
        Self { methods, rows }
    }
}

/// Writes the first-trial histories of `report` as CSV: an `iteration`
/// column, then one column per method.
pub fn emit_history_csv(report: &BenchReport, path: impl AsRef<Path>) -> Result<(), BenchError> {
    HistoryTable::from_report(report).write_csv(path)
}

impl HistoryTable {
    /// Table of a single solve's history.
    pub fn single(method: impl Into<String>, history: &[HistoryEntry]) -> Self {
        Self {
            methods: vec![method.into()],
            rows: history.iter().map(|h| (h.iteration, vec![Some(h.metric)])).collect(),
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), BenchError> {
    let path = path.as_ref();
    let table = self;
    let file = File::create(path).map_err(|e| BenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| BenchError::Format(e.to_string());
    let mut header = vec!["iteration".to_string()];
    header.extend(table.methods.iter().cloned());
    w.write_record(&header).map_err(csv_err)?;
    for (k, vals) in &table.rows {
        let mut rec = vec![k.to_string()];
        rec.extend(vals.iter().map(|v| v.map(format_float).unwrap_or_default()));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BenchError::io(path, e))
    }
}

pub fn read_history_csv(path: impl AsRef<Path>) -> Result<HistoryTable, BenchError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| BenchError::io(path, e))?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let bad = |msg: String| BenchError::Format(msg);
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("iteration") {
        return Err(bad("first column must be 'iteration'".into()));
    }
    let methods: Vec<String> = header.iter().skip(1).map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let k: usize = rec[0]
            .parse()
            .map_err(|_| bad(format!("invalid iteration '{}'", &rec[0])))?;
        let vals = rec
            .iter()
            .skip(1)
            .map(|s| {
                if s.is_empty() {
                    Ok(None)
                } else {
                    parse_float(s)
                        .map(Some)
                        .ok_or_else(|| bad(format!("invalid metric '{s}'")))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push((k, vals));
    }
    Ok(HistoryTable { methods, rows })
}
