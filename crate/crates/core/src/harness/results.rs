//! Result tables: one row per (sweep value, metric), written as CSV with
//! `#`-prefixed metadata lines or as JSON lines with a metadata header.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub experiment: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub version: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: f64,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultTable {
    pub metadata: Metadata,
    pub rows: Vec<ResultRow>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    Jsonl,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "jsonl" | "json" => Ok(Format::Jsonl),
            other => Err(Error::Config { field: "format".into(), message: format!("unknown format `{other}` (csv or jsonl)") }),
        }
    }
}

pub fn version_string() -> String {
    format!("secbeam {}", env!("CARGO_PKG_VERSION"))
}

/// Mean and sample standard deviation (zero for fewer than two values).
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: Metadata,
}

impl ResultTable {
    pub fn to_csv(&self) -> Result<String> {
        let m = &self.metadata;
        let mut out = String::new();
        let _ = writeln!(out, "# experiment={}", m.experiment);
        let _ = writeln!(out, "# scenario_hash={}", m.scenario_hash);
        let _ = writeln!(out, "# seed={}", m.seed);
        let _ = writeln!(out, "# version={}", m.version);
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Parse(e.to_string()))?;
        }
        let body = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        out.push_str(&String::from_utf8(body).map_err(|e| Error::Parse(e.to_string()))?);
        Ok(out)
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = json_line(&Header { metadata: self.metadata.clone() })?;
        out.push('\n');
        for row in &self.rows {
            out.push_str(&json_line(row)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn render(&self, format: Format) -> Result<String> {
        if self.rows.is_empty() {
            return Err(Error::Domain("result table is empty".into()));
        }
        match format {
            Format::Csv => self.to_csv(),
            Format::Jsonl => self.to_jsonl(),
        }
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut fields = std::collections::HashMap::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.trim().split_once('=') {
                    fields.insert(k.trim().to_string(), v.trim().to_string());
                }
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let get = |k: &str| fields.get(k).cloned().ok_or_else(|| Error::Parse(format!("missing `{k}` header line")));
        let metadata = Metadata {
            experiment: get("experiment")?,
            scenario_hash: get("scenario_hash")?,
            seed: get("seed")?.parse().map_err(|e| Error::Parse(format!("seed: {e}")))?,
            version: get("version")?,
        };
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let rows = rd.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { metadata, rows })
    }

    pub fn parse_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let head = lines.next().ok_or_else(|| Error::Parse("empty results file".into()))?;
        let header: Header = serde_json::from_str(head).map_err(|e| Error::Parse(format!("header: {e}")))?;
        let rows = lines
            .map(|l| serde_json::from_str::<ResultRow>(l).map_err(|e| Error::Parse(e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { metadata: header.metadata, rows })
    }

    pub fn parse(text: &str, format: Format) -> Result<Self> {
        match format {
            Format::Csv => Self::parse_csv(text),
            Format::Jsonl => Self::parse_jsonl(text),
        }
    }

    pub fn rows_for<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }
}

pub fn emit_results(table: &ResultTable, format: Format, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, table.render(format)?)?;
    Ok(())
}

fn json_line<T: Serialize>(v: &T) -> Result<String> {
    serde_json::to_string(v).map_err(|e| Error::Parse(e.to_string()))
}
