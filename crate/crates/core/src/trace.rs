//! Episode traces: the per-step record shared by the environment, the
//! metrics and external plotting tools.
//!
//! CSV layout: `step,timestamp,w_<SYM>...,loan_weight,c_t,interest,cost_total,reward,p`.
//! Row 0 is the initial state (no action); row `k` holds the action taken at
//! decision `k-1` and the portfolio value it produced.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad trace header: {0}")]
    Header(String),
    #[error("line {line}: {reason}")]
    Row { line: u64, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub timestamp: i64,
    pub weights: Vec<f64>,
    pub loan_weight: f64,
    pub capital: f64,
    pub interest: f64,
    pub cost_total: f64,
    pub reward: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub symbols: Vec<String>,
    pub records: Vec<TraceRecord>,
}

impl EpisodeTrace {
    pub fn new(symbols: Vec<String>) -> Self {
        EpisodeTrace {
            symbols,
            records: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.value).collect()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), TraceError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["step".to_string(), "timestamp".to_string()];
        header.extend(self.symbols.iter().map(|s| format!("w_{s}")));
        header.extend(
            ["loan_weight", "c_t", "interest", "cost_total", "reward", "p"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header)?;
        for r in &self.records {
            let mut row = vec![r.step.to_string(), r.timestamp.to_string()];
            row.extend(r.weights.iter().map(|v| v.to_string()));
            row.extend(
                [r.loan_weight, r.capital, r.interest, r.cost_total, r.reward, r.value]
                    .iter()
                    .map(|v| v.to_string()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self, TraceError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let n = headers.len();
        if n < 8 || &headers[0] != "step" || &headers[1] != "timestamp" || &headers[n - 1] != "p" {
            return Err(TraceError::Header(headers.iter().collect::<Vec<_>>().join(",")));
        }
        let symbols = headers
            .iter()
            .skip(2)
            .take(n - 8)
            .map(|h| {
                h.strip_prefix("w_")
                    .map(str::to_string)
                    .ok_or_else(|| TraceError::Header(format!("expected weight column, got `{h}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let m = symbols.len();
        let mut records = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line()).unwrap_or(0);
            let num = |i: usize| -> Result<f64, TraceError> {
                rec.get(i).and_then(|s| s.parse().ok()).ok_or(TraceError::Row {
                    line,
                    reason: format!("bad number in column {i}"),
                })
            };
            let bad = |what: &str| TraceError::Row {
                line,
                reason: format!("bad {what}"),
            };
            records.push(TraceRecord {
                step: rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("step"))?,
                timestamp: rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(|| bad("timestamp"))?,
                weights: (0..m).map(|i| num(2 + i)).collect::<Result<_, _>>()?,
                loan_weight: num(2 + m)?,
                capital: num(3 + m)?,
                interest: num(4 + m)?,
                cost_total: num(5 + m)?,
                reward: num(6 + m)?,
                value: num(7 + m)?,
            });
        }
        Ok(EpisodeTrace { symbols, records })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), TraceError> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(file))
    }
}
