//! Evaluation metrics over episode traces and the weight x return
//! distribution export.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MarketFrame;
use crate::trace::EpisodeTrace;

/// Four-hour periods per year.
pub const DEFAULT_ANNUALIZATION: f64 = 2190.0;
pub const DEFAULT_BINS: usize = 101;

/// Marker written in place of a metric whose denominator is zero.
pub const UNDEFINED: &str = "undefined";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("trace too short: {0} records (need at least 2)")]
    ShortTrace(usize),
    #[error("non-positive portfolio value {value} at record {index}")]
    NonPositiveValue { index: usize, value: f64 },
    #[error("trace misaligned with frame: {0}")]
    Misaligned(String),
    #[error("bad report csv: {0}")]
    Csv(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AverageKind {
    #[default]
    Arithmetic,
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsOptions {
    pub annualization_factor: f64,
    pub average: AverageKind,
}

impl Default for MetricsOptions {
    fn default() -> Self {
        MetricsOptions {
            annualization_factor: DEFAULT_ANNUALIZATION,
            average: AverageKind::Arithmetic,
        }
    }
}

/// Percent-valued fields are multiplied by 100. `None` means undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub total_return: f64,
    pub win_rate: f64,
    pub average_return: f64,
    pub standard_deviation: Option<f64>,
    pub sharpe: Option<f64>,
    pub downside_deviation: f64,
    pub sortino: Option<f64>,
    pub max_drawdown: f64,
    pub calmar: Option<f64>,
    pub annualization_factor: f64,
    pub steps: usize,
}

pub const REPORT_COLUMNS: [&str; 11] = [
    "total_return_pct",
    "win_rate_pct",
    "average_return_pct",
    "standard_deviation_pct",
    "sharpe",
    "downside_deviation_pct",
    "sortino",
    "max_drawdown_pct",
    "calmar",
    "annualization_factor",
    "steps",
];

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| UNDEFINED.to_string())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s == UNDEFINED {
        return Ok(None);
    }
    s.parse()
        .map(Some)
        .map_err(|_| MetricsError::Csv(format!("bad number `{s}`")))
}

fn parse_num(s: &str) -> Result<f64> {
    parse_opt(s)?.ok_or_else(|| MetricsError::Csv("unexpected undefined".into()))
}

impl MetricsReport {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.total_return.to_string(),
            self.win_rate.to_string(),
            self.average_return.to_string(),
            fmt_opt(self.standard_deviation),
            fmt_opt(self.sharpe),
            self.downside_deviation.to_string(),
            fmt_opt(self.sortino),
            self.max_drawdown.to_string(),
            fmt_opt(self.calmar),
            self.annualization_factor.to_string(),
            self.steps.to_string(),
        ]
    }

    pub fn from_csv_fields(fields: &[&str]) -> Result<Self> {
        if fields.len() != REPORT_COLUMNS.len() {
            return Err(MetricsError::Csv(format!(
                "expected {} fields, got {}",
                REPORT_COLUMNS.len(),
                fields.len()
            )));
        }
        Ok(MetricsReport {
            total_return: parse_num(fields[0])?,
            win_rate: parse_num(fields[1])?,
            average_return: parse_num(fields[2])?,
            standard_deviation: parse_opt(fields[3])?,
            sharpe: parse_opt(fields[4])?,
            downside_deviation: parse_num(fields[5])?,
            sortino: parse_opt(fields[6])?,
            max_drawdown: parse_num(fields[7])?,
            calmar: parse_opt(fields[8])?,
            annualization_factor: parse_num(fields[9])?,
            steps: fields[10]
                .parse()
                .map_err(|_| MetricsError::Csv(format!("bad step count `{}`", fields[10])))?,
        })
    }

    /// Header plus one row.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| MetricsError::Csv(e.to_string());
        w.write_record(REPORT_COLUMNS).map_err(err)?;
        w.write_record(self.csv_fields()).map_err(err)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers().map_err(|e| MetricsError::Csv(e.to_string()))?.clone();
        if headers.iter().ne(REPORT_COLUMNS.iter().copied()) {
            return Err(MetricsError::Csv(format!(
                "unexpected header `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let rec = rdr
            .records()
            .next()
            .ok_or_else(|| MetricsError::Csv("missing row".into()))?
            .map_err(|e| MetricsError::Csv(e.to_string()))?;
        Self::from_csv_fields(&rec.iter().collect::<Vec<_>>())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Simple step returns `p_t / p_{t-1} - 1` of the trace values.
pub fn step_returns(trace: &EpisodeTrace) -> Result<Vec<f64>> {
    value_returns(&trace.values())
}

pub fn value_returns(values: &[f64]) -> Result<Vec<f64>> {
    if values.len() < 2 {
        return Err(MetricsError::ShortTrace(values.len()));
    }
    if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(MetricsError::NonPositiveValue { index, value });
    }
    Ok(values.windows(2).map(|w| w[1] / w[0] - 1.0).collect())
}

/// Largest peak-to-date relative decline, as a fraction.
pub fn max_drawdown(values: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst: f64 = 0.0;
    for &v in values {
        peak = peak.max(v);
        worst = worst.max((peak - v) / peak);
    }
    worst
}

/// Dispersion below this is rounding noise from `p_t / p_{t-1} - 1`, so a
/// ratio over it is reported as undefined.
pub const ROUNDING_FLOOR: f64 = 16.0 * f64::EPSILON;

fn ratio(num: f64, den: f64) -> Option<f64> {
    if den > ROUNDING_FLOOR && den.is_finite() {
        Some(num / den)
    } else {
        None
    }
}

pub fn compute_report(trace: &EpisodeTrace, annualization_factor: f64) -> Result<MetricsReport> {
    compute_report_with(
        trace,
        &MetricsOptions {
            annualization_factor,
            ..Default::default()
        },
    )
}

pub fn compute_report_with(trace: &EpisodeTrace, options: &MetricsOptions) -> Result<MetricsReport> {
    report_from_values(&trace.values(), options)
}

pub fn report_from_values(values: &[f64], options: &MetricsOptions) -> Result<MetricsReport> {
    let r = value_returns(values)?;
    let n = r.len() as f64;
    let af = options.annualization_factor;
    let total = values[values.len() - 1] / values[0] - 1.0;
    let mean = r.iter().sum::<f64>() / n;
    let average = match options.average {
        AverageKind::Arithmetic => mean,
        AverageKind::Geometric => (1.0 + total).powf(1.0 / n) - 1.0,
    };
    let std = if r.len() >= 2 {
        Some((r.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    } else {
        None
    };
    let downside = (r.iter().map(|x| x.min(0.0).powi(2)).sum::<f64>() / n).sqrt();
    let mdd = max_drawdown(values);
    let annualized = (1.0 + total).powf(af / n) - 1.0;
    Ok(MetricsReport {
        total_return: 100.0 * total,
        win_rate: 100.0 * r.iter().filter(|&&x| x > 0.0).count() as f64 / n,
        average_return: 100.0 * average,
        standard_deviation: std.map(|s| 100.0 * s),
        sharpe: std.and_then(|s| ratio(average, s)).map(|x| x * af.sqrt()),
        downside_deviation: 100.0 * downside,
        sortino: ratio(average, downside).map(|x| x * af.sqrt()),
        max_drawdown: 100.0 * mdd,
        calmar: ratio(annualized, mdd),
        annualization_factor: af,
        steps: r.len(),
    })
}

/// Writes a comparison table: `strategy` followed by the report columns.
pub fn write_comparison_csv<W: Write>(rows: &[(String, MetricsReport)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| MetricsError::Csv(e.to_string());
    let mut header = vec!["strategy"];
    header.extend(REPORT_COLUMNS);
    w.write_record(&header).map_err(err)?;
    for (name, report) in rows {
        let mut row = vec![name.clone()];
        row.extend(report.csv_fields());
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_comparison_csv<R: Read>(reader: R) -> Result<Vec<(String, MetricsReport)>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MetricsError::Csv(e.to_string()))?;
        let fields: Vec<&str> = rec.iter().collect();
        if fields.is_empty() {
            continue;
        }
        rows.push((fields[0].to_string(), MetricsReport::from_csv_fields(&fields[1..])?));
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub left: f64,
    pub right: f64,
    pub count: usize,
    /// Fitted normal density at the bin center; `None` when the fit is degenerate.
    pub normal_pdf: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeStats {
    pub count: usize,
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub samples: usize,
    pub mean: f64,
    /// Maximum-likelihood (population) standard deviation.
    pub std: f64,
    pub degenerate: bool,
    pub bins: Vec<HistogramBin>,
    pub overall: ShapeStats,
    pub positive: ShapeStats,
    pub negative: ShapeStats,
}

/// Population skewness and excess kurtosis.
pub fn shape_stats(xs: &[f64]) -> ShapeStats {
    let n = xs.len();
    if n < 3 {
        return ShapeStats {
            count: n,
            skewness: None,
            excess_kurtosis: None,
        };
    }
    let nf = n as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let (skewness, excess_kurtosis) = if m2 > 0.0 {
        (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0))
    } else {
        (None, None)
    };
    ShapeStats {
        count: n,
        skewness,
        excess_kurtosis,
    }
}

/// Deployed weight times asset return for every asset and step: the weights
/// of trace record `k` earn the return from record `k-1`'s row to record `k`'s.
pub fn weight_returns(trace: &EpisodeTrace, frame: &MarketFrame) -> Result<Vec<f64>> {
    if trace.symbols != frame.symbols {
        return Err(MetricsError::Misaligned("symbol lists differ".into()));
    }
    let row = |ts: i64| {
        frame
            .row_of(ts)
            .ok_or_else(|| MetricsError::Misaligned(format!("timestamp {ts} not in frame")))
    };
    let mut out = Vec::with_capacity(trace.records.len() * frame.n_assets());
    for pair in trace.records.windows(2) {
        let (prev, cur) = (row(pair[0].timestamp)?, row(pair[1].timestamp)?);
        if cur != prev + 1 {
            return Err(MetricsError::Misaligned(format!(
                "records at rows {prev} and {cur} are not consecutive"
            )));
        }
        let returns = frame.step_returns(prev);
        let deployed = 1.0 - pair[1].loan_weight;
        out.extend(pair[1].weights.iter().zip(&returns).map(|(w, r)| deployed * w * r));
    }
    Ok(out)
}

pub fn histogram(xs: &[f64], bins: usize) -> Distribution {
    let n = xs.len();
    let nf = n.max(1) as f64;
    let mean = xs.iter().sum::<f64>() / nf;
    let std = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf).sqrt();
    let degenerate = !(std > 0.0);
    let pdf = |x: f64| {
        if degenerate {
            None
        } else {
            let z = (x - mean) / std;
            Some((-0.5 * z * z).exp() / (std * (2.0 * std::f64::consts::PI).sqrt()))
        }
    };
    let half = xs.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let bins_out = if half == 0.0 || bins == 0 {
        vec![HistogramBin {
            left: 0.0,
            right: 0.0,
            count: n,
            normal_pdf: pdf(0.0),
        }]
    } else {
        let width = 2.0 * half / bins as f64;
        let mut counts = vec![0usize; bins];
        for &x in xs {
            let k = (((x + half) / width).floor() as usize).min(bins - 1);
            counts[k] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(k, count)| {
                let left = -half + k as f64 * width;
                let right = if k + 1 == bins { half } else { left + width };
                HistogramBin {
                    left,
                    right,
                    count,
                    normal_pdf: pdf(0.5 * (left + right)),
                }
            })
            .collect()
    };
    let pos: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
    let neg: Vec<f64> = xs.iter().copied().filter(|&x| x < 0.0).collect();
    Distribution {
        samples: n,
        mean,
        std,
        degenerate,
        bins: bins_out,
        overall: shape_stats(xs),
        positive: shape_stats(&pos),
        negative: shape_stats(&neg),
    }
}

pub fn weight_return_distribution(trace: &EpisodeTrace, frame: &MarketFrame, bins: usize) -> Result<Distribution> {
    Ok(histogram(&weight_returns(trace, frame)?, bins))
}

impl Distribution {
    /// `bin_left,bin_right,count,normal_pdf_at_center`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| MetricsError::Csv(e.to_string());
        w.write_record(["bin_left", "bin_right", "count", "normal_pdf_at_center"])
            .map_err(err)?;
        for b in &self.bins {
            w.write_record([
                b.left.to_string(),
                b.right.to_string(),
                b.count.to_string(),
                fmt_opt(b.normal_pdf),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_return_cases() {
        assert_eq!(value_returns(&[1000.0, 1100.0]).unwrap()[0], 1100.0 / 1000.0 - 1.0);
        assert_eq!(value_returns(&[5.0; 4]).unwrap(), vec![0.0; 3]);
        assert_eq!(value_returns(&[1000.0, 500.0, 750.0]).unwrap(), vec![-0.5, 0.5]);
        assert!(matches!(value_returns(&[1.0]), Err(MetricsError::ShortTrace(1))));
        assert!(value_returns(&[1.0, 0.0]).is_err());
    }

    #[test]
    fn hand_cases() {
        let r = report_from_values(&[1.0, 0.5, 0.75], &MetricsOptions::default()).unwrap();
        assert_eq!(r.max_drawdown, 50.0);
        assert_eq!(r.win_rate, 50.0);
        assert_eq!(r.total_return, -25.0);

        let vals: Vec<f64> = (0..6).map(|k| 1.01_f64.powi(k)).collect();
        let r = report_from_values(&vals, &MetricsOptions::default()).unwrap();
        assert_eq!(r.win_rate, 100.0);
        assert_eq!(r.downside_deviation, 0.0);
        assert_eq!(r.sortino, None);
        assert_eq!(r.max_drawdown, 0.0);
        assert_eq!(r.calmar, None);

        let flat = report_from_values(&[2.0, 2.0, 2.0], &MetricsOptions::default()).unwrap();
        assert_eq!(flat.win_rate, 0.0);
        assert_eq!(flat.sharpe, None);
    }

    #[test]
    fn geometric_average() {
        let opts = MetricsOptions {
            average: AverageKind::Geometric,
            ..Default::default()
        };
        let r = report_from_values(&[1.0, 2.0, 1.0], &opts).unwrap();
        assert_eq!(r.average_return, 0.0);
    }

    #[test]
    fn csv_round_trip_with_undefined() {
        let r = report_from_values(&[1.0, 1.1, 1.21], &MetricsOptions::default()).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains(UNDEFINED));
        assert_eq!(MetricsReport::read_csv(buf.as_slice()).unwrap(), r);
    }

    #[test]
    fn interest_only_growth_has_no_sharpe() {
        let mut values = vec![1000.0];
        for _ in 0..150 {
            let last = *values.last().unwrap();
            values.push(last + last * 0.03 * 4.0 / 8760.0);
        }
        let r = report_from_values(&values, &MetricsOptions::default()).unwrap();
        assert!(r.standard_deviation.unwrap() < 1e-9);
        assert_eq!(r.sharpe, None);
        assert_eq!(r.sortino, None);
        assert_eq!(r.calmar, None);
    }

    #[test]
    fn histogram_point_mass() {
        let d = histogram(&[0.0; 10], 101);
        assert!(d.degenerate);
        assert_eq!(d.std, 0.0);
        assert_eq!(d.bins.len(), 1);
        assert_eq!(d.bins[0].count, 10);
    }

    #[test]
    fn histogram_bins_cover_range() {
        let xs = [-0.2, -0.1, 0.0, 0.05, 0.2];
        let d = histogram(&xs, 101);
        assert_eq!(d.bins.len(), 101);
        assert_eq!(d.bins.iter().map(|b| b.count).sum::<usize>(), xs.len());
        assert_eq!(d.bins[0].left, -0.2);
        assert_eq!(d.bins[100].right, 0.2);
        assert_eq!(d.mean, xs.iter().sum::<f64>() / 5.0);
        assert!(!d.degenerate);
    }
}
