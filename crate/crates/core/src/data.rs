//! Candle ingestion, resampling, multi-asset alignment and train/test splitting.
//!
//! Timestamps are UTC unix seconds throughout. A [`MarketFrame`] holds `M`
//! assets on one shared timestamp vector; a [`MarketData`] pairs the source
//! (usually hourly) frame used for observations with the resampled frame used
//! for returns and accounting.

use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SECONDS_PER_HOUR: i64 = 3600;

/// Unix timestamps above this value are interpreted as milliseconds.
pub const MILLIS_THRESHOLD: i64 = 100_000_000_000;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}` in header")]
    MissingColumn(String),
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: non-positive or non-finite price in {field}")]
    NonPositivePrice { line: u64, field: &'static str },
    #[error("invalid candle at {timestamp}: {reason}")]
    InvalidCandle { timestamp: i64, reason: String },
    #[error("duplicate timestamp {0}")]
    DuplicateTimestamp(i64),
    #[error("series {symbol} is empty")]
    EmptySeries { symbol: String },
    #[error("timestamps must be strictly increasing multiples of the interval (at {timestamp})")]
    IrregularSpacing { timestamp: i64 },
    #[error("target interval {target}h is not an integer multiple of source interval {source_hours}h")]
    NonMultipleInterval { target: u32, source_hours: u32 },
    #[error("gap in series {symbol} after timestamp {after}")]
    Gap { symbol: String, after: i64 },
    #[error("series have different intervals ({0}h vs {1}h)")]
    IntervalMismatch(u32, u32),
    #[error("no series supplied")]
    NoSeries,
    #[error("timestamp intersection of the supplied series is empty")]
    EmptyIntersection,
    #[error("insufficient rows: need {needed}, have {available}")]
    InsufficientRows { needed: usize, available: usize },
    #[error("hourly and interval frames are inconsistent: {0}")]
    InconsistentFrames(String),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candle {
    pub timestamp: i64,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: Option<f64>,
}

impl Candle {
    pub fn new(timestamp: i64, open: f64, high: f64, low: f64, close: f64) -> Result<Self> {
        let candle = Candle {
            timestamp,
            open,
            high,
            low,
            close,
            volume: None,
        };
        candle.validate()?;
        Ok(candle)
    }

    /// A flat candle at `price`.
    pub fn flat(timestamp: i64, price: f64) -> Self {
        Candle {
            timestamp,
            open: price,
            high: price,
            low: price,
            close: price,
            volume: None,
        }
    }

    pub fn with_volume(mut self, volume: f64) -> Self {
        self.volume = Some(volume);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |reason: &str| DataError::InvalidCandle {
            timestamp: self.timestamp,
            reason: reason.to_string(),
        };
        for p in [self.open, self.high, self.low, self.close] {
            if !(p.is_finite() && p > 0.0) {
                return Err(invalid("prices must be finite and strictly positive"));
            }
        }
        if self.low > self.open.min(self.close) {
            return Err(invalid("low above open/close"));
        }
        if self.high < self.open.max(self.close) {
            return Err(invalid("high below open/close"));
        }
        if let Some(v) = self.volume {
            if !(v.is_finite() && v >= 0.0) {
                return Err(invalid("volume must be finite and non-negative"));
            }
        }
        Ok(())
    }

    /// Feature by index in OHLC order.
    #[inline]
    pub fn feature(&self, f: usize) -> f64 {
        match f {
            0 => self.open,
            1 => self.high,
            2 => self.low,
            3 => self.close,
            _ => panic!("feature index {f} out of range"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssetSeries {
    pub symbol: String,
    pub interval_hours: u32,
    pub candles: Vec<Candle>,
}

impl AssetSeries {
    /// Builds a series, checking ordering and that every step is a positive
    /// multiple of the interval. Gaps are allowed here; see [`AssetSeries::gaps`].
    pub fn new(symbol: impl Into<String>, interval_hours: u32, candles: Vec<Candle>) -> Result<Self> {
        let symbol = symbol.into();
        if candles.is_empty() {
            return Err(DataError::EmptySeries { symbol });
        }
        let step = interval_hours as i64 * SECONDS_PER_HOUR;
        for pair in candles.windows(2) {
            let dt = pair[1].timestamp - pair[0].timestamp;
            if dt == 0 {
                return Err(DataError::DuplicateTimestamp(pair[1].timestamp));
            }
            if dt < 0 || dt % step != 0 {
                return Err(DataError::IrregularSpacing {
                    timestamp: pair[1].timestamp,
                });
            }
        }
        for c in &candles {
            c.validate()?;
        }
        Ok(AssetSeries {
            symbol,
            interval_hours,
            candles,
        })
    }

    pub fn len(&self) -> usize {
        self.candles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candles.is_empty()
    }

    pub fn timestamps(&self) -> Vec<i64> {
        self.candles.iter().map(|c| c.timestamp).collect()
    }

    fn step_seconds(&self) -> i64 {
        self.interval_hours as i64 * SECONDS_PER_HOUR
    }

    /// Timestamps after which at least one interval is missing.
    pub fn gaps(&self) -> Vec<i64> {
        let step = self.step_seconds();
        self.candles
            .windows(2)
            .filter(|w| w[1].timestamp - w[0].timestamp != step)
            .map(|w| w[0].timestamp)
            .collect()
    }

    pub fn check_contiguous(&self) -> Result<()> {
        match self.gaps().first() {
            Some(&after) => Err(DataError::Gap {
                symbol: self.symbol.clone(),
                after,
            }),
            None => Ok(()),
        }
    }

    /// Repairs gaps by carrying the previous close forward as a flat,
    /// zero-volume candle.
    pub fn fill_gaps(&self) -> AssetSeries {
        let step = self.step_seconds();
        let mut out = Vec::with_capacity(self.candles.len());
        for (i, c) in self.candles.iter().enumerate() {
            if i > 0 {
                let prev: Candle = self.candles[i - 1];
                let mut t = prev.timestamp + step;
                while t < c.timestamp {
                    out.push(Candle::flat(t, prev.close).with_volume(0.0));
                    t += step;
                }
            }
            out.push(*c);
        }
        AssetSeries {
            symbol: self.symbol.clone(),
            interval_hours: self.interval_hours,
            candles: out,
        }
    }
}

impl AssetSeries {
    /// Writes `timestamp,symbol,open,high,low,close,volume` in the default schema.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["timestamp", "symbol", "open", "high", "low", "close", "volume"])?;
        for c in &self.candles {
            w.write_record([
                c.timestamp.to_string(),
                self.symbol.clone(),
                c.open.to_string(),
                c.high.to_string(),
                c.low.to_string(),
                c.close.to_string(),
                c.volume.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: "<series writer>".into(),
            source,
        })?;
        Ok(())
    }
}

/// Column-name mapping for candle CSV files. Names match case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CsvSchema {
    pub timestamp: String,
    pub symbol: Option<String>,
    pub open: String,
    pub high: String,
    pub low: String,
    pub close: String,
    pub volume: Option<String>,
    pub delimiter: char,
    /// Source interval; inferred from the smallest timestamp step when absent.
    pub interval_hours: Option<u32>,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema {
            timestamp: "timestamp".into(),
            symbol: Some("symbol".into()),
            open: "open".into(),
            high: "high".into(),
            low: "low".into(),
            close: "close".into(),
            volume: Some("volume".into()),
            delimiter: ',',
            interval_hours: None,
        }
    }
}

fn parse_timestamp(raw: &str) -> Option<i64> {
    let raw = raw.trim();
    let value = match raw.parse::<i64>() {
        Ok(v) => v,
        Err(_) => {
            let f = raw.parse::<f64>().ok()?;
            if !f.is_finite() || f.fract() != 0.0 {
                return None;
            }
            f as i64
        }
    };
    if value.abs() > MILLIS_THRESHOLD {
        Some(value.div_euclid(1000))
    } else {
        Some(value)
    }
}

/// Reads one asset's candles from a CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<AssetSeries> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let fallback_symbol = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "ASSET".into());
    read_csv(file, schema, &fallback_symbol)
}

/// Reads candles from any CSV source. `fallback_symbol` is used when the
/// schema has no symbol column or the column is absent.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema, fallback_symbol: &str) -> Result<AssetSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter as u8)
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
    };
    let require = |name: &str| find(name).ok_or_else(|| DataError::MissingColumn(name.to_string()));
    let ts_col = require(&schema.timestamp)?;
    let cols = [
        (require(&schema.open)?, "open"),
        (require(&schema.high)?, "high"),
        (require(&schema.low)?, "low"),
        (require(&schema.close)?, "close"),
    ];
    let vol_col = schema.volume.as_deref().and_then(find);
    let sym_col = schema.symbol.as_deref().and_then(find);

    let mut symbol: Option<String> = None;
    let mut candles = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let malformed = |reason: String| DataError::MalformedRow { line, reason };
        let field = |idx: usize| {
            record
                .get(idx)
                .ok_or_else(|| malformed(format!("missing field {idx}")))
        };
        let ts = parse_timestamp(field(ts_col)?)
            .ok_or_else(|| malformed(format!("bad timestamp `{}`", record.get(ts_col).unwrap_or(""))))?;
        let mut prices = [0.0; 4];
        for (slot, (idx, name)) in prices.iter_mut().zip(cols) {
            let raw = field(idx)?;
            let v: f64 = raw
                .parse()
                .map_err(|_| malformed(format!("bad {name} value `{raw}`")))?;
            if !(v.is_finite() && v > 0.0) {
                return Err(DataError::NonPositivePrice { line, field: name });
            }
            *slot = v;
        }
        let volume = match vol_col {
            Some(idx) => {
                let raw = field(idx)?;
                if raw.is_empty() {
                    None
                } else {
                    Some(
                        raw.parse::<f64>()
                            .map_err(|_| malformed(format!("bad volume value `{raw}`")))?,
                    )
                }
            }
            None => None,
        };
        if symbol.is_none() {
            if let Some(idx) = sym_col {
                symbol = record.get(idx).filter(|s| !s.is_empty()).map(str::to_string);
            }
        }
        let candle = Candle {
            timestamp: ts,
            open: prices[0],
            high: prices[1],
            low: prices[2],
            close: prices[3],
            volume,
        };
        candle.validate().map_err(|e| malformed(e.to_string()))?;
        candles.push(candle);
    }

    candles.sort_by_key(|c| c.timestamp);
    if let Some(w) = candles.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
        return Err(DataError::DuplicateTimestamp(w[0].timestamp));
    }
    let symbol = symbol.unwrap_or_else(|| fallback_symbol.to_string());
    if candles.is_empty() {
        return Err(DataError::EmptySeries { symbol });
    }
    let interval_hours = match schema.interval_hours {
        Some(h) => h,
        None => infer_interval_hours(&candles)?,
    };
    AssetSeries::new(symbol, interval_hours, candles)
}

fn infer_interval_hours(candles: &[Candle]) -> Result<u32> {
    let min_step = candles
        .windows(2)
        .map(|w| w[1].timestamp - w[0].timestamp)
        .min();
    match min_step {
        None => Ok(1),
        Some(dt) if dt > 0 && dt % SECONDS_PER_HOUR == 0 => Ok((dt / SECONDS_PER_HOUR) as u32),
        Some(_) => Err(DataError::IrregularSpacing {
            timestamp: candles[0].timestamp,
        }),
    }
}

fn aggregate(bucket: &[Candle]) -> Candle {
    let first = bucket[0];
    let last = bucket[bucket.len() - 1];
    let volume = bucket
        .iter()
        .map(|c| c.volume)
        .try_fold(0.0, |acc, v| v.map(|v| acc + v));
    Candle {
        timestamp: first.timestamp,
        open: first.open,
        high: bucket.iter().map(|c| c.high).fold(f64::NEG_INFINITY, f64::max),
        low: bucket.iter().map(|c| c.low).fold(f64::INFINITY, f64::min),
        close: last.close,
        volume,
    }
}

/// Aggregates a gap-free series into `target_hours` buckets starting at the
/// first timestamp. A trailing partial bucket is dropped.
pub fn resample(series: &AssetSeries, target_hours: u32) -> Result<AssetSeries> {
    if target_hours == 0 || target_hours % series.interval_hours != 0 {
        return Err(DataError::NonMultipleInterval {
            target: target_hours,
            source_hours: series.interval_hours,
        });
    }
    series.check_contiguous()?;
    let k = (target_hours / series.interval_hours) as usize;
    let candles: Vec<Candle> = series.candles.chunks_exact(k).map(aggregate).collect();
    if candles.is_empty() {
        return Err(DataError::InsufficientRows {
            needed: k,
            available: series.len(),
        });
    }
    Ok(AssetSeries {
        symbol: series.symbol.clone(),
        interval_hours: target_hours,
        candles,
    })
}

/// Rows each input series lost when restricted to the common timestamps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignDiagnostics {
    pub dropped_rows: Vec<(String, usize)>,
}

/// `M` assets sharing one timestamp vector. `candles[i][t]` is asset `i` at row `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketFrame {
    pub symbols: Vec<String>,
    pub interval_hours: u32,
    pub timestamps: Vec<i64>,
    pub candles: Vec<Vec<Candle>>,
}

pub fn align(series_list: &[AssetSeries]) -> Result<(MarketFrame, AlignDiagnostics)> {
    let first = series_list.first().ok_or(DataError::NoSeries)?;
    let interval_hours = first.interval_hours;
    if let Some(s) = series_list.iter().find(|s| s.interval_hours != interval_hours) {
        return Err(DataError::IntervalMismatch(interval_hours, s.interval_hours));
    }
    let mut common: BTreeSet<i64> = first.candles.iter().map(|c| c.timestamp).collect();
    for s in &series_list[1..] {
        let ts: BTreeSet<i64> = s.candles.iter().map(|c| c.timestamp).collect();
        common = common.intersection(&ts).copied().collect();
    }
    if common.is_empty() {
        return Err(DataError::EmptyIntersection);
    }
    let mut dropped_rows = Vec::with_capacity(series_list.len());
    let candles: Vec<Vec<Candle>> = series_list
        .iter()
        .map(|s| {
            let kept: Vec<Candle> = s
                .candles
                .iter()
                .filter(|c| common.contains(&c.timestamp))
                .copied()
                .collect();
            dropped_rows.push((s.symbol.clone(), s.len() - kept.len()));
            kept
        })
        .collect();
    let frame = MarketFrame {
        symbols: series_list.iter().map(|s| s.symbol.clone()).collect(),
        interval_hours,
        timestamps: common.into_iter().collect(),
        candles,
    };
    Ok((frame, AlignDiagnostics { dropped_rows }))
}

/// Train and test slices of one frame. Each slice starts with `warmup`
/// history rows; the ranges give the post-warmup rows in the source frame.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSplit {
    pub train: MarketFrame,
    pub test: MarketFrame,
    pub warmup: usize,
    pub train_rows: Range<usize>,
    pub test_rows: Range<usize>,
}

/// Row ranges of a split without materializing the slices.
pub fn split_ranges(
    len: usize,
    train_steps: usize,
    test_steps: usize,
    warmup: usize,
) -> Result<(Range<usize>, Range<usize>)> {
    let needed = warmup + train_steps + test_steps;
    if len < needed || train_steps == 0 || test_steps == 0 {
        return Err(DataError::InsufficientRows {
            needed: needed.max(warmup + 2),
            available: len,
        });
    }
    let train = warmup..warmup + train_steps;
    let test = train.end..train.end + test_steps;
    Ok((train, test))
}

pub fn split(frame: &MarketFrame, train_steps: usize, test_steps: usize, warmup: usize) -> Result<EpisodeSplit> {
    let (train_rows, test_rows) = split_ranges(frame.len(), train_steps, test_steps, warmup)?;
    Ok(EpisodeSplit {
        train: frame.slice(train_rows.start - warmup..train_rows.end),
        test: frame.slice(test_rows.start - warmup..test_rows.end),
        warmup,
        train_rows,
        test_rows,
    })
}

impl MarketFrame {
    pub fn new(
        symbols: Vec<String>,
        interval_hours: u32,
        timestamps: Vec<i64>,
        candles: Vec<Vec<Candle>>,
    ) -> Result<Self> {
        if symbols.is_empty() || symbols.len() != candles.len() {
            return Err(DataError::NoSeries);
        }
        for row in &candles {
            if row.len() != timestamps.len() {
                return Err(DataError::InconsistentFrames(
                    "asset rows differ in length from the timestamp vector".into(),
                ));
            }
            for (c, &t) in row.iter().zip(&timestamps) {
                if c.timestamp != t {
                    return Err(DataError::InconsistentFrames(format!(
                        "candle timestamp {} does not match frame timestamp {t}",
                        c.timestamp
                    )));
                }
                c.validate()?;
            }
        }
        if timestamps.windows(2).any(|w| w[1] <= w[0]) {
            return Err(DataError::IrregularSpacing {
                timestamp: timestamps.first().copied().unwrap_or_default(),
            });
        }
        Ok(MarketFrame {
            symbols,
            interval_hours,
            timestamps,
            candles,
        })
    }

    /// Number of rows `T`.
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// Number of assets `M`.
    pub fn n_assets(&self) -> usize {
        self.symbols.len()
    }

    #[inline]
    pub fn close(&self, asset: usize, row: usize) -> f64 {
        self.candles[asset][row].close
    }

    /// Close-to-close simple returns from `row` to `row + 1` for every asset.
    pub fn step_returns(&self, row: usize) -> Vec<f64> {
        (0..self.n_assets())
            .map(|i| self.close(i, row + 1) / self.close(i, row) - 1.0)
            .collect()
    }

    pub fn slice(&self, rows: Range<usize>) -> MarketFrame {
        MarketFrame {
            symbols: self.symbols.clone(),
            interval_hours: self.interval_hours,
            timestamps: self.timestamps[rows.clone()].to_vec(),
            candles: self.candles.iter().map(|c| c[rows.clone()].to_vec()).collect(),
        }
    }

    /// Index of the last row with timestamp `<= t`.
    pub fn row_at_or_before(&self, t: i64) -> Option<usize> {
        match self.timestamps.binary_search(&t) {
            Ok(i) => Some(i),
            Err(0) => None,
            Err(i) => Some(i - 1),
        }
    }

    pub fn row_of(&self, t: i64) -> Option<usize> {
        self.timestamps.binary_search(&t).ok()
    }

    pub fn series(&self, asset: usize) -> AssetSeries {
        AssetSeries {
            symbol: self.symbols[asset].clone(),
            interval_hours: self.interval_hours,
            candles: self.candles[asset].clone(),
        }
    }

    /// Resamples every asset onto the same bucket grid.
    pub fn resample(&self, target_hours: u32) -> Result<MarketFrame> {
        let series = (0..self.n_assets())
            .map(|i| resample(&self.series(i), target_hours))
            .collect::<Result<Vec<_>>>()?;
        Ok(align(&series)?.0)
    }

    /// Writes `timestamp,<SYM>_open,<SYM>_high,<SYM>_low,<SYM>_close,...`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["timestamp".to_string()];
        for s in &self.symbols {
            for f in ["open", "high", "low", "close"] {
                header.push(format!("{s}_{f}"));
            }
        }
        w.write_record(&header)?;
        for (t, ts) in self.timestamps.iter().enumerate() {
            let mut row = vec![ts.to_string()];
            for asset in &self.candles {
                let c = asset[t];
                row.extend([c.open, c.high, c.low, c.close].iter().map(|v| v.to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush().map_err(|source| DataError::Io {
            path: "<frame writer>".into(),
            source,
        })?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, interval_hours: u32) -> Result<MarketFrame> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.get(0) != Some("timestamp") || (headers.len() - 1) % 4 != 0 || headers.len() < 5 {
            return Err(DataError::MissingColumn("timestamp + OHLC groups".into()));
        }
        let symbols: Vec<String> = (1..headers.len())
            .step_by(4)
            .map(|i| {
                headers[i]
                    .strip_suffix("_open")
                    .unwrap_or(&headers[i])
                    .to_string()
            })
            .collect();
        let mut timestamps = Vec::new();
        let mut candles: Vec<Vec<Candle>> = vec![Vec::new(); symbols.len()];
        for record in rdr.records() {
            let record = record?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let num = |i: usize| -> Result<f64> {
                record
                    .get(i)
                    .and_then(|s| s.parse().ok())
                    .ok_or(DataError::MalformedRow {
                        line,
                        reason: format!("bad value in column {i}"),
                    })
            };
            let ts: i64 = record
                .get(0)
                .and_then(|s| s.parse().ok())
                .ok_or(DataError::MalformedRow {
                    line,
                    reason: "bad timestamp".into(),
                })?;
            timestamps.push(ts);
            for (a, slot) in candles.iter_mut().enumerate() {
                let base = 1 + 4 * a;
                slot.push(Candle {
                    timestamp: ts,
                    open: num(base)?,
                    high: num(base + 1)?,
                    low: num(base + 2)?,
                    close: num(base + 3)?,
                    volume: None,
                });
            }
        }
        MarketFrame::new(symbols, interval_hours, timestamps, candles)
    }
}

/// Source-interval frame (observations) paired with the rebalancing-interval
/// frame (returns and accounting). Interval row `j` aggregates source rows
/// `j*ratio .. (j+1)*ratio`, and its decision is taken at the close of source
/// row `(j+1)*ratio - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketData {
    pub source: MarketFrame,
    pub interval: MarketFrame,
    pub ratio: usize,
}

impl MarketData {
    pub fn new(source: MarketFrame, interval: MarketFrame) -> Result<Self> {
        if source.symbols != interval.symbols {
            return Err(DataError::InconsistentFrames("symbol lists differ".into()));
        }
        if interval.interval_hours % source.interval_hours != 0 {
            return Err(DataError::NonMultipleInterval {
                target: interval.interval_hours,
                source_hours: source.interval_hours,
            });
        }
        let ratio = (interval.interval_hours / source.interval_hours) as usize;
        if source.len() < interval.len() * ratio {
            return Err(DataError::InconsistentFrames(format!(
                "source frame has {} rows, interval frame needs {}",
                source.len(),
                interval.len() * ratio
            )));
        }
        for (j, &t) in interval.timestamps.iter().enumerate() {
            if source.timestamps[j * ratio] != t {
                return Err(DataError::InconsistentFrames(format!(
                    "interval row {j} (t={t}) does not start at source row {}",
                    j * ratio
                )));
            }
        }
        Ok(MarketData {
            source,
            interval,
            ratio,
        })
    }

    /// Builds the pair by resampling a contiguous source frame.
    pub fn from_source(source: MarketFrame, target_hours: u32) -> Result<Self> {
        let interval = source.resample(target_hours)?;
        let ratio = (target_hours / source.interval_hours) as usize;
        let source = source.slice(0..interval.len() * ratio);
        MarketData::new(source, interval)
    }

    /// Uses one frame for both roles.
    pub fn single(frame: MarketFrame) -> Self {
        MarketData {
            source: frame.clone(),
            interval: frame,
            ratio: 1,
        }
    }

    pub fn n_assets(&self) -> usize {
        self.interval.n_assets()
    }

    /// Source row whose close coincides with the decision at interval row `row`.
    pub fn decision_source_row(&self, row: usize) -> usize {
        (row + 1) * self.ratio - 1
    }

    /// Interval rows needed before the first decision so that `history`
    /// source rows are available.
    pub fn warmup_rows(&self, history: usize) -> usize {
        let needed = history.saturating_sub(self.ratio);
        needed.div_ceil(self.ratio)
    }

    /// Slices both frames by interval rows.
    pub fn slice(&self, rows: Range<usize>) -> MarketData {
        MarketData {
            source: self
                .source
                .slice(rows.start * self.ratio..rows.end * self.ratio),
            interval: self.interval.slice(rows),
            ratio: self.ratio,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hourly(symbol: &str, start: i64, closes: &[f64]) -> AssetSeries {
        let candles = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| Candle::flat(start + i as i64 * SECONDS_PER_HOUR, c))
            .collect();
        AssetSeries::new(symbol, 1, candles).unwrap()
    }

    const CSV3: &str = "timestamp,symbol,open,high,low,close,volume\n\
        0,BTC,1,2,0.5,1.5,10\n\
        3600,BTC,1.5,2,1,1.8,11\n\
        7200,BTC,1.8,2.2,1.7,2,12\n";

    #[test]
    fn load_well_formed() {
        let s = read_csv(CSV3.as_bytes(), &CsvSchema::default(), "x").unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.symbol, "BTC");
        assert_eq!(s.interval_hours, 1);
        assert_eq!(s.timestamps(), vec![0, 3600, 7200]);
        assert_eq!(s.candles[2].volume, Some(12.0));
    }

    #[test]
    fn load_out_of_order_matches_sorted() {
        let shuffled = "timestamp,symbol,open,high,low,close,volume\n\
            7200,BTC,1.8,2.2,1.7,2,12\n\
            0,BTC,1,2,0.5,1.5,10\n\
            3600,BTC,1.5,2,1,1.8,11\n";
        let a = read_csv(CSV3.as_bytes(), &CsvSchema::default(), "x").unwrap();
        let b = read_csv(shuffled.as_bytes(), &CsvSchema::default(), "x").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn load_rejects_duplicates_and_bad_rows() {
        let dup = "timestamp,open,high,low,close\n0,1,1,1,1\n3600,1,1,1,1\n3600,1,1,1,1\n";
        let err = read_csv(dup.as_bytes(), &CsvSchema::default(), "x").unwrap_err();
        assert!(matches!(err, DataError::DuplicateTimestamp(3600)), "{err}");
        assert!(err.to_string().contains("3600"));

        let neg = "timestamp,open,high,low,close\n0,1,1,1,1\n3600,1,1,-1,1\n";
        let err = read_csv(neg.as_bytes(), &CsvSchema::default(), "x").unwrap_err();
        assert!(matches!(err, DataError::NonPositivePrice { line: 3, field: "low" }), "{err}");

        let junk = "timestamp,open,high,low,close\n0,1,1,1,1\nabc,1,1,1,1\n";
        let err = read_csv(junk.as_bytes(), &CsvSchema::default(), "x").unwrap_err();
        assert!(matches!(err, DataError::MalformedRow { line: 3, .. }), "{err}");
    }

    #[test]
    fn millisecond_timestamps_detected() {
        let ms = "timestamp,open,high,low,close\n1620000000000,1,1,1,1\n1620003600000,1,1,1,1\n";
        let s = read_csv(ms.as_bytes(), &CsvSchema::default(), "ETH").unwrap();
        assert_eq!(s.timestamps(), vec![1_620_000_000, 1_620_003_600]);
        assert_eq!(s.symbol, "ETH");
    }

    #[test]
    fn custom_schema_and_delimiter() {
        let text = "unix;o;h;l;c\n0;1;1;1;1\n14400;1;1;1;1\n";
        let schema = CsvSchema {
            timestamp: "unix".into(),
            open: "o".into(),
            high: "h".into(),
            low: "l".into(),
            close: "c".into(),
            volume: None,
            symbol: None,
            delimiter: ';',
            interval_hours: None,
        };
        let s = read_csv(text.as_bytes(), &schema, "SOL").unwrap();
        assert_eq!(s.interval_hours, 4);
    }

    #[test]
    fn resample_hand_aggregation() {
        let o = [1.0, 2.0, 3.0, 4.0];
        let h = [5.0, 6.0, 7.0, 8.0];
        let l = [0.5, 0.6, 0.7, 0.4];
        let c = [2.0, 3.0, 4.0, 5.0];
        let candles = (0..4)
            .map(|i| Candle {
                timestamp: i as i64 * SECONDS_PER_HOUR,
                open: o[i],
                high: h[i],
                low: l[i],
                close: c[i],
                volume: Some(1.0 + i as f64),
            })
            .collect();
        let s = AssetSeries::new("A", 1, candles).unwrap();
        let r = resample(&s, 4).unwrap();
        assert_eq!(r.len(), 1);
        let bar = r.candles[0];
        assert_eq!((bar.open, bar.high, bar.low, bar.close), (1.0, 8.0, 0.4, 5.0));
        assert_eq!(bar.volume, Some(10.0));
        assert_eq!(bar.timestamp, 0);
    }

    #[test]
    fn resample_identity_and_errors() {
        let s = hourly("A", 0, &[1.0, 2.0, 3.0]);
        assert_eq!(resample(&s, 1).unwrap(), s);

        let mut gappy = s.clone();
        gappy.candles.remove(1);
        assert!(matches!(resample(&gappy, 1), Err(DataError::Gap { after: 0, .. })));

        let four = resample(&hourly("A", 0, &[1.0; 8]), 4).unwrap();
        assert!(matches!(
            resample(&four, 6),
            Err(DataError::NonMultipleInterval { .. })
        ));
    }

    #[test]
    fn fill_gaps_carries_close() {
        let mut s = hourly("A", 0, &[1.0, 2.0, 3.0, 4.0]);
        s.candles.remove(2);
        let filled = s.fill_gaps();
        assert_eq!(filled.len(), 4);
        assert_eq!(filled.candles[2], Candle::flat(7200, 2.0).with_volume(0.0));
        assert!(filled.check_contiguous().is_ok());
    }

    #[test]
    fn align_cases() {
        let a = hourly("A", 0, &[1.0; 10]);
        let b = hourly("B", 5 * SECONDS_PER_HOUR, &[2.0; 10]);
        let (frame, diag) = align(&[a.clone(), b]).unwrap();
        assert_eq!(frame.len(), 5);
        assert_eq!(frame.timestamps[0], 5 * SECONDS_PER_HOUR);
        assert_eq!(*frame.timestamps.last().unwrap(), 9 * SECONDS_PER_HOUR);
        assert_eq!(diag.dropped_rows, vec![("A".into(), 5), ("B".into(), 5)]);

        let (same, _) = align(&[a.clone(), a.clone()]).unwrap();
        assert_eq!(same.len(), 10);

        let far = hourly("C", 100 * SECONDS_PER_HOUR, &[1.0; 3]);
        assert!(matches!(align(&[a, far]), Err(DataError::EmptyIntersection)));
    }

    #[test]
    fn split_cases() {
        let (frame, _) = align(&[hourly("A", 0, &[1.0, 2.0])]).unwrap();
        let sp = split(&frame, 1, 1, 0).unwrap();
        assert_eq!(sp.train.len(), 1);
        assert_eq!(sp.test.timestamps, vec![SECONDS_PER_HOUR]);
        assert!(split(&frame, 2, 1, 0).is_err());

        let closes: Vec<f64> = (0..2178 + 732 + 12).map(|i| 100.0 + i as f64).collect();
        let (big, _) = align(&[hourly("A", 0, &closes)]).unwrap();
        let sp = split(&big, 2178, 732, 12).unwrap();
        assert_eq!(sp.train.len(), 12 + 2178);
        assert_eq!(sp.test.len(), 12 + 732);
        assert_eq!(sp.test_rows.start, sp.train_rows.end);
        // test warmup rows are the tail of train
        assert_eq!(sp.test.timestamps[..12], sp.train.timestamps[2178..]);
    }

    #[test]
    fn frame_csv_round_trip() {
        let (frame, _) = align(&[
            hourly("A", 0, &[1.1, 2.2, 3.3]),
            hourly("B", 0, &[0.1 + 0.2, 7.0, 1e-7]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        frame.write_csv(&mut buf).unwrap();
        let back = MarketFrame::read_csv(buf.as_slice(), 1).unwrap();
        assert_eq!(back, frame);
    }

    #[test]
    fn market_data_pairing() {
        let closes: Vec<f64> = (0..18).map(|i| 10.0 + i as f64).collect();
        let (frame, _) = align(&[hourly("A", 0, &closes)]).unwrap();
        let md = MarketData::from_source(frame, 4).unwrap();
        assert_eq!(md.ratio, 4);
        assert_eq!(md.interval.len(), 4);
        assert_eq!(md.source.len(), 16);
        assert_eq!(md.decision_source_row(0), 3);
        assert_eq!(md.interval.close(0, 1), md.source.close(0, 7));
        // 49 source rows at ratio 4 need 12 interval rows of warmup
        let md4 = MarketData { ratio: 4, ..md.clone() };
        assert_eq!(md4.warmup_rows(49), 12);
        assert_eq!(MarketData::single(md.interval.clone()).warmup_rows(3), 2);
        let sl = md.slice(1..3);
        assert_eq!(sl.source.timestamps[0], md.interval.timestamps[1]);
        assert!(MarketData::new(sl.source.clone(), sl.interval.clone()).is_ok());
    }
}
