//! The six experiment commands. Each writes its outputs plus the resolved
//! config into the output directory.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use duplex_agent::checkpoint::Checkpoint;
use duplex_agent::envs::PortfolioEnv;
use duplex_agent::policy::ActorPolicy;
use duplex_agent::train::{train, write_curve_csv, CurvePoint};
use duplex_agent::{rng, ReplayBuffer, Sac};
use duplex_core::backtest::{run_episode, EqualWeight, Policy, SppoPolicy};
use duplex_core::data::{align, load_csv, split_ranges, AlignDiagnostics, AssetSeries, MarketData, MarketFrame};
use duplex_core::metrics::{
    compute_report, weight_return_distribution, write_comparison_csv, Distribution, MetricsReport,
};
use duplex_core::sppo::{self, FrontierPoint, ReturnSample};
use duplex_core::trace::EpisodeTrace;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, Strategy};
use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const SOURCE_FRAME: &str = "source.csv";
pub const INTERVAL_FRAME: &str = "interval.csv";
pub const TRACE: &str = "trace.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";
pub const CHECKPOINT: &str = "checkpoint.bin";
pub const CURVE: &str = "curve.csv";
pub const FRONTIER: &str = "frontier.csv";
pub const COMPARISON: &str = "comparison.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub symbols: Vec<String>,
    pub assets: usize,
    pub source_interval_hours: u32,
    pub interval_hours: u32,
    pub source_rows: usize,
    pub interval_rows: usize,
    pub history: usize,
    pub warmup: usize,
    pub train_rows: [usize; 2],
    pub test_rows: [usize; 2],
    pub dropped_rows: Vec<(String, usize)>,
    /// SHA-256 of each frame file.
    pub files: BTreeMap<String, String>,
    /// SHA-256 over the frame hashes in file-name order.
    pub hash: String,
}

/// Loaded frames and the split derived from the config.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub data: Arc<MarketData>,
    pub warmup: usize,
    pub train_rows: Range<usize>,
    pub test_rows: Range<usize>,
    pub diagnostics: AlignDiagnostics,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Runtime(format!("{}: {e}", path.display()))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn load_series(cfg: &ExperimentConfig) -> Result<Vec<AssetSeries>> {
    if cfg.data.paths.is_empty() {
        return Err(CliError::Config("data.paths is empty".into()));
    }
    let mut out = Vec::with_capacity(cfg.data.paths.len());
    for path in &cfg.data.paths {
        if !path.is_file() {
            return Err(CliError::Config(format!("data file {} does not exist", path.display())));
        }
        let series = load_csv(path, &cfg.data.schema).map_err(|e| CliError::from(e).context(path.display()))?;
        let series = if cfg.data.fill_gaps { series.fill_gaps() } else { series };
        series
            .check_contiguous()
            .map_err(|e| CliError::from(e).context(path.display()))?;
        out.push(series);
    }
    Ok(out)
}

fn finish_dataset(data: MarketData, cfg: &ExperimentConfig, diagnostics: AlignDiagnostics) -> Result<Dataset> {
    let warmup = data.warmup_rows(cfg.env.history);
    // The last row only supplies the return of the final decision.
    let usable = data.interval.len().saturating_sub(1);
    let (train_rows, test_rows) = split_ranges(usable, cfg.data.train_steps, cfg.data.test_steps, warmup)?;
    Ok(Dataset {
        data: Arc::new(data),
        warmup,
        train_rows,
        test_rows,
        diagnostics,
    })
}

/// Runs the ingestion pipeline on the configured files.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let series = load_series(cfg)?;
    let (frame, diagnostics) = align(&series)?;
    let data = MarketData::from_source(frame, cfg.data.interval_hours)?;
    finish_dataset(data, cfg, diagnostics)
}

/// Reads the frames written by `ingest`, checking them against the manifest.
pub fn load_ingested(dir: &Path, cfg: &ExperimentConfig) -> Result<Dataset> {
    let mpath = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&mpath).map_err(|e| CliError::Data(format!("{}: {e}", mpath.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", mpath.display())))?;
    if manifest.interval_hours != cfg.data.interval_hours {
        return Err(CliError::Config(format!(
            "ingested data is at {}h, config asks for {}h",
            manifest.interval_hours, cfg.data.interval_hours
        )));
    }
    let read = |name: &str, hours: u32| -> Result<MarketFrame> {
        let path = dir.join(name);
        let bytes = std::fs::read(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if manifest.files.get(name) != Some(&sha256_hex(&bytes)) {
            return Err(CliError::Data(format!("{} does not match the manifest hash", path.display())));
        }
        Ok(MarketFrame::read_csv(bytes.as_slice(), hours).map_err(|e| CliError::from(e).context(path.display()))?)
    };
    let source = read(SOURCE_FRAME, manifest.source_interval_hours)?;
    let interval = read(INTERVAL_FRAME, manifest.interval_hours)?;
    let data = MarketData::new(source, interval)?;
    let diagnostics = AlignDiagnostics {
        dropped_rows: manifest.dropped_rows,
    };
    finish_dataset(data, cfg, diagnostics)
}

/// Ingested directory when given, configured files otherwise. Also fixes the
/// network's asset count to the data.
pub fn prepare(cfg: &mut ExperimentConfig, data_dir: Option<&Path>) -> Result<Dataset> {
    let ds = match data_dir {
        Some(dir) => load_ingested(dir, cfg)?,
        None => load_dataset(cfg)?,
    };
    cfg.network.assets = ds.data.n_assets();
    Ok(ds)
}

pub fn ingest(cfg: &mut ExperimentConfig) -> Result<Manifest> {
    let ds = prepare(cfg, None)?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    let mut files = BTreeMap::new();
    for (name, frame) in [(SOURCE_FRAME, &ds.data.source), (INTERVAL_FRAME, &ds.data.interval)] {
        let mut bytes = Vec::new();
        frame.write_csv(&mut bytes)?;
        write_text(&out.join(name), std::str::from_utf8(&bytes).expect("csv is utf-8"))?;
        files.insert(name.to_string(), sha256_hex(&bytes));
    }
    let hash = sha256_hex(files.values().cloned().collect::<Vec<_>>().concat().as_bytes());
    let manifest = Manifest {
        symbols: ds.data.interval.symbols.clone(),
        assets: ds.data.n_assets(),
        source_interval_hours: ds.data.source.interval_hours,
        interval_hours: ds.data.interval.interval_hours,
        source_rows: ds.data.source.len(),
        interval_rows: ds.data.interval.len(),
        history: cfg.env.history,
        warmup: ds.warmup,
        train_rows: [ds.train_rows.start, ds.train_rows.end],
        test_rows: [ds.test_rows.start, ds.test_rows.end],
        dropped_rows: ds.diagnostics.dropped_rows.clone(),
        files,
        hash,
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_text(&out.join(MANIFEST), &json)?;
    cfg.persist(&out)?;
    Ok(manifest)
}

pub struct BacktestOutput {
    pub label: String,
    pub trace: EpisodeTrace,
    pub report: MetricsReport,
}

fn policy_for(cfg: &ExperimentConfig) -> Result<Box<dyn Policy>> {
    Ok(match cfg.strategy {
        Strategy::EqualWeight => Box::new(EqualWeight),
        Strategy::Sppo(_) => Box::new(SppoPolicy {
            config: cfg.sppo.clone(),
        }),
        Strategy::Rl(_) => {
            let path = cfg
                .checkpoint
                .as_ref()
                .ok_or_else(|| CliError::Config(format!("strategy {} needs a checkpoint", cfg.strategy)))?;
            let actor = Checkpoint::load(path)
                .map_err(|e| CliError::from(e).context(path.display()))?
                .actor(Some(&cfg.network))
                .map_err(|e| CliError::from(e).context(path.display()))?;
            Box::new(ActorPolicy {
                actor,
                label: cfg.strategy.label(&cfg.sppo),
            })
        }
    })
}

/// Runs the configured strategy over the test slice.
pub fn backtest(cfg: &mut ExperimentConfig, data_dir: Option<&Path>) -> Result<BacktestOutput> {
    let ds = prepare(cfg, data_dir)?;
    let mut policy = policy_for(cfg)?;
    let trace = run_episode(
        policy.as_mut(),
        cfg.env.clone(),
        ds.data.clone(),
        ds.test_rows.start,
        ds.test_rows.end,
    )?;
    let report = compute_report(&trace, cfg.metrics.annualization_factor)?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    trace.save(out.join(TRACE))?;
    write_text(&out.join(REPORT_JSON), &report.to_json())?;
    report.write_csv(create(&out.join(REPORT_CSV))?)?;
    cfg.persist(&out)?;
    Ok(BacktestOutput {
        label: cfg.strategy.label(&cfg.sppo),
        trace,
        report,
    })
}

/// Trains an agent on the train slice with observation noise.
pub fn train_agent(cfg: &mut ExperimentConfig, data_dir: Option<&Path>) -> Result<(Sac, Vec<CurvePoint>)> {
    if !matches!(cfg.strategy, Strategy::Rl(_)) {
        return Err(CliError::Config(format!(
            "train needs an rl:* strategy, got {}",
            cfg.strategy
        )));
    }
    let ds = prepare(cfg, data_dir)?;
    let mut env = PortfolioEnv::new(
        cfg.env.clone(),
        ds.data.clone(),
        ds.train_rows.clone(),
        cfg.train.episode_len,
        cfg.train.noise,
        rng::stream(cfg.seed, rng::DATA_NOISE),
    )?;
    let mut sac = Sac::new(cfg.network.clone(), cfg.sac.clone(), &mut rng::stream(cfg.seed, rng::INIT))?;
    let mut buffer = ReplayBuffer::new(cfg.sac.buffer_capacity);
    let curve = train(&mut env, &mut sac, &mut buffer, &cfg.train.budget, cfg.seed)?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    Checkpoint::from_sac(&sac).save(out.join(CHECKPOINT))?;
    write_curve_csv(&curve, create(&out.join(CURVE))?).map_err(|e| io_err(&out.join(CURVE), e))?;
    cfg.persist(&out)?;
    Ok((sac, curve))
}

#[derive(Debug, Clone, Serialize)]
pub struct FrontierSummary {
    pub row: usize,
    pub timestamp: i64,
    pub measure: String,
    pub cash_utility: f64,
    pub points: usize,
    pub asset_weights: Vec<f64>,
    pub loan_weight: f64,
}

/// Single-date frontier at interval row `row` (first test decision by default).
pub fn frontier(
    cfg: &mut ExperimentConfig,
    data_dir: Option<&Path>,
    row: Option<usize>,
) -> Result<(Vec<FrontierPoint>, FrontierSummary)> {
    let ds = prepare(cfg, data_dir)?;
    let frame = &ds.data.interval;
    let row = row.unwrap_or(ds.test_rows.start);
    if row >= frame.len() {
        return Err(CliError::Config(format!("row {row} is past the last row {}", frame.len() - 1)));
    }
    let sample = ReturnSample::from_frame(frame, row, cfg.sppo.window)?;
    let points = sppo::efficient_frontier(&sample, &cfg.sppo)?;
    let cash = sppo::cash_utility(cfg.env.lend_rate, cfg.env.interval_hours);
    let choice = sppo::select_weights(&points, &cfg.sppo, cash)?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    sppo::write_frontier_csv(&points, &frame.symbols, create(&out.join(FRONTIER))?)
        .map_err(|e| CliError::Runtime(e.to_string()))?;
    let summary = FrontierSummary {
        row,
        timestamp: frame.timestamps[row],
        measure: cfg.sppo.measure.label().into(),
        cash_utility: cash,
        points: points.len(),
        asset_weights: choice.asset_weights,
        loan_weight: choice.loan_weight,
    };
    write_text(
        &out.join("frontier.json"),
        &serde_json::to_string_pretty(&summary).expect("summary serializes"),
    )?;
    cfg.persist(&out)?;
    Ok((points, summary))
}

/// `NAME=PATH`, or a bare path named after its directory (or file stem).
pub fn parse_trace_arg(arg: &str) -> (String, PathBuf) {
    if let Some((name, path)) = arg.split_once('=') {
        if !name.is_empty() {
            return (name.to_string(), PathBuf::from(path));
        }
    }
    let path = PathBuf::from(arg);
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    let name = match stem.as_deref() {
        Some("trace") | None => path
            .parent()
            .and_then(|p| p.file_name())
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| arg.to_string()),
        Some(s) => s.to_string(),
    };
    (name, path)
}

fn file_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// One report row per trace, and weight-times-return histograms when market data is available.
pub fn compare(
    cfg: &mut ExperimentConfig,
    data_dir: Option<&Path>,
    traces: &[(String, PathBuf)],
) -> Result<Vec<(String, MetricsReport)>> {
    if traces.len() < 2 {
        return Err(CliError::Config(format!("compare needs at least 2 traces, got {}", traces.len())));
    }
    let mut loaded = Vec::with_capacity(traces.len());
    for (name, path) in traces {
        if !path.is_file() {
            return Err(CliError::Data(format!("trace file {} not found", path.display())));
        }
        let trace = EpisodeTrace::load(path).map_err(|e| CliError::from(e).context(path.display()))?;
        loaded.push((name.clone(), trace));
    }
    let rows = loaded
        .iter()
        .map(|(name, t)| Ok((name.clone(), compute_report(t, cfg.metrics.annualization_factor)?)))
        .collect::<Result<Vec<_>>>()?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    write_comparison_csv(&rows, create(&out.join(COMPARISON))?)?;
    let frame = match data_dir {
        Some(_) => Some(prepare(cfg, data_dir)?),
        None if !cfg.data.paths.is_empty() => Some(prepare(cfg, None)?),
        None => None,
    };
    if let Some(ds) = frame {
        for (name, trace) in &loaded {
            let dist = weight_return_distribution(trace, &ds.data.interval, cfg.metrics.bins)
                .map_err(|e| CliError::from(e).context(name))?;
            write_distribution(&out, name, &dist)?;
        }
    }
    cfg.persist(&out)?;
    Ok(rows)
}

fn write_distribution(out: &Path, name: &str, dist: &Distribution) -> Result<()> {
    let stem = file_safe(name);
    dist.write_csv(create(&out.join(format!("hist_{stem}.csv")))?)?;
    write_text(
        &out.join(format!("dist_{stem}.json")),
        &serde_json::to_string_pretty(dist).expect("distribution serializes"),
    )
}

/// Metrics for one trace, plus its distribution when market data is available.
pub fn report(cfg: &mut ExperimentConfig, data_dir: Option<&Path>, trace_path: &Path) -> Result<MetricsReport> {
    if !trace_path.is_file() {
        return Err(CliError::Data(format!("trace file {} not found", trace_path.display())));
    }
    let trace = EpisodeTrace::load(trace_path).map_err(|e| CliError::from(e).context(trace_path.display()))?;
    let report = compute_report(&trace, cfg.metrics.annualization_factor)?;
    let out = cfg.out.clone();
    create_dir(&out)?;
    write_text(&out.join(REPORT_JSON), &report.to_json())?;
    report.write_csv(create(&out.join(REPORT_CSV))?)?;
    if data_dir.is_some() || !cfg.data.paths.is_empty() {
        let ds = prepare(cfg, data_dir)?;
        let (name, _) = parse_trace_arg(&trace_path.to_string_lossy());
        write_distribution(&out, &name, &weight_return_distribution(&trace, &ds.data.interval, cfg.metrics.bins)?)?;
    }
    cfg.persist(&out)?;
    Ok(report)
}
