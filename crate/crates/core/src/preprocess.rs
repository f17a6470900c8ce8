//! Relative-price state tensors and observation noise.

use std::io::Write;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MarketFrame;

pub const N_FEATURES: usize = 4;

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessError {
    #[error("insufficient history: need {needed} rows at or before t={t}, have {available}")]
    InsufficientHistory { t: i64, needed: usize, available: usize },
    #[error("zero base price for asset {asset}, feature {feature}")]
    ZeroBasePrice { asset: usize, feature: usize },
    #[error("history length must be at least 1")]
    EmptyWindow,
}

/// Assets x features(open, high, low, close) x history, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTensor {
    pub assets: usize,
    pub history: usize,
    pub t: i64,
    pub values: Vec<f64>,
}

impl StateTensor {
    pub fn zeros(assets: usize, history: usize, t: i64) -> Self {
        StateTensor {
            assets,
            history,
            t,
            values: vec![0.0; assets * N_FEATURES * history],
        }
    }

    #[inline]
    pub fn index(&self, asset: usize, feature: usize, k: usize) -> usize {
        (asset * N_FEATURES + feature) * self.history + k
    }

    #[inline]
    pub fn get(&self, asset: usize, feature: usize, k: usize) -> f64 {
        self.values[self.index(asset, feature, k)]
    }

    pub fn row(&self, asset: usize, feature: usize) -> &[f64] {
        let start = self.index(asset, feature, 0);
        &self.values[start..start + self.history]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.assets, N_FEATURES, self.history)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Writes `asset,feature,k,value` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        const NAMES: [&str; N_FEATURES] = ["open", "high", "low", "close"];
        writeln!(out, "asset,feature,k,value")?;
        for a in 0..self.assets {
            for (f, name) in NAMES.iter().enumerate() {
                for k in 0..self.history {
                    writeln!(out, "{a},{name},{k},{}", self.get(a, f, k))?;
                }
            }
        }
        Ok(())
    }
}

/// Normalizes the `history` rows ending at `end_row`: entry `k` of each
/// feature row is `x[start + k] / x[start] - 1`.
pub fn build_state_at(frame: &MarketFrame, end_row: usize, history: usize) -> Result<StateTensor, PreprocessError> {
    if history == 0 {
        return Err(PreprocessError::EmptyWindow);
    }
    if end_row >= frame.len() || end_row + 1 < history {
        return Err(PreprocessError::InsufficientHistory {
            t: frame.timestamps.get(end_row).copied().unwrap_or(i64::MAX),
            needed: history,
            available: (end_row + 1).min(frame.len()),
        });
    }
    let start = end_row + 1 - history;
    let mut state = StateTensor::zeros(frame.n_assets(), history, frame.timestamps[end_row]);
    for (a, candles) in frame.candles.iter().enumerate() {
        let window = &candles[start..=end_row];
        for f in 0..N_FEATURES {
            let base = window[0].feature(f);
            if base == 0.0 {
                return Err(PreprocessError::ZeroBasePrice { asset: a, feature: f });
            }
            let offset = state.index(a, f, 0);
            state.values[offset] = 0.0;
            for (k, c) in window.iter().enumerate().skip(1) {
                state.values[offset + k] = c.feature(f) / base - 1.0;
            }
        }
    }
    Ok(state)
}

/// State at decision time `t` (the last row at or before `t`).
pub fn build_state(frame: &MarketFrame, t: i64, history: usize) -> Result<StateTensor, PreprocessError> {
    match frame.row_at_or_before(t) {
        Some(row) => build_state_at(frame, row, history),
        None => Err(PreprocessError::InsufficientHistory {
            t,
            needed: history,
            available: 0,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Multiplier on each feature row's own standard deviation.
    pub scale: f64,
    pub enabled: bool,
    pub seed: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            scale: 0.01,
            enabled: true,
            seed: 0,
        }
    }
}

impl NoiseSpec {
    pub fn disabled() -> Self {
        NoiseSpec {
            enabled: false,
            ..Default::default()
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn row_std(row: &[f64]) -> f64 {
    let n = row.len() as f64;
    let mean = row.iter().sum::<f64>() / n;
    (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

/// Adds i.i.d. normal noise with standard deviation `scale * std(row)` to
/// every element of each asset/feature row.
pub fn inject_noise<R: Rng + ?Sized>(tensor: &StateTensor, spec: &NoiseSpec, rng: &mut R) -> StateTensor {
    let mut out = tensor.clone();
    if !spec.enabled || spec.scale <= 0.0 {
        return out;
    }
    for a in 0..tensor.assets {
        for f in 0..N_FEATURES {
            let sd = spec.scale * row_std(tensor.row(a, f));
            let offset = tensor.index(a, f, 0);
            for k in 0..tensor.history {
                let eps: f64 = rng.sample(StandardNormal);
                out.values[offset + k] += sd * eps;
            }
        }
    }
    out
}
