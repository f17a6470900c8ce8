//! Deterministic synthetic markets for tests, examples and the bundled dataset.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{align, AssetSeries, Candle, MarketFrame, SECONDS_PER_HOUR};

/// 2021-01-01T00:00:00Z, a multiple of every interval up to a day.
pub const EPOCH: i64 = 1_609_459_200;

fn candle(ts: i64, open: f64, close: f64, wick: f64) -> Candle {
    Candle {
        timestamp: ts,
        open,
        high: open.max(close) * (1.0 + wick),
        low: open.min(close) * (1.0 - wick).max(0.5),
        close,
        volume: None,
    }
}

fn series_from_log_returns(symbol: &str, interval_hours: u32, start_price: f64, steps: &[(f64, f64)]) -> AssetSeries {
    let step = interval_hours as i64 * SECONDS_PER_HOUR;
    let mut price = start_price;
    let candles = steps
        .iter()
        .enumerate()
        .map(|(t, &(r, wick))| {
            let open = price;
            price = open * r.exp();
            candle(EPOCH + t as i64 * step, open, price, wick)
        })
        .collect();
    AssetSeries::new(symbol, interval_hours, candles).expect("synthetic candles are valid")
}

/// Geometric random walks with per-asset drift and volatility drawn from `seed`.
pub fn random_walk(symbols: &[&str], rows: usize, interval_hours: u32, seed: u64) -> MarketFrame {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series: Vec<AssetSeries> = symbols
        .iter()
        .map(|sym| {
            let vol = 0.004 + 0.008 * rng.random::<f64>();
            let drift = 0.0004 * (rng.random::<f64>() - 0.4);
            let start = 10.0 + 990.0 * rng.random::<f64>();
            let steps: Vec<(f64, f64)> = (0..rows)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    let u: f64 = rng.random();
                    (drift + vol * z, 0.5 * vol * u)
                })
                .collect();
            series_from_log_returns(sym, interval_hours, start, &steps)
        })
        .collect();
    align(&series).expect("common timestamps").0
}

/// Every asset moves by its constant simple return each row.
pub fn constant_returns(returns: &[f64], rows: usize, interval_hours: u32) -> MarketFrame {
    let series: Vec<AssetSeries> = returns
        .iter()
        .enumerate()
        .map(|(i, &r)| {
            let steps = vec![((1.0 + r).ln(), 0.0); rows];
            series_from_log_returns(&format!("A{}", i + 1), interval_hours, 100.0, &steps)
        })
        .collect();
    align(&series).expect("common timestamps").0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_valid() {
        let a = random_walk(&["X", "Y"], 50, 1, 9);
        let b = random_walk(&["X", "Y"], 50, 1, 9);
        assert_eq!(a, b);
        assert_ne!(a, random_walk(&["X", "Y"], 50, 1, 10));
        assert_eq!(a.len(), 50);
        for c in a.candles.iter().flatten() {
            c.validate().unwrap();
        }
    }

    #[test]
    fn constant_return_closes() {
        let f = constant_returns(&[0.01, -0.01], 5, 4);
        let r = f.step_returns(2);
        assert!((r[0] - 0.01).abs() < 1e-12);
        assert!((r[1] + 0.01).abs() < 1e-12);
    }
}
