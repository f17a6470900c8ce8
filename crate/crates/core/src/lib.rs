//! Two-sided portfolio rebalancing: market data handling, state
//! construction, the trading environment with lending, single-period
//! benchmark allocators and evaluation metrics.

pub mod backtest;
pub mod data;
pub mod env;
pub mod metrics;
pub mod preprocess;
pub mod sppo;
pub mod synth;
pub mod trace;
