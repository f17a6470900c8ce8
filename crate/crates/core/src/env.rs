//! Rebalancing environment with signed positions and base-asset lending.
//!
//! Each step takes a [`WeightVector`] (signed asset weights with unit gross
//! exposure, plus a loan weight), sizes positions from the deployable capital
//! `c = p * (1 - loan)`, charges turnover fees, accrues interest on the loan
//! leg, applies close-to-close returns of the rebalancing frame and scores
//! the step with either the loss-penalized PnL reward or the plain return.
//!
//! Execution is instantaneous at the decision close and does not move prices.
//! There is no collateral, margin call or liquidation; an episode ends early
//! if the portfolio value reaches zero.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::MarketData;
use crate::preprocess::{build_state_at, PreprocessError, StateTensor};
use crate::trace::TraceRecord;

pub const HOURS_PER_YEAR: f64 = 8760.0;
pub const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EnvError {
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("episode already finished")]
    EpisodeFinished,
    #[error("degenerate capital c={0}")]
    DegenerateCapital(f64),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
}

pub type Result<T> = std::result::Result<T, EnvError>;

/// Signed asset weights (`sum |w| = 1`) and the loan weight. A positive loan
/// weight lends that fraction of the portfolio value; a negative one borrows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightVector {
    pub asset_weights: Vec<f64>,
    pub loan_weight: f64,
}

impl WeightVector {
    pub fn new(asset_weights: Vec<f64>, loan_weight: f64) -> Result<Self> {
        let w = WeightVector {
            asset_weights,
            loan_weight,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if self.asset_weights.is_empty() {
            return Err(EnvError::InvalidAction("no asset weights".into()));
        }
        let in_range = |v: f64| v.is_finite() && (-1.0..=1.0).contains(&v);
        if !self.asset_weights.iter().all(|&v| in_range(v)) || !in_range(self.loan_weight) {
            return Err(EnvError::InvalidAction(format!(
                "components must lie in [-1, 1]: {:?} / {}",
                self.asset_weights, self.loan_weight
            )));
        }
        let gross: f64 = self.asset_weights.iter().map(|w| w.abs()).sum();
        if (gross - 1.0).abs() > WEIGHT_TOLERANCE {
            return Err(EnvError::InvalidAction(format!("sum of |w| is {gross}, expected 1")));
        }
        Ok(())
    }

    pub fn n_assets(&self) -> usize {
        self.asset_weights.len()
    }

    /// Raw `(m+1)` layout: asset weights followed by the loan weight.
    pub fn to_raw(&self) -> Vec<f64> {
        let mut v = self.asset_weights.clone();
        v.push(self.loan_weight);
        v
    }
}

/// Maps an arbitrary finite `(m+1)`-vector onto the feasible set: every
/// component is clamped to `[-1, 1]` and the asset block is rescaled to unit
/// gross exposure. An all-zero asset block becomes equal long weights.
pub fn project_action(raw: &[f64]) -> WeightVector {
    assert!(raw.len() >= 2, "raw action needs at least one asset and a loan weight");
    let (assets, loan) = raw.split_at(raw.len() - 1);
    let clamp = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
    let clamped: Vec<f64> = assets.iter().map(|&v| clamp(v)).collect();
    let gross: f64 = clamped.iter().map(|v| v.abs()).sum();
    let asset_weights = if gross <= f64::MIN_POSITIVE {
        vec![1.0 / assets.len() as f64; assets.len()]
    } else {
        clamped.iter().map(|v| v / gross).collect()
    };
    WeightVector {
        asset_weights,
        loan_weight: clamp(loan[0]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AccountingMode {
    /// Value update exactly as the textbook recursion prints it: fees only
    /// shrink the rebalanced positions.
    Paper,
    /// Fees are also deducted from the portfolio value.
    Strict,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RewardKind {
    Pnl,
    Return,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    /// Fee per unit of turnover.
    pub fee: f64,
    /// Annual rates, pro-rated per interval.
    pub borrow_rate: f64,
    pub lend_rate: f64,
    pub penalty: f64,
    /// Weight of costs inside the penalty bracket of the PnL reward.
    pub cost_reward_factor: f64,
    pub interval_hours: f64,
    pub initial_value: f64,
    pub accounting_mode: AccountingMode,
    pub reward: RewardKind,
    /// Fold signed interest into the profit/loss sums of the PnL reward.
    pub interest_in_reward: bool,
    /// Source-frame rows per observation.
    pub history: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            fee: 0.0005,
            borrow_rate: 0.05,
            lend_rate: 0.03,
            penalty: 25.0,
            cost_reward_factor: 0.2,
            interval_hours: 4.0,
            initial_value: 1000.0,
            accounting_mode: AccountingMode::Strict,
            reward: RewardKind::Pnl,
            interest_in_reward: false,
            history: 49,
        }
    }
}

impl EnvConfig {
    pub fn frictionless() -> Self {
        EnvConfig {
            fee: 0.0,
            borrow_rate: 0.0,
            lend_rate: 0.0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(EnvError::InvalidConfig(msg.to_string()));
        if !(self.fee >= 0.0) {
            return bad("fee must be >= 0");
        }
        if !(self.borrow_rate >= 0.0 && self.lend_rate >= 0.0) {
            return bad("interest rates must be >= 0");
        }
        if !(self.penalty >= 0.0) {
            return bad("penalty must be >= 0");
        }
        if !self.cost_reward_factor.is_finite() {
            return bad("cost_reward_factor must be finite");
        }
        if !(self.interval_hours > 0.0) {
            return bad("interval_hours must be > 0");
        }
        if !(self.initial_value > 0.0 && self.initial_value.is_finite()) {
            return bad("initial_value must be > 0");
        }
        if self.history == 0 {
            return bad("history must be >= 1");
        }
        Ok(())
    }

    /// Interest rate for one interval, chosen by the sign of the loan weight.
    pub fn interval_rate(&self, loan_weight: f64) -> f64 {
        let annual = if loan_weight > 0.0 {
            self.lend_rate
        } else {
            self.borrow_rate
        };
        annual * self.interval_hours / HOURS_PER_YEAR
    }
}

/// Capital available for asset positions after the lending decision.
pub fn rebalancing_capital(value: f64, loan_weight: f64) -> f64 {
    value * (1.0 - loan_weight)
}

/// Interest over one interval; positive when earned, negative when paid.
pub fn accrue_interest(value: f64, loan_weight: f64, config: &EnvConfig) -> f64 {
    value * loan_weight * config.interval_rate(loan_weight)
}

/// Per-asset fees on turnover `|target - prev|`.
pub fn transaction_costs(target: &[f64], prev: &[f64], fee: f64) -> Vec<f64> {
    target
        .iter()
        .zip(prev)
        .map(|(t, p)| fee * (t - p).abs())
        .collect()
}

/// Loss-penalized PnL reward normalized by deployed capital. `profits` and
/// `losses` are non-negative per-asset magnitudes.
pub fn pnl_reward(
    profits: &[f64],
    losses: &[f64],
    costs: &[f64],
    interest: f64,
    capital: f64,
    config: &EnvConfig,
) -> Result<f64> {
    if !(capital > 0.0) {
        return Err(EnvError::DegenerateCapital(capital));
    }
    let mut profit: f64 = profits.iter().sum();
    let mut loss: f64 = losses.iter().sum();
    if config.interest_in_reward {
        if interest > 0.0 {
            profit += interest;
        } else {
            loss -= interest;
        }
    }
    let cost: f64 = costs.iter().sum();
    Ok((profit - config.penalty * (loss + config.cost_reward_factor * cost)) / capital)
}

pub fn return_reward(next_value: f64, value: f64) -> f64 {
    next_value / value - 1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioState {
    pub value: f64,
    /// Signed quote-currency exposure per asset.
    pub positions: Vec<f64>,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepDiagnostics {
    pub capital: f64,
    pub interest: f64,
    pub costs: Vec<f64>,
    pub profits: Vec<f64>,
    pub losses: Vec<f64>,
    pub asset_returns: Vec<f64>,
    /// Positions right after rebalancing, before returns.
    pub rebalanced: Vec<f64>,
    pub value_before: f64,
    pub value_after: f64,
    /// The reward was normalized by the portfolio value because `c <= 0`.
    pub degenerate_capital: bool,
}

impl StepDiagnostics {
    pub fn cost_total(&self) -> f64 {
        self.costs.iter().sum()
    }

    /// Sum of per-asset step PnL on the rebalanced positions.
    pub fn asset_pnl(&self) -> f64 {
        self.rebalanced
            .iter()
            .zip(&self.asset_returns)
            .map(|(x, r)| x * r)
            .sum()
    }
}

/// Pure single-step transition: positions and value after applying `action`
/// to a portfolio worth `value` holding `prev_positions`, then `returns`.
/// Returns the diagnostics, the grown positions and the reward.
pub fn transition(
    value: f64,
    prev_positions: &[f64],
    action: &WeightVector,
    returns: &[f64],
    config: &EnvConfig,
) -> Result<(StepDiagnostics, Vec<f64>, f64)> {
    let capital = rebalancing_capital(value, action.loan_weight);
    let interest = accrue_interest(value, action.loan_weight, config);
    let target: Vec<f64> = action.asset_weights.iter().map(|w| capital * w).collect();
    let costs = transaction_costs(&target, prev_positions, config.fee);
    // Fees shrink each position's magnitude, never flip its sign.
    let rebalanced: Vec<f64> = target
        .iter()
        .zip(&costs)
        .map(|(&t, &c)| t.signum() * (t.abs() - c).max(0.0))
        .collect();
    let pnl: Vec<f64> = rebalanced.iter().zip(returns).map(|(x, r)| x * r).collect();
    let grown: Vec<f64> = rebalanced.iter().zip(returns).map(|(x, r)| x * (1.0 + r)).collect();
    let cost_total: f64 = costs.iter().sum();
    let value_after = match config.accounting_mode {
        AccountingMode::Paper => value + pnl.iter().sum::<f64>() + interest,
        AccountingMode::Strict => value + pnl.iter().sum::<f64>() + interest - cost_total,
    };
    let profits: Vec<f64> = pnl.iter().map(|x| x.max(0.0)).collect();
    let losses: Vec<f64> = pnl.iter().map(|x| (-x).max(0.0)).collect();
    let degenerate_capital = !(capital > 0.0);
    let reward = match config.reward {
        RewardKind::Pnl => {
            let denom = if degenerate_capital { value } else { capital };
            pnl_reward(&profits, &losses, &costs, interest, denom, config)?
        }
        RewardKind::Return => return_reward(value_after, value),
    };
    let diag = StepDiagnostics {
        capital,
        interest,
        costs,
        profits,
        losses,
        asset_returns: returns.to_vec(),
        rebalanced,
        value_before: value,
        value_after,
        degenerate_capital,
    };
    Ok((diag, grown, reward))
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub reward: f64,
    pub observation: StateTensor,
    pub diagnostics: StepDiagnostics,
    pub action: WeightVector,
    /// Interval-frame timestamp at which the new value is marked.
    pub timestamp: i64,
    pub done: bool,
}

impl StepResult {
    pub fn trace_record(&self, step: usize) -> TraceRecord {
        TraceRecord {
            step,
            timestamp: self.timestamp,
            weights: self.action.asset_weights.clone(),
            loan_weight: self.action.loan_weight,
            capital: self.diagnostics.capital,
            interest: self.diagnostics.interest,
            cost_total: self.diagnostics.cost_total(),
            reward: self.reward,
            value: self.diagnostics.value_after,
        }
    }
}

/// One episode over a shared, immutable [`MarketData`]. Decisions are taken
/// at interval rows `start..end`; each step consumes the return to the next row.
#[derive(Debug, Clone)]
pub struct Env {
    config: EnvConfig,
    data: Arc<MarketData>,
    row: usize,
    start: usize,
    end: usize,
    state: PortfolioState,
    done: bool,
}

impl Env {
    /// Starts an episode at decision row `start` that runs to the end of the data.
    pub fn reset(config: EnvConfig, data: Arc<MarketData>, start: usize) -> Result<(Env, StateTensor)> {
        let end = data.interval.len().saturating_sub(1);
        Env::reset_range(config, data, start, end)
    }

    /// Starts an episode with decisions at rows `start..end`.
    pub fn reset_range(
        config: EnvConfig,
        data: Arc<MarketData>,
        start: usize,
        end: usize,
    ) -> Result<(Env, StateTensor)> {
        config.validate()?;
        let rows = data.interval.len();
        if (data.interval.interval_hours as f64 - config.interval_hours).abs() > 1e-12 {
            return Err(EnvError::InvalidConfig(format!(
                "config interval {}h does not match data interval {}h",
                config.interval_hours, data.interval.interval_hours
            )));
        }
        if start >= end || end >= rows {
            return Err(EnvError::InsufficientData(format!(
                "decision rows {start}..{end} need {} interval rows, have {rows}",
                end.max(start + 1) + 1
            )));
        }
        let source_row = data.decision_source_row(start);
        if source_row + 1 < config.history {
            return Err(EnvError::InsufficientData(format!(
                "row {start} has {} source rows of history, need {}",
                source_row + 1,
                config.history
            )));
        }
        let env = Env {
            state: PortfolioState {
                value: config.initial_value,
                positions: vec![0.0; data.n_assets()],
                step: 0,
            },
            config,
            data,
            row: start,
            start,
            end,
            done: false,
        };
        let obs = env.observation()?;
        Ok((env, obs))
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn data(&self) -> &Arc<MarketData> {
        &self.data
    }

    pub fn state(&self) -> &PortfolioState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Current decision row in the interval frame.
    pub fn row(&self) -> usize {
        self.row
    }

    pub fn steps_remaining(&self) -> usize {
        if self.done {
            0
        } else {
            self.end - self.row
        }
    }

    pub fn n_assets(&self) -> usize {
        self.data.n_assets()
    }

    pub fn observation(&self) -> Result<StateTensor> {
        let source_row = self.data.decision_source_row(self.row);
        Ok(build_state_at(&self.data.source, source_row, self.config.history)?)
    }

    /// Trace row 0: the initial value before any action.
    pub fn initial_record(&self) -> TraceRecord {
        TraceRecord {
            step: 0,
            timestamp: self.data.interval.timestamps[self.start],
            weights: vec![0.0; self.n_assets()],
            loan_weight: 0.0,
            capital: 0.0,
            interest: 0.0,
            cost_total: 0.0,
            reward: 0.0,
            value: self.config.initial_value,
        }
    }

    pub fn step(&mut self, action: &WeightVector) -> Result<StepResult> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        action.validate()?;
        if action.n_assets() != self.n_assets() {
            return Err(EnvError::InvalidAction(format!(
                "expected {} asset weights, got {}",
                self.n_assets(),
                action.n_assets()
            )));
        }
        let returns = self.data.interval.step_returns(self.row);
        let (diagnostics, grown, reward) =
            transition(self.state.value, &self.state.positions, action, &returns, &self.config)?;
        self.row += 1;
        self.state = PortfolioState {
            value: diagnostics.value_after,
            positions: grown,
            step: self.state.step + 1,
        };
        self.done = self.row >= self.end || !(self.state.value > 0.0);
        let observation = self.observation()?;
        Ok(StepResult {
            reward,
            observation,
            diagnostics,
            action: action.clone(),
            timestamp: self.data.interval.timestamps[self.row],
            done: self.done,
        })
    }

    /// Projects an unconstrained action onto the feasible set, then steps.
    pub fn step_raw(&mut self, raw: &[f64]) -> Result<StepResult> {
        if raw.len() != self.n_assets() + 1 {
            return Err(EnvError::InvalidAction(format!(
                "expected {} raw components, got {}",
                self.n_assets() + 1,
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite()) {
            return Err(EnvError::InvalidAction("non-finite raw action".into()));
        }
        let action = project_action(raw);
        self.step(&action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{align, AssetSeries, Candle, MarketFrame, SECONDS_PER_HOUR};

    fn frame(closes: &[&[f64]], hours: u32) -> MarketFrame {
        let step = hours as i64 * SECONDS_PER_HOUR;
        let series: Vec<AssetSeries> = closes
            .iter()
            .enumerate()
            .map(|(a, cs)| {
                let candles = cs
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| Candle::flat(i as i64 * step, c))
                    .collect();
                AssetSeries::new(format!("A{a}"), hours, candles).unwrap()
            })
            .collect();
        align(&series).unwrap().0
    }

    fn config(history: usize) -> EnvConfig {
        EnvConfig {
            history,
            ..EnvConfig::default()
        }
    }

    #[test]
    fn capital_and_interest() {
        assert_eq!(rebalancing_capital(1000.0, 0.0), 1000.0);
        assert_eq!(rebalancing_capital(1000.0, 0.5), 500.0);
        assert_eq!(rebalancing_capital(1000.0, -1.0), 2000.0);

        let cfg = EnvConfig::default();
        assert_eq!(accrue_interest(1000.0, 0.0, &cfg), 0.0);
        let lend = accrue_interest(1000.0, 0.5, &cfg);
        assert!((lend - 1000.0 * 0.5 * (0.03 * 4.0 / 8760.0)).abs() < 1e-15);
        assert!((lend - 0.006849).abs() < 1e-6);
        let borrow = accrue_interest(1000.0, -0.5, &cfg);
        assert!((borrow + 0.011416).abs() < 1e-6);
    }

    #[test]
    fn costs_on_turnover() {
        assert_eq!(transaction_costs(&[1.0, -2.0], &[1.0, -2.0], 0.0005), vec![0.0, 0.0]);
        assert!((transaction_costs(&[500.0], &[0.0], 0.0005)[0] - 0.25).abs() < 1e-15);
        assert!((transaction_costs(&[-500.0], &[500.0], 0.0005)[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn reward_examples() {
        let cfg = EnvConfig::default();
        assert_eq!(pnl_reward(&[0.0], &[0.0], &[0.0], 0.0, 1000.0, &cfg).unwrap(), 0.0);
        assert_eq!(pnl_reward(&[10.0], &[0.0], &[0.0], 0.0, 1000.0, &cfg).unwrap(), 0.01);
        let r = pnl_reward(&[0.0], &[10.0], &[5.0], 0.0, 1000.0, &cfg).unwrap();
        assert!((r + 0.275).abs() < 1e-15, "{r}");
        assert!(pnl_reward(&[1.0], &[0.0], &[0.0], 0.0, 0.0, &cfg).is_err());

        let with_interest = EnvConfig {
            interest_in_reward: true,
            ..cfg.clone()
        };
        let r = pnl_reward(&[0.0], &[0.0], &[0.0], -1.0, 1000.0, &with_interest).unwrap();
        assert!((r + 0.025).abs() < 1e-15);

        assert_eq!(return_reward(1000.0, 1000.0), 0.0);
        assert!((return_reward(1100.0, 1000.0) - 0.1).abs() < 1e-15);
        assert!((return_reward(900.0, 1000.0) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn projection_examples() {
        let w = project_action(&[2.0, -2.0, 0.0]);
        assert_eq!(w.asset_weights, vec![0.5, -0.5]);
        assert_eq!(w.loan_weight, 0.0);
        let feasible = [0.3, -0.7, -0.4];
        let w = project_action(&feasible);
        for (a, b) in w.to_raw().iter().zip(feasible) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(project_action(&[0.0, 0.0, 0.2]).asset_weights, vec![0.5, 0.5]);
        assert!(project_action(&[1e6, -3e5, 7e5, -1e6]).validate().is_ok());
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5], 0.0).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.4], 0.0).is_err());
        assert!(WeightVector::new(vec![1.0], 1.5).is_err());
    }

    #[test]
    fn strict_and_paper_hand_examples() {
        let mut cfg = EnvConfig::frictionless();
        cfg.fee = 0.0005;
        let action = WeightVector::new(vec![1.0], 0.0).unwrap();
        let (d, grown, _) = transition(1000.0, &[0.0], &action, &[0.02], &cfg).unwrap();
        assert!((d.costs[0] - 0.5).abs() < 1e-12);
        assert!((d.rebalanced[0] - 999.5).abs() < 1e-12);
        assert!((d.value_after - 1019.49).abs() < 1e-9, "{}", d.value_after);
        assert!((grown[0] - 999.5 * 1.02).abs() < 1e-9);

        cfg.accounting_mode = AccountingMode::Paper;
        let (d, _, _) = transition(1000.0, &[0.0], &action, &[0.02], &cfg).unwrap();
        assert!((d.value_after - 1019.99).abs() < 1e-9, "{}", d.value_after);
    }

    #[test]
    fn short_cost_shrinks_magnitude() {
        let cfg = EnvConfig::default();
        let action = WeightVector::new(vec![-1.0], 0.0).unwrap();
        let (d, _, _) = transition(1000.0, &[0.0], &action, &[0.0], &cfg).unwrap();
        assert!((d.rebalanced[0] + 999.5).abs() < 1e-12);
        assert!(d.rebalanced.iter().map(|x| x.abs()).sum::<f64>() <= d.capital);
    }

    #[test]
    fn full_lending_uses_value_as_denominator() {
        let cfg = EnvConfig {
            interest_in_reward: true,
            ..EnvConfig::default()
        };
        let action = WeightVector::new(vec![0.5, 0.5], 1.0).unwrap();
        let (d, _, reward) = transition(1000.0, &[0.0, 0.0], &action, &[0.1, -0.1], &cfg).unwrap();
        assert!(d.degenerate_capital);
        assert_eq!(d.capital, 0.0);
        assert!((reward - d.interest / 1000.0).abs() < 1e-18);
    }

    #[test]
    fn frictionless_buy_and_hold() {
        let f = frame(&[&[100.0, 110.0, 99.0, 120.0]], 4);
        let data = Arc::new(MarketData::single(f));
        let cfg = EnvConfig {
            history: 1,
            ..EnvConfig::frictionless()
        };
        let (mut env, _) = Env::reset(cfg, data, 0).unwrap();
        let action = WeightVector::new(vec![1.0], 0.0).unwrap();
        let mut last = None;
        while !env.is_done() {
            last = Some(env.step(&action).unwrap());
        }
        let p = last.unwrap().diagnostics.value_after;
        assert!((p / 1000.0 - 1.2).abs() < 1e-12);
    }

    #[test]
    fn reset_boundaries() {
        let f = frame(&[&[1.0, 1.1, 1.2, 1.3]], 4);
        let data = Arc::new(MarketData::single(f));
        let (env, obs) = Env::reset(config(2), data.clone(), 1).unwrap();
        assert_eq!(env.state().value, 1000.0);
        assert_eq!(env.state().positions, vec![0.0]);
        assert_eq!(obs.shape(), (1, 4, 2));

        let (mut env, _) = Env::reset(config(1), data.clone(), 2).unwrap();
        let res = env.step(&WeightVector::new(vec![1.0], 0.0).unwrap()).unwrap();
        assert!(res.done);
        assert!(matches!(env.step(&res.action), Err(EnvError::EpisodeFinished)));

        assert!(Env::reset(config(1), data.clone(), 3).is_err());
        assert!(Env::reset(config(1), data.clone(), 10).is_err());
        assert!(Env::reset(config(3), data, 1).is_err());
    }
}
