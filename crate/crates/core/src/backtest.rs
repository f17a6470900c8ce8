//! Running a rebalancing rule through the environment and recording its trace.

use std::sync::Arc;

use thiserror::Error;

use crate::data::MarketData;
use crate::env::{Env, EnvConfig, EnvError, WeightVector};
use crate::preprocess::StateTensor;
use crate::sppo::{self, SppoConfig, SppoError};
use crate::trace::EpisodeTrace;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Sppo(#[from] SppoError),
    #[error("policy error: {0}")]
    Policy(String),
}

pub trait Policy {
    fn name(&self) -> String;
    fn decide(&mut self, env: &Env, observation: &StateTensor) -> Result<WeightVector, BacktestError>;
}

/// Constant `1/m` long weights, nothing lent.
#[derive(Debug, Clone, Default)]
pub struct EqualWeight;

impl Policy for EqualWeight {
    fn name(&self) -> String {
        "Market".into()
    }

    fn decide(&mut self, env: &Env, _: &StateTensor) -> Result<WeightVector, BacktestError> {
        Ok(sppo::equal_weight_action(env.n_assets()))
    }
}

/// Re-estimates a frontier on the trailing returns at every decision.
#[derive(Debug, Clone)]
pub struct SppoPolicy {
    pub config: SppoConfig,
}

impl Policy for SppoPolicy {
    fn name(&self) -> String {
        if self.config.measure == sppo::RiskMeasure::Cvar {
            format!("CVaR({}%)", (self.config.alpha * 100.0).round())
        } else {
            self.config.measure.label().to_string()
        }
    }

    fn decide(&mut self, env: &Env, _: &StateTensor) -> Result<WeightVector, BacktestError> {
        let cfg = env.config();
        let cash = sppo::cash_utility(cfg.lend_rate, cfg.interval_hours);
        Ok(sppo::sppo_decision(&env.data().interval, env.row(), &self.config, cash)?)
    }
}

/// Runs `policy` with decisions at interval rows `start..end` and returns the
/// full trace, including the initial record.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &mut P,
    config: EnvConfig,
    data: Arc<MarketData>,
    start: usize,
    end: usize,
) -> Result<EpisodeTrace, BacktestError> {
    let (mut env, mut obs) = Env::reset_range(config, data.clone(), start, end)?;
    let mut trace = EpisodeTrace::new(data.interval.symbols.clone());
    trace.records.push(env.initial_record());
    while !env.is_done() {
        let action = policy.decide(&env, &obs)?;
        let result = env.step(&action)?;
        trace.records.push(result.trace_record(env.state().step));
        obs = result.observation;
    }
    Ok(trace)
}
