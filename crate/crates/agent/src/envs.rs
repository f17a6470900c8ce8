//! Environments the agent can be trained on.

use std::ops::Range;
use std::sync::Arc;

use duplex_core::data::MarketData;
use duplex_core::env::{Env, EnvConfig};
use duplex_core::preprocess::{inject_noise, NoiseSpec, StateTensor};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::AgentError;

#[derive(Debug, Clone)]
pub struct EnvStep {
    pub observation: StateTensor,
    pub reward: f64,
    /// The episode ended in an absorbing state (no bootstrapping).
    pub terminal: bool,
    /// The episode was cut by its length limit.
    pub truncated: bool,
}

pub trait Environment {
    fn action_dim(&self) -> usize;
    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<StateTensor, AgentError>;
    /// `action` is the squashed policy output; the environment projects it.
    fn step(&mut self, action: &[f64]) -> Result<EnvStep, AgentError>;
}

/// The rebalancing environment over a range of decision rows, optionally
/// cut into random fixed-length episodes, with observation noise.
pub struct PortfolioEnv {
    config: EnvConfig,
    data: Arc<MarketData>,
    rows: Range<usize>,
    episode_len: Option<usize>,
    noise: NoiseSpec,
    noise_rng: ChaCha8Rng,
    env: Option<Env>,
}

impl PortfolioEnv {
    /// Decisions are taken at rows `rows.start..rows.end`.
    pub fn new(
        config: EnvConfig,
        data: Arc<MarketData>,
        rows: Range<usize>,
        episode_len: Option<usize>,
        noise: NoiseSpec,
        noise_rng: ChaCha8Rng,
    ) -> Result<Self, AgentError> {
        if rows.start >= rows.end || rows.end >= data.interval.len() {
            return Err(AgentError::Config(format!(
                "decision rows {}..{} do not fit {} interval rows",
                rows.start,
                rows.end,
                data.interval.len()
            )));
        }
        if episode_len == Some(0) {
            return Err(AgentError::Config("episode length must be >= 1".into()));
        }
        Ok(PortfolioEnv {
            config,
            data,
            rows,
            episode_len,
            noise,
            noise_rng,
            env: None,
        })
    }

    fn observe(&mut self, obs: StateTensor) -> StateTensor {
        inject_noise(&obs, &self.noise, &mut self.noise_rng)
    }

    pub fn inner(&self) -> Option<&Env> {
        self.env.as_ref()
    }
}

impl Environment for PortfolioEnv {
    fn action_dim(&self) -> usize {
        self.data.n_assets() + 1
    }

    fn reset(&mut self, rng: &mut ChaCha8Rng) -> Result<StateTensor, AgentError> {
        let span = self.rows.end - self.rows.start;
        let (start, end) = match self.episode_len {
            Some(len) if len < span => {
                let start = self.rows.start + rng.random_range(0..=span - len);
                (start, start + len)
            }
            _ => (self.rows.start, self.rows.end),
        };
        let (env, obs) = Env::reset_range(self.config.clone(), self.data.clone(), start, end)?;
        self.env = Some(env);
        Ok(self.observe(obs))
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, AgentError> {
        let env = self.env.as_mut().ok_or_else(|| AgentError::Config("step before reset".into()))?;
        let result = env.step_raw(action)?;
        let terminal = !(env.state().value > 0.0);
        let observation = self.observe(result.observation);
        Ok(EnvStep {
            observation,
            reward: result.reward,
            terminal,
            truncated: result.done && !terminal,
        })
    }
}

/// One state, two actions: the first component larger pays +1, otherwise -1.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub history: usize,
}

impl BanditEnv {
    pub fn new(history: usize) -> Self {
        BanditEnv { history }
    }

    pub fn state(&self) -> StateTensor {
        let mut s = StateTensor::zeros(1, self.history, 0);
        s.values.iter_mut().enumerate().for_each(|(i, v)| *v = 0.01 * (i % 5) as f64);
        s
    }

    /// Index of the chosen arm.
    pub fn arm(action: &[f64]) -> usize {
        if action[0] >= action[1] {
            0
        } else {
            1
        }
    }
}

impl Environment for BanditEnv {
    fn action_dim(&self) -> usize {
        2
    }

    fn reset(&mut self, _: &mut ChaCha8Rng) -> Result<StateTensor, AgentError> {
        Ok(self.state())
    }

    fn step(&mut self, action: &[f64]) -> Result<EnvStep, AgentError> {
        if action.len() != 2 {
            return Err(AgentError::Config(format!("bandit takes 2 components, got {}", action.len())));
        }
        Ok(EnvStep {
            observation: self.state(),
            reward: if BanditEnv::arm(action) == 0 { 1.0 } else { -1.0 },
            terminal: true,
            truncated: false,
        })
    }
}
