//! The interaction loop: act, step, store, update.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{ReplayBuffer, Transition};
use crate::envs::Environment;
use crate::rng;
use crate::sac::Sac;
use crate::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub episodes: usize,
    /// Uniform random actions until the buffer holds this many transitions.
    pub warmup_steps: usize,
    pub max_updates: Option<u64>,
    pub max_seconds: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            episodes: 1,
            warmup_steps: 256,
            max_updates: None,
            max_seconds: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
}

pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "episode,cumulative_reward,critic_loss,actor_loss,alpha")?;
    for p in curve {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.episode, p.cumulative_reward, p.critic_loss, p.actor_loss, p.alpha
        )?;
    }
    Ok(())
}

/// Trains `sac` on `env` for `config.episodes` episodes. All randomness
/// comes from named streams of `seed`.
pub fn train<E: Environment>(
    env: &mut E,
    sac: &mut Sac,
    buffer: &mut ReplayBuffer,
    config: &TrainConfig,
    seed: u64,
) -> Result<Vec<CurvePoint>, AgentError> {
    if env.action_dim() != sac.spec().action_dim() {
        return Err(AgentError::Config(format!(
            "environment takes {} action components, network produces {}",
            env.action_dim(),
            sac.spec().action_dim()
        )));
    }
    let mut policy_rng = rng::stream(seed, rng::POLICY);
    let mut update_rng = rng::stream(seed, "update-noise");
    let mut buffer_rng = rng::stream(seed, rng::BUFFER);
    let mut episode_rng = rng::stream(seed, rng::EPISODE);
    let started = Instant::now();
    let out_of_budget = |sac: &Sac| {
        config.max_updates.is_some_and(|m| sac.updates >= m)
            || config.max_seconds.is_some_and(|s| started.elapsed().as_secs_f64() >= s)
    };

    let mut curve = Vec::with_capacity(config.episodes);
    'episodes: for episode in 0..config.episodes {
        if out_of_budget(sac) {
            break;
        }
        let mut state = Arc::new(env.reset(&mut episode_rng)?);
        let (mut total, mut closs, mut aloss, mut n_upd) = (0.0, 0.0, 0.0, 0usize);
        loop {
            let action: Vec<f64> = if buffer.len() < config.warmup_steps {
                (0..env.action_dim()).map(|_| policy_rng.random_range(-1.0..=1.0)).collect()
            } else {
                sac.act(&state, &mut policy_rng, false)?
            };
            let step = env.step(&action)?;
            total += step.reward;
            let next = Arc::new(step.observation);
            let t = Transition {
                state: state.clone(),
                action,
                reward: step.reward,
                next_state: next.clone(),
                done: step.terminal,
            };
            if !t.is_finite() {
                return Err(AgentError::NonFinite("transition".into()));
            }
            buffer.push(t);
            state = next;
            if buffer.len() >= config.warmup_steps.max(sac.config.batch_size) {
                for _ in 0..sac.config.updates_per_step {
                    if out_of_budget(sac) {
                        break;
                    }
                    let r = sac.update(buffer, &mut buffer_rng, &mut update_rng)?;
                    closs += r.critic_loss;
                    aloss += r.actor_loss;
                    n_upd += 1;
                }
            }
            let stop = out_of_budget(sac);
            if step.terminal || step.truncated || stop {
                let denom = n_upd.max(1) as f64;
                curve.push(CurvePoint {
                    episode,
                    cumulative_reward: total,
                    critic_loss: closs / denom,
                    actor_loss: aloss / denom,
                    alpha: sac.alpha(),
                });
                if stop {
                    break 'episodes;
                }
                break;
            }
        }
    }
    if !sac.actor.params.is_finite() {
        return Err(AgentError::NonFinite("actor parameters".into()));
    }
    Ok(curve)
}

/// Runs the deterministic policy for one episode and returns the rewards.
pub fn evaluate<E: Environment>(env: &mut E, sac: &Sac, seed: u64) -> Result<Vec<f64>, AgentError> {
    let mut rng = rng::stream(seed, rng::EPISODE);
    let mut state = env.reset(&mut rng)?;
    let mut rewards = Vec::new();
    loop {
        let action = sac.act(&state, &mut rng, true)?;
        let step = env.step(&action)?;
        rewards.push(step.reward);
        state = step.observation;
        if step.terminal || step.truncated {
            return Ok(rewards);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::BanditEnv;
    use crate::nn::NetworkSpec;
    use crate::sac::SacConfig;

    fn setup(seed: u64) -> (BanditEnv, Sac, ReplayBuffer) {
        let spec = NetworkSpec {
            assets: 1,
            history: 4,
            conv_filters: vec![4],
            attention_heads: 1,
            attention_dim: 4,
            fc_widths: vec![8],
            ..Default::default()
        };
        let mut init = rng::stream(seed, rng::INIT);
        let sac = Sac::new(spec, SacConfig::default(), &mut init).unwrap();
        (BanditEnv::new(4), sac, ReplayBuffer::new(1000))
    }

    #[test]
    fn zero_episodes_is_identity() {
        let (mut env, mut sac, mut buf) = setup(1);
        let before = sac.actor.params.clone();
        let cfg = TrainConfig {
            episodes: 0,
            ..Default::default()
        };
        let curve = train(&mut env, &mut sac, &mut buf, &cfg, 1).unwrap();
        assert!(curve.is_empty());
        assert_eq!(sac.actor.params, before);
    }

    #[test]
    fn same_seed_same_curve() {
        let cfg = TrainConfig {
            episodes: 60,
            warmup_steps: 20,
            ..Default::default()
        };
        let run = || {
            let (mut env, mut sac, mut buf) = setup(2);
            train(&mut env, &mut sac, &mut buf, &cfg, 2).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn update_budget_cuts_training() {
        let (mut env, mut sac, mut buf) = setup(3);
        let cfg = TrainConfig {
            episodes: 500,
            warmup_steps: 16,
            max_updates: Some(10),
            ..Default::default()
        };
        train(&mut env, &mut sac, &mut buf, &cfg, 3).unwrap();
        assert_eq!(sac.updates, 10);
    }
}
