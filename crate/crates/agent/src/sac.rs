//! Soft actor-critic updates with a learned entropy temperature.

use duplex_core::preprocess::StateTensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::buffer::{ReplayBuffer, Transition};
use crate::nn::{Actor, Critic, NetworkSpec, PolicyOutput};
use crate::optim::{Adam, ScalarAdam};
use crate::policy::{reparameterize, sample_action};
use crate::tensor::Tensor;
use crate::AgentError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub discount: f64,
    /// Initial entropy temperature.
    pub entropy_weight: f64,
    pub entropy_lr: f64,
    pub l2_reg: f64,
    pub batch_size: usize,
    /// Environment steps per agent decision.
    pub sample_time: usize,
    /// Steps in the TD target.
    pub lookahead_steps: usize,
    pub target_smoothing: f64,
    pub buffer_capacity: usize,
    pub updates_per_step: usize,
    pub twin_critics: bool,
    pub learn_entropy: bool,
    /// Defaults to minus the action dimension.
    pub target_entropy: Option<f64>,
}

impl Default for SacConfig {
    fn default() -> Self {
        SacConfig {
            actor_lr: 2e-4,
            critic_lr: 6e-4,
            discount: 0.99,
            entropy_weight: 0.08,
            entropy_lr: 6e-4,
            l2_reg: 1e-8,
            batch_size: 16,
            sample_time: 1,
            lookahead_steps: 1,
            target_smoothing: 0.005,
            buffer_capacity: 10_000,
            updates_per_step: 1,
            twin_critics: true,
            learn_entropy: true,
            target_entropy: None,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Config(m.to_string()));
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return bad("discount must lie in (0, 1]");
        }
        for (name, lr) in [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("entropy_lr", self.entropy_lr),
        ] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(AgentError::Config(format!("{name} must be > 0")));
            }
        }
        if !(self.entropy_weight > 0.0) {
            return bad("entropy_weight must be > 0");
        }
        if !(self.l2_reg >= 0.0) {
            return bad("l2_reg must be >= 0");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be >= 1 and no larger than buffer_capacity");
        }
        if self.sample_time != 1 || self.lookahead_steps != 1 {
            return bad("only sample_time = 1 and lookahead_steps = 1 are supported");
        }
        if !(self.target_smoothing > 0.0 && self.target_smoothing <= 1.0) {
            return bad("target_smoothing must lie in (0, 1]");
        }
        if self.updates_per_step == 0 {
            return bad("updates_per_step must be >= 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct LossReport {
    pub critic_loss: f64,
    pub actor_loss: f64,
    /// Batch estimate of the policy entropy, `-E[log pi]`.
    pub entropy: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone)]
pub struct Sac {
    pub config: SacConfig,
    pub actor: Actor,
    pub critics: Vec<Critic>,
    pub targets: Vec<Critic>,
    pub log_alpha: f64,
    actor_opt: Adam,
    critic_opts: Vec<Adam>,
    alpha_opt: ScalarAdam,
    pub updates: u64,
}

fn normal_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect())
}

struct Batch<'a> {
    states: Vec<&'a StateTensor>,
    next: Vec<&'a StateTensor>,
    actions: Tensor,
    rewards: Vec<f64>,
    dones: Vec<bool>,
}

impl<'a> Batch<'a> {
    fn new(items: &[&'a Transition]) -> Self {
        let a = items[0].action.len();
        Batch {
            states: items.iter().map(|t| t.state.as_ref()).collect(),
            next: items.iter().map(|t| t.next_state.as_ref()).collect(),
            actions: Tensor::new(items.len(), a, items.iter().flat_map(|t| t.action.clone()).collect()),
            rewards: items.iter().map(|t| t.reward).collect(),
            dones: items.iter().map(|t| t.done).collect(),
        }
    }
}

impl Sac {
    pub fn new(spec: NetworkSpec, config: SacConfig, rng: &mut ChaCha8Rng) -> Result<Self, AgentError> {
        config.validate()?;
        let actor = Actor::new(spec.clone(), rng)?;
        let n = if config.twin_critics { 2 } else { 1 };
        let critics = (0..n)
            .map(|_| Critic::new(spec.clone(), rng))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Sac::from_parts(config, actor, critics))
    }

    pub fn from_parts(config: SacConfig, actor: Actor, critics: Vec<Critic>) -> Self {
        let actor_opt = Adam::new(&actor.params, config.actor_lr, config.l2_reg);
        let critic_opts = critics
            .iter()
            .map(|c| Adam::new(&c.params, config.critic_lr, config.l2_reg))
            .collect();
        Sac {
            log_alpha: config.entropy_weight.ln(),
            alpha_opt: ScalarAdam::new(config.entropy_lr),
            targets: critics.clone(),
            critics,
            actor_opt,
            critic_opts,
            updates: 0,
            actor,
            config,
        }
    }

    pub fn spec(&self) -> &NetworkSpec {
        &self.actor.spec
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    pub fn target_entropy(&self) -> f64 {
        self.config
            .target_entropy
            .unwrap_or(-(self.actor.spec.action_dim() as f64))
    }

    pub fn policy(&self, state: &StateTensor) -> Result<PolicyOutput, AgentError> {
        Ok(self.actor.forward(state)?)
    }

    /// Squashed action for `state`; the mean action when `deterministic`.
    pub fn act(&self, state: &StateTensor, rng: &mut ChaCha8Rng, deterministic: bool) -> Result<Vec<f64>, AgentError> {
        Ok(sample_action(&self.policy(state)?, rng, deterministic))
    }

    /// Mean squared error of critic `idx` against fixed targets.
    pub fn critic_loss(&self, idx: usize, states: &[&StateTensor], actions: &Tensor, targets: &[f64]) -> Result<f64, AgentError> {
        let critic = &self.critics[idx];
        let mut g = Graph::new();
        let p = critic.params.bind(&mut g, false);
        let a = g.constant(actions.clone());
        let q = critic.forward_graph(&mut g, &p, states, a)?;
        Ok(g.value(q)
            .data
            .iter()
            .zip(targets)
            .map(|(q, t)| (q - t).powi(2))
            .sum::<f64>()
            / targets.len() as f64)
    }

    /// Entropy-regularized TD targets for a batch.
    fn td_targets(&self, batch: &Batch, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, AgentError> {
        let b = batch.rewards.len();
        let a_dim = self.actor.spec.action_dim();
        let eps = normal_tensor(b, a_dim, rng);
        let mut g = Graph::new();
        let pa = self.actor.params.bind(&mut g, false);
        let vars = self.actor.forward_graph(&mut g, &pa, &batch.next)?;
        let (act, logp) = reparameterize(&mut g, vars, &eps);
        let act_value = g.value(act).clone();
        let logp: Vec<f64> = g.value(logp).data.clone();
        let mut q_next = vec![f64::INFINITY; b];
        for target in &self.targets {
            let mut g = Graph::new();
            let p = target.params.bind(&mut g, false);
            let a = g.constant(act_value.clone());
            let q = target.forward_graph(&mut g, &p, &batch.next, a)?;
            for (m, v) in q_next.iter_mut().zip(&g.value(q).data) {
                *m = m.min(*v);
            }
        }
        let alpha = self.alpha();
        Ok((0..b)
            .map(|i| {
                let cont = if batch.dones[i] { 0.0 } else { 1.0 };
                batch.rewards[i] + self.config.discount * cont * (q_next[i] - alpha * logp[i])
            })
            .collect())
    }

    /// One gradient step on the critics, the actor and the temperature,
    /// then a soft target update.
    pub fn update(&mut self, buffer: &ReplayBuffer, batch_rng: &mut ChaCha8Rng, noise_rng: &mut ChaCha8Rng) -> Result<LossReport, AgentError> {
        let items = buffer
            .sample(self.config.batch_size, batch_rng)
            .ok_or(AgentError::BufferUnderflow {
                have: buffer.len(),
                need: self.config.batch_size,
            })?;
        let batch = Batch::new(&items);
        let b = batch.rewards.len();
        let targets = self.td_targets(&batch, noise_rng)?;

        let mut critic_loss = 0.0;
        for (critic, opt) in self.critics.iter_mut().zip(&mut self.critic_opts) {
            let mut g = Graph::new();
            let p = critic.params.bind(&mut g, true);
            let a = g.constant(batch.actions.clone());
            let q = critic.forward_graph(&mut g, &p, &batch.states, a)?;
            let y = g.constant(Tensor::new(b, 1, targets.clone()));
            let d = g.sub(q, y);
            let sq = g.square(d);
            let loss = g.mean(sq);
            critic_loss += g.value(loss).item();
            let grads = g.backward(loss);
            let gv: Vec<Tensor> = p
                .iter()
                .zip(&critic.params.values)
                .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
                .collect();
            let spec = critic.spec.clone();
            opt.step(&mut critic.params, &gv, |grp| spec.lrf(grp));
        }
        critic_loss /= self.critics.len() as f64;

        let alpha = self.alpha();
        let eps = normal_tensor(b, self.actor.spec.action_dim(), noise_rng);
        let mut g = Graph::new();
        let pa = self.actor.params.bind(&mut g, true);
        let vars = self.actor.forward_graph(&mut g, &pa, &batch.states)?;
        let (act, logp) = reparameterize(&mut g, vars, &eps);
        let mut q_min = None;
        for critic in &self.critics {
            let pc = critic.params.bind(&mut g, false);
            let q = critic.forward_graph(&mut g, &pc, &batch.states, act)?;
            q_min = Some(match q_min {
                None => q,
                Some(m) => g.min(m, q),
            });
        }
        let q_min = q_min.expect("at least one critic");
        let weighted = g.scale(logp, alpha);
        let diff = g.sub(weighted, q_min);
        let actor_loss = g.mean(diff);
        let actor_loss_value = g.value(actor_loss).item();
        let logp_values = g.value(logp).data.clone();
        let grads = g.backward(actor_loss);
        let gv: Vec<Tensor> = pa
            .iter()
            .zip(&self.actor.params.values)
            .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
            .collect();
        let spec = self.actor.spec.clone();
        self.actor_opt.step(&mut self.actor.params, &gv, |grp| spec.lrf(grp));

        let mean_logp = logp_values.iter().sum::<f64>() / b as f64;
        if self.config.learn_entropy {
            // d/d(log alpha) of -log_alpha * (log pi + target)
            let grad = -(mean_logp + self.target_entropy());
            self.alpha_opt.step(&mut self.log_alpha, grad);
        }

        let tau = self.config.target_smoothing;
        for (t, c) in self.targets.iter_mut().zip(&self.critics) {
            t.params.soft_update(&c.params, tau);
        }
        self.updates += 1;
        Ok(LossReport {
            critic_loss,
            actor_loss: actor_loss_value,
            entropy: -mean_logp,
            alpha: self.alpha(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::BanditEnv;
    use crate::rng::stream;
    use std::sync::Arc;

    fn bandit_spec() -> NetworkSpec {
        NetworkSpec {
            assets: 1,
            history: 4,
            conv_filters: vec![4],
            attention_heads: 1,
            attention_dim: 4,
            fc_widths: vec![8],
            ..Default::default()
        }
    }

    fn filled_buffer(n: usize) -> ReplayBuffer {
        let env = BanditEnv::new(4);
        let s = Arc::new(env.state());
        let mut buf = ReplayBuffer::new(100);
        let mut rng = stream(0, "fill");
        for _ in 0..n {
            let a: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let r = if BanditEnv::arm(&a) == 0 { 1.0 } else { -1.0 };
            buf.push(Transition {
                state: s.clone(),
                action: a,
                reward: r,
                next_state: s.clone(),
                done: true,
            });
        }
        buf
    }

    #[test]
    fn critic_loss_zero_at_fixed_point() {
        let mut rng = stream(1, "init");
        let sac = Sac::new(bandit_spec(), SacConfig::default(), &mut rng).unwrap();
        let s = BanditEnv::new(4).state();
        let states = vec![&s, &s];
        let actions = Tensor::new(2, 2, vec![0.1, 0.2, -0.3, 0.4]);
        let q: Vec<f64> = (0..2)
            .map(|i| sac.critics[0].forward(&s, actions.row(i)).unwrap())
            .collect();
        assert_eq!(sac.critic_loss(0, &states, &actions, &q).unwrap(), 0.0);
    }

    #[test]
    fn updates_are_deterministic() {
        let buf = filled_buffer(40);
        let run = || {
            let mut rng = stream(2, "init");
            let mut sac = Sac::new(bandit_spec(), SacConfig::default(), &mut rng).unwrap();
            let (mut b, mut n) = (stream(2, "buffer"), stream(2, "policy"));
            for _ in 0..3 {
                sac.update(&buf, &mut b, &mut n).unwrap();
            }
            (sac.actor.params.clone(), sac.critics[1].params.clone(), sac.log_alpha)
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn underflow_is_an_error() {
        let buf = filled_buffer(3);
        let mut rng = stream(3, "init");
        let mut sac = Sac::new(bandit_spec(), SacConfig::default(), &mut rng).unwrap();
        let (mut b, mut n) = (stream(3, "buffer"), stream(3, "policy"));
        assert!(matches!(
            sac.update(&buf, &mut b, &mut n),
            Err(AgentError::BufferUnderflow { have: 3, need: 16 })
        ));
    }

    #[test]
    fn std_bound_holds_after_updates() {
        let buf = filled_buffer(64);
        let mut rng = stream(4, "init");
        let mut sac = Sac::new(bandit_spec(), SacConfig::default(), &mut rng).unwrap();
        let (mut b, mut n) = (stream(4, "buffer"), stream(4, "policy"));
        let s = BanditEnv::new(4).state();
        for _ in 0..20 {
            sac.update(&buf, &mut b, &mut n).unwrap();
            let p = sac.policy(&s).unwrap();
            assert!(p.std.iter().all(|&x| (1e-4..=2.0).contains(&x)));
        }
    }
}
