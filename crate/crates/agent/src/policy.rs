//! Tanh-squashed Gaussian policy: sampling and log-densities.

use rand::Rng;
use rand_distr::StandardNormal;

use duplex_core::backtest::{BacktestError, Policy};
use duplex_core::env::{project_action, Env, WeightVector};
use duplex_core::preprocess::StateTensor;

use crate::autodiff::{softplus, Graph, Var};
use crate::nn::{Actor, PolicyOutput, PolicyVars};
use crate::tensor::Tensor;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Pre-squash sample: `mean + std * eps`, or the mean in deterministic mode.
pub fn sample_gaussian<R: Rng + ?Sized>(policy: &PolicyOutput, rng: &mut R, deterministic: bool) -> Vec<f64> {
    if deterministic {
        return policy.mean.clone();
    }
    policy
        .mean
        .iter()
        .zip(&policy.std)
        .map(|(m, s)| {
            let eps: f64 = rng.sample(StandardNormal);
            m + s * eps
        })
        .collect()
}

/// Element-wise squash into `[-1, 1]`; the environment projects the result.
pub fn squash(u: &[f64]) -> Vec<f64> {
    u.iter().map(|x| x.tanh()).collect()
}

pub fn sample_action<R: Rng + ?Sized>(policy: &PolicyOutput, rng: &mut R, deterministic: bool) -> Vec<f64> {
    squash(&sample_gaussian(policy, rng, deterministic))
}

/// `ln(d tanh(u)/du) = 2 (ln 2 - u - softplus(-2u))`, stable for large `|u|`.
pub fn tanh_log_jacobian(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Log-density of `tanh(u)` under the squashed policy.
pub fn log_prob(policy: &PolicyOutput, u: &[f64]) -> f64 {
    policy
        .mean
        .iter()
        .zip(&policy.std)
        .zip(u)
        .map(|((m, s), x)| {
            let z = (x - m) / s;
            -0.5 * z * z - s.ln() - HALF_LN_2PI - tanh_log_jacobian(*x)
        })
        .sum()
}

/// Reparameterized batch sample `tanh(mean + std * eps)` and its
/// log-density (`B x 1`), both differentiable in the policy outputs.
pub fn reparameterize(g: &mut Graph, vars: PolicyVars, eps: &Tensor) -> (Var, Var) {
    let (b, a) = g.shape(vars.mean);
    assert_eq!(eps.shape(), (b, a), "noise shape");
    let e = g.constant(eps.clone());
    let noise = g.mul(vars.std, e);
    let u = g.add(vars.mean, noise);
    let action = g.tanh(u);
    let base: Vec<f64> = eps
        .data
        .chunks(a)
        .map(|row| row.iter().map(|x| -0.5 * x * x - HALF_LN_2PI).sum())
        .collect();
    let base = g.constant(Tensor::new(b, 1, base));
    let log_std = g.sum_cols(vars.log_std);
    let neg2u = g.scale(u, -2.0);
    let sp = g.softplus(neg2u);
    let inner = g.add(u, sp);
    let inner = g.scale(inner, -2.0);
    let jac = g.add_scalar(inner, 2.0 * std::f64::consts::LN_2);
    let jac = g.sum_cols(jac);
    let lp = g.sub(base, log_std);
    let log_prob = g.sub(lp, jac);
    (action, log_prob)
}

/// Deterministic actor as a backtest rule: squashed mean, then projection.
#[derive(Debug, Clone)]
pub struct ActorPolicy {
    pub actor: Actor,
    pub label: String,
}

impl Policy for ActorPolicy {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn decide(&mut self, _: &Env, observation: &StateTensor) -> Result<WeightVector, BacktestError> {
        let out = self
            .actor
            .forward(observation)
            .map_err(|e| BacktestError::Policy(e.to_string()))?;
        Ok(project_action(&squash(&out.mean)))
    }
}
