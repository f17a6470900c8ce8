//! Finite-difference verification of analytic parameter gradients.

use duplex_core::preprocess::StateTensor;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;
use serde::Serialize;

use crate::autodiff::{Graph, Var};
use crate::nn::{Actor, Conv1d, Critic, Linear, NetworkSpec, ParamStore, SelfAttention};
use crate::policy::reparameterize;
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-5;
/// Relative errors are measured against `max(|analytic|, |numeric|, FLOOR)`.
pub const FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub max_rel_error: f64,
    pub probes: usize,
    /// Probes dropped because the perturbation crossed a kink.
    pub skipped: usize,
}

fn eval(store: &ParamStore, loss: &impl Fn(&mut Graph, &[Var]) -> Var) -> (f64, Vec<bool>) {
    let mut g = Graph::new();
    let p = store.bind(&mut g, false);
    let l = loss(&mut g, &p);
    (g.value(l).item(), g.kink_signature())
}

/// Compares analytic gradients of the scalar `loss` against central
/// differences at up to `probes` randomly chosen parameter entries.
pub fn gradcheck(
    store: &ParamStore,
    loss: impl Fn(&mut Graph, &[Var]) -> Var,
    probes: usize,
    rng: &mut ChaCha8Rng,
) -> GradcheckReport {
    let mut g = Graph::new();
    let p = store.bind(&mut g, true);
    let l = loss(&mut g, &p);
    let grads = g.backward(l);
    let analytic: Vec<Tensor> = p
        .iter()
        .zip(&store.values)
        .map(|(&v, t)| grads.get_or_zeros(v, t.shape()))
        .collect();
    let base_sig = g.kink_signature();

    let index: Vec<(usize, usize)> = store
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, t)| (0..t.len()).map(move |k| (i, k)))
        .collect();
    let picks: Vec<(usize, usize)> = if index.len() <= probes {
        index
    } else {
        (0..probes).map(|_| index[rng.random_range(0..index.len())]).collect()
    };

    let mut report = GradcheckReport {
        max_rel_error: 0.0,
        probes: 0,
        skipped: 0,
    };
    let mut work = store.clone();
    for (i, k) in picks {
        let orig = work.values[i].data[k];
        work.values[i].data[k] = orig + STEP;
        let (fp, sp) = eval(&work, &loss);
        work.values[i].data[k] = orig - STEP;
        let (fm, sm) = eval(&work, &loss);
        work.values[i].data[k] = orig;
        if sp != base_sig || sm != base_sig {
            report.skipped += 1;
            continue;
        }
        let numeric = (fp - fm) / (2.0 * STEP);
        let a = analytic[i].data[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(FLOOR);
        report.max_rel_error = report.max_rel_error.max(err);
        report.probes += 1;
    }
    report
}

fn random_tensor(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn random_state(spec: &NetworkSpec, rng: &mut ChaCha8Rng) -> StateTensor {
    let mut s = StateTensor::zeros(spec.assets, spec.history, 0);
    s.values.iter_mut().for_each(|v| *v = rng.random_range(-0.2..0.2));
    s
}

/// Sum of the output weighted by a fixed random projection.
fn project(g: &mut Graph, out: Var, proj: &Tensor) -> Var {
    let c = g.constant(proj.clone());
    let y = g.mul(out, c);
    g.sum(y)
}

/// Small network layout used by the checks.
pub fn probe_spec() -> NetworkSpec {
    NetworkSpec {
        assets: 2,
        history: 6,
        conv_filters: vec![4, 6],
        kernel_size: 3,
        attention_heads: 2,
        attention_dim: 4,
        fc_widths: vec![8],
        positional_encoding: true,
        ..Default::default()
    }
}

pub fn check_linear(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let layer = Linear::new(&mut store, "fc", 5, 3, 0, &mut rng);
    let x = random_tensor(4, 5, &mut rng);
    let proj = random_tensor(4, 3, &mut rng);
    gradcheck(
        &store,
        |g, p| {
            let xv = g.constant(x.clone());
            let y = layer.forward(g, p, xv);
            let y = g.leaky_relu(y, 0.01);
            project(g, y, &proj)
        },
        probes,
        &mut rng,
    )
}

/// Exact case: a linear map under a quadratic loss.
pub fn check_linear_quadratic(seed: u64) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let layer = Linear::new(&mut store, "fc", 4, 3, 0, &mut rng);
    let x = random_tensor(5, 4, &mut rng);
    gradcheck(
        &store,
        |g, p| {
            let xv = g.constant(x.clone());
            let y = layer.forward(g, p, xv);
            let sq = g.square(y);
            g.sum(sq)
        },
        usize::MAX,
        &mut rng,
    )
}

pub fn check_conv(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let (seqs, len, ch) = (3, 7, 4);
    let layer = Conv1d::new(&mut store, "conv", ch, 5, 3, 0, &mut rng);
    let x = random_tensor(seqs * len, ch, &mut rng);
    let proj = random_tensor(seqs * len, 5, &mut rng);
    gradcheck(
        &store,
        |g, p| {
            let xv = g.constant(x.clone());
            let y = layer.forward(g, p, xv, len);
            let y = g.leaky_relu(y, 0.01);
            project(g, y, &proj)
        },
        probes,
        &mut rng,
    )
}

pub fn check_attention(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let (seqs, len) = (2, 5);
    let layer = SelfAttention::new(&mut store, "attn", 3, 4, 2, 0, &mut rng);
    let x = random_tensor(seqs * len, 3, &mut rng);
    let proj = random_tensor(seqs * len, 4, &mut rng);
    gradcheck(
        &store,
        |g, p| {
            let xv = g.constant(x.clone());
            let y = layer.forward(g, p, xv, len);
            project(g, y, &proj)
        },
        probes,
        &mut rng,
    )
}

/// Mean and log-std heads followed by the reparameterized tanh sample and
/// its log-density.
pub fn check_squash_head(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    let (b, f, a) = (4, 6, 3);
    let mean = Linear::new(&mut store, "mean", f, a, 0, &mut rng);
    let log_std = Linear::new(&mut store, "log_std", f, a, 0, &mut rng);
    let h = random_tensor(b, f, &mut rng);
    let eps = random_tensor(b, a, &mut rng);
    let proj = random_tensor(b, a, &mut rng);
    gradcheck(
        &store,
        |g, p| {
            let hv = g.constant(h.clone());
            let m = mean.forward(g, p, hv);
            let z = log_std.forward(g, p, hv);
            let s = g.sigmoid(z);
            let s = g.scale(s, crate::nn::LOG_STD_MAX - crate::nn::LOG_STD_MIN);
            let ls = g.add_scalar(s, crate::nn::LOG_STD_MIN);
            let sd = g.exp(ls);
            let (act, lp) = reparameterize(
                g,
                crate::nn::PolicyVars {
                    mean: m,
                    log_std: ls,
                    std: sd,
                },
                &eps,
            );
            let pa = project(g, act, &proj);
            let lps = g.sum(lp);
            let lps = g.scale(lps, 0.1);
            g.add(pa, lps)
        },
        probes,
        &mut rng,
    )
}

pub fn check_actor(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = probe_spec();
    let actor = Actor::new(spec.clone(), &mut rng).expect("valid spec");
    let states: Vec<StateTensor> = (0..3).map(|_| random_state(&spec, &mut rng)).collect();
    let eps = random_tensor(3, spec.action_dim(), &mut rng);
    let proj = random_tensor(3, spec.action_dim(), &mut rng);
    gradcheck(
        &actor.params,
        |g, p| {
            let refs: Vec<&StateTensor> = states.iter().collect();
            let vars = actor.forward_graph(g, p, &refs).expect("shapes match");
            let (act, lp) = reparameterize(g, vars, &eps);
            let pa = project(g, act, &proj);
            let lps = g.sum(lp);
            let lps = g.scale(lps, 0.1);
            g.add(pa, lps)
        },
        probes,
        &mut rng,
    )
}

pub fn check_critic(seed: u64, probes: usize) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = probe_spec();
    let critic = Critic::new(spec.clone(), &mut rng).expect("valid spec");
    let states: Vec<StateTensor> = (0..3).map(|_| random_state(&spec, &mut rng)).collect();
    let actions = random_tensor(3, spec.action_dim(), &mut rng);
    let targets = random_tensor(3, 1, &mut rng);
    gradcheck(
        &critic.params,
        |g, p| {
            let refs: Vec<&StateTensor> = states.iter().collect();
            let a = g.constant(actions.clone());
            let q = critic.forward_graph(g, p, &refs, a).expect("shapes match");
            let t = g.constant(targets.clone());
            let d = g.sub(q, t);
            let sq = g.square(d);
            g.mean(sq)
        },
        probes,
        &mut rng,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_quadratic_is_exact() {
        let r = check_linear_quadratic(1);
        assert!(r.max_rel_error < 1e-7, "{r:?}");
        assert_eq!(r.probes, 4 * 3 + 3);
    }

    #[test]
    fn layers_pass() {
        for seed in 0..3 {
            for r in [
                check_linear(seed, 200),
                check_conv(seed, 200),
                check_squash_head(seed, 200),
            ] {
                assert!(r.max_rel_error < 1e-4, "seed {seed}: {r:?}");
            }
            let r = check_attention(seed, 200);
            assert!(r.max_rel_error < 1e-5, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn networks_pass() {
        let r = check_actor(11, 150);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
        let r = check_critic(12, 150);
        assert!(r.max_rel_error < 1e-4, "{r:?}");
    }
}
