//! Parameter storage, layers and the actor/critic networks.
//!
//! Both networks share one trunk design: per-asset 1-D convolutions over the
//! history axis, multi-head self-attention over the same axis, mean and last
//! token pooling, then fully connected layers over the concatenation of all
//! assets.

use duplex_core::preprocess::{StateTensor, N_FEATURES};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Graph, Var};
use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("state shape {got:?} does not match network input {expected:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        got: (usize, usize),
    },
    #[error("action has {got} components, network expects {expected}")]
    ActionMismatch { expected: usize, got: usize },
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

pub type ParamId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Tensor>,
    /// Layer index of each parameter, used for per-layer learning rate factors.
    pub groups: Vec<usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            values: Vec::new(),
            groups: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor, group: usize) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        self.groups.push(group);
        self.values.len() - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }

    /// Puts every parameter on the graph, trainable or as constants.
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Vec<Var> {
        self.values
            .iter()
            .map(|v| {
                if trainable {
                    g.variable(v.clone())
                } else {
                    g.constant(v.clone())
                }
            })
            .collect()
    }

    /// `self <- tau * other + (1 - tau) * self`.
    pub fn soft_update(&mut self, other: &ParamStore, tau: f64) {
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x = tau * y + (1.0 - tau) * *x);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(Tensor::is_finite)
    }
}

impl Default for ParamStore {
    fn default() -> Self {
        ParamStore::new()
    }
}

fn uniform(rows: usize, cols: usize, limit: f64, rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::new(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.random_range(-limit..=limit)).collect(),
    )
}

fn xavier(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Tensor {
    uniform(rows, cols, (6.0 / (rows + cols) as f64).sqrt(), rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Linear {
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, group: usize, rng: &mut ChaCha8Rng) -> Self {
        Linear {
            w: store.add(format!("{name}.w"), xavier(inputs, outputs, rng), group),
            b: store.add(format!("{name}.b"), Tensor::zeros(1, outputs), group),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var) -> Var {
        let y = g.matmul(x, p[self.w]);
        g.add_row(y, p[self.b])
    }
}

/// Same-padded 1-D convolution over token-major sequences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conv1d {
    pub linear: Linear,
    pub kernel: usize,
}

impl Conv1d {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        channels: usize,
        filters: usize,
        kernel: usize,
        group: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        Conv1d {
            linear: Linear::new(store, name, kernel * channels, filters, group, rng),
            kernel,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, seq_len: usize) -> Var {
        let patches = g.unfold(x, seq_len, self.kernel);
        self.linear.forward(g, p, patches)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelfAttention {
    pub wq: ParamId,
    pub wk: ParamId,
    pub wv: ParamId,
    pub out: Linear,
    pub heads: usize,
    pub dim: usize,
}

impl SelfAttention {
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        inputs: usize,
        dim: usize,
        heads: usize,
        group: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        SelfAttention {
            wq: store.add(format!("{name}.wq"), xavier(inputs, dim, rng), group),
            wk: store.add(format!("{name}.wk"), xavier(inputs, dim, rng), group),
            wv: store.add(format!("{name}.wv"), xavier(inputs, dim, rng), group),
            out: Linear::new(store, &format!("{name}.out"), dim, dim, group, rng),
            heads,
            dim,
        }
    }

    pub fn forward(&self, g: &mut Graph, p: &[Var], x: Var, seq_len: usize) -> Var {
        let q = g.matmul(x, p[self.wq]);
        let k = g.matmul(x, p[self.wk]);
        let v = g.matmul(x, p[self.wv]);
        let a = g.attention(q, k, v, seq_len, self.heads);
        self.out.forward(g, p, a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSpec {
    pub assets: usize,
    pub history: usize,
    pub conv_filters: Vec<usize>,
    pub kernel_size: usize,
    pub attention_heads: usize,
    pub attention_dim: usize,
    pub fc_widths: Vec<usize>,
    /// Negative-side slope of the leaky rectifier.
    pub activation: f64,
    /// One factor per layer (convolutions, attention, fully connected
    /// layers, heads). Empty means all ones.
    pub per_layer_lrf: Vec<f64>,
    /// Learned additive position table before attention.
    pub positional_encoding: bool,
}

impl Default for NetworkSpec {
    fn default() -> Self {
        NetworkSpec {
            assets: 1,
            history: 49,
            conv_filters: vec![16, 32],
            kernel_size: 3,
            attention_heads: 2,
            attention_dim: 16,
            fc_widths: vec![64],
            activation: 0.01,
            per_layer_lrf: Vec::new(),
            positional_encoding: false,
        }
    }
}

impl NetworkSpec {
    /// Full-width layout with 64 and 128 filters.
    pub fn full(assets: usize, history: usize) -> Self {
        NetworkSpec {
            assets,
            history,
            conv_filters: vec![64, 128],
            attention_heads: 4,
            attention_dim: 64,
            fc_widths: vec![256, 128],
            ..Default::default()
        }
    }

    pub fn desk(assets: usize, history: usize) -> Self {
        NetworkSpec {
            assets,
            history,
            ..Default::default()
        }
    }

    pub fn action_dim(&self) -> usize {
        self.assets + 1
    }

    pub fn layer_count(&self) -> usize {
        self.conv_filters.len() + 1 + self.fc_widths.len() + 1
    }

    pub fn lrf(&self, group: usize) -> f64 {
        self.per_layer_lrf.get(group).copied().unwrap_or(1.0)
    }

    pub fn validate(&self) -> Result<(), NetworkError> {
        let bad = |m: &str| Err(NetworkError::InvalidSpec(m.to_string()));
        if self.assets == 0 || self.history == 0 {
            return bad("assets and history must be >= 1");
        }
        if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            return bad("need at least one convolution with >= 1 filter");
        }
        if self.kernel_size == 0 || self.attention_heads == 0 || self.attention_dim == 0 {
            return bad("kernel size, attention heads and attention dim must be >= 1");
        }
        if self.attention_dim % self.attention_heads != 0 {
            return bad("attention_dim must be divisible by attention_heads");
        }
        if self.fc_widths.contains(&0) {
            return bad("fully connected widths must be >= 1");
        }
        if !(self.activation.is_finite() && self.activation >= 0.0) {
            return bad("activation slope must be finite and >= 0");
        }
        if !self.per_layer_lrf.is_empty() {
            if self.per_layer_lrf.len() != self.layer_count() {
                return Err(NetworkError::InvalidSpec(format!(
                    "per_layer_lrf has {} entries, network has {} layers",
                    self.per_layer_lrf.len(),
                    self.layer_count()
                )));
            }
            if self.per_layer_lrf.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return bad("learning rate factors must be positive");
            }
        }
        Ok(())
    }

    /// Checks one state against the input contract.
    pub fn check_state(&self, state: &StateTensor) -> Result<(), NetworkError> {
        if state.assets != self.assets || state.history != self.history {
            return Err(NetworkError::ShapeMismatch {
                expected: (self.assets, self.history),
                got: (state.assets, state.history),
            });
        }
        Ok(())
    }

    fn head_group(&self) -> usize {
        self.layer_count() - 1
    }
}

/// Token-major input: row `(b*M + a)*N + k` holds the four features of asset
/// `a` at history position `k` in state `b`.
pub fn state_tokens(states: &[&StateTensor]) -> Tensor {
    let first = states[0];
    let (m, n) = (first.assets, first.history);
    let mut d = Vec::with_capacity(states.len() * m * n * N_FEATURES);
    for s in states {
        for a in 0..m {
            for k in 0..n {
                for f in 0..N_FEATURES {
                    d.push(s.get(a, f, k));
                }
            }
        }
    }
    Tensor::new(states.len() * m * n, N_FEATURES, d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trunk {
    pub convs: Vec<Conv1d>,
    pub positional: Option<ParamId>,
    pub attention: SelfAttention,
    pub fcs: Vec<Linear>,
    pub output_width: usize,
}

impl Trunk {
    pub fn new(spec: &NetworkSpec, store: &mut ParamStore, rng: &mut ChaCha8Rng) -> Self {
        let mut channels = N_FEATURES;
        let mut convs = Vec::new();
        for (i, &f) in spec.conv_filters.iter().enumerate() {
            convs.push(Conv1d::new(store, &format!("conv{}", i + 1), channels, f, spec.kernel_size, i, rng));
            channels = f;
        }
        let attn_group = spec.conv_filters.len();
        let positional = spec.positional_encoding.then(|| {
            store.add("positional", uniform(spec.history, channels, 0.02, rng), attn_group)
        });
        let attention = SelfAttention::new(store, "attention", channels, spec.attention_dim, spec.attention_heads, attn_group, rng);
        let mut width = spec.assets * 2 * spec.attention_dim;
        let mut fcs = Vec::new();
        for (i, &w) in spec.fc_widths.iter().enumerate() {
            fcs.push(Linear::new(store, &format!("fc{}", i + 1), width, w, attn_group + 1 + i, rng));
            width = w;
        }
        Trunk {
            convs,
            positional,
            attention,
            fcs,
            output_width: width,
        }
    }

    /// `tokens` as built by [`state_tokens`] for `batch` states.
    pub fn forward(&self, spec: &NetworkSpec, g: &mut Graph, p: &[Var], tokens: Var, batch: usize) -> Var {
        let n = spec.history;
        let mut x = tokens;
        for conv in &self.convs {
            let y = conv.forward(g, p, x, n);
            x = g.leaky_relu(y, spec.activation);
        }
        if let Some(pos) = self.positional {
            x = g.add_positional(x, p[pos]);
        }
        let a = self.attention.forward(g, p, x, n);
        let mean = g.segment_mean(a, n);
        let last = g.segment_last(a, n);
        let pooled = g.concat_cols(mean, last);
        let mut h = g.reshape(pooled, batch, spec.assets * 2 * spec.attention_dim);
        for fc in &self.fcs {
            let y = fc.forward(g, p, h);
            h = g.leaky_relu(y, spec.activation);
        }
        h
    }
}

pub const LOG_STD_MIN: f64 = -9.210340371976184; // ln 1e-4
pub const LOG_STD_MAX: f64 = std::f64::consts::LN_2;
/// Pre-activation giving an initial standard deviation of 0.5.
const LOG_STD_BIAS_INIT: f64 = 1.8157;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Actor {
    pub spec: NetworkSpec,
    pub params: ParamStore,
    pub trunk: Trunk,
    pub mean_head: Linear,
    pub log_std_head: Linear,
}

/// Graph handles for a batch of Gaussian policy outputs.
#[derive(Debug, Clone, Copy)]
pub struct PolicyVars {
    pub mean: Var,
    pub log_std: Var,
    pub std: Var,
}

/// Gaussian policy parameters for one state (pre-squash space).
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutput {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Actor {
    pub fn new(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Self, NetworkError> {
        spec.validate()?;
        let mut params = ParamStore::new();
        let trunk = Trunk::new(&spec, &mut params, rng);
        let head = spec.head_group();
        let a = spec.action_dim();
        let mean_head = Linear::new(&mut params, "mean", trunk.output_width, a, head, rng);
        let log_std_head = Linear::new(&mut params, "log_std", trunk.output_width, a, head, rng);
        params.values[mean_head.w] = uniform(trunk.output_width, a, 3e-3, rng);
        params.values[log_std_head.w] = uniform(trunk.output_width, a, 3e-3, rng);
        params.values[log_std_head.b] = Tensor::full(1, a, LOG_STD_BIAS_INIT);
        Ok(Actor {
            spec,
            params,
            trunk,
            mean_head,
            log_std_head,
        })
    }

    /// Zeroes the mean head so every state maps to a zero mean.
    pub fn zero_mean_head(&mut self) {
        let w = &mut self.params.values[self.mean_head.w];
        w.data.iter_mut().for_each(|x| *x = 0.0);
        let b = &mut self.params.values[self.mean_head.b];
        b.data.iter_mut().for_each(|x| *x = 0.0);
    }

    pub fn forward_graph(&self, g: &mut Graph, p: &[Var], states: &[&StateTensor]) -> Result<PolicyVars, NetworkError> {
        for s in states {
            self.spec.check_state(s)?;
        }
        let tokens = g.constant(state_tokens(states));
        let h = self.trunk.forward(&self.spec, g, p, tokens, states.len());
        let mean = self.mean_head.forward(g, p, h);
        let z = self.log_std_head.forward(g, p, h);
        let s = g.sigmoid(z);
        let s = g.scale(s, LOG_STD_MAX - LOG_STD_MIN);
        let log_std = g.add_scalar(s, LOG_STD_MIN);
        let std = g.exp(log_std);
        Ok(PolicyVars { mean, log_std, std })
    }

    pub fn forward(&self, state: &StateTensor) -> Result<PolicyOutput, NetworkError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let vars = self.forward_graph(&mut g, &p, &[state])?;
        Ok(PolicyOutput {
            mean: g.value(vars.mean).data.clone(),
            std: g.value(vars.std).data.clone(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Critic {
    pub spec: NetworkSpec,
    pub params: ParamStore,
    pub trunk: Trunk,
    pub hidden: Linear,
    pub out: Linear,
}

impl Critic {
    pub fn new(spec: NetworkSpec, rng: &mut ChaCha8Rng) -> Result<Self, NetworkError> {
        spec.validate()?;
        let mut params = ParamStore::new();
        let trunk = Trunk::new(&spec, &mut params, rng);
        let head = spec.head_group();
        let width = trunk.output_width;
        let hidden = Linear::new(&mut params, "q_hidden", width + spec.action_dim(), width, head, rng);
        let out = Linear::new(&mut params, "q_out", width, 1, head, rng);
        Ok(Critic {
            spec,
            params,
            trunk,
            hidden,
            out,
        })
    }

    /// Zeroes the output layer so every input maps to `Q = 0`.
    pub fn zero_output(&mut self) {
        for id in [self.out.w, self.out.b] {
            self.params.values[id].data.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// `actions` is a `B x (M+1)` graph value. Returns `B x 1`.
    pub fn forward_graph(
        &self,
        g: &mut Graph,
        p: &[Var],
        states: &[&StateTensor],
        actions: Var,
    ) -> Result<Var, NetworkError> {
        for s in states {
            self.spec.check_state(s)?;
        }
        let (rows, cols) = g.shape(actions);
        if cols != self.spec.action_dim() || rows != states.len() {
            return Err(NetworkError::ActionMismatch {
                expected: self.spec.action_dim(),
                got: cols,
            });
        }
        let tokens = g.constant(state_tokens(states));
        let h = self.trunk.forward(&self.spec, g, p, tokens, states.len());
        let x = g.concat_cols(h, actions);
        let y = self.hidden.forward(g, p, x);
        let y = g.leaky_relu(y, self.spec.activation);
        Ok(self.out.forward(g, p, y))
    }

    pub fn forward(&self, state: &StateTensor, action: &[f64]) -> Result<f64, NetworkError> {
        let mut g = Graph::new();
        let p = self.params.bind(&mut g, false);
        let a = g.constant(Tensor::row_vector(action.to_vec()));
        let q = self.forward_graph(&mut g, &p, &[state], a)?;
        Ok(g.value(q).item())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::rand_core::SeedableRng;

    fn tiny_spec() -> NetworkSpec {
        NetworkSpec {
            assets: 2,
            history: 6,
            conv_filters: vec![4, 6],
            attention_heads: 2,
            attention_dim: 4,
            fc_widths: vec![8],
            ..Default::default()
        }
    }

    fn state(seed: u64, spec: &NetworkSpec) -> StateTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = StateTensor::zeros(spec.assets, spec.history, 0);
        s.values.iter_mut().for_each(|v| *v = rng.random_range(-0.1..0.1));
        s
    }

    #[test]
    fn zero_heads_give_zero_outputs() {
        let spec = tiny_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut actor = Actor::new(spec.clone(), &mut rng).unwrap();
        actor.zero_mean_head();
        let out = actor.forward(&state(2, &spec)).unwrap();
        assert_eq!(out.mean, vec![0.0; 3]);
        assert!(out.std.iter().all(|&s| (1e-4..=2.0).contains(&s)));

        let mut critic = Critic::new(spec.clone(), &mut rng).unwrap();
        critic.zero_output();
        assert_eq!(critic.forward(&state(3, &spec), &[0.1, 0.2, 0.3]).unwrap(), 0.0);
    }

    #[test]
    fn forward_is_deterministic_and_sensitive() {
        let spec = tiny_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let actor = Actor::new(spec.clone(), &mut rng).unwrap();
        let critic = Critic::new(spec.clone(), &mut rng).unwrap();
        let s = state(5, &spec);
        assert_eq!(actor.forward(&s).unwrap(), actor.forward(&s).unwrap());
        let a = [0.3, -0.2, 0.1];
        assert_eq!(critic.forward(&s, &a).unwrap(), critic.forward(&s, &a).unwrap());

        let mut bumped = s.clone();
        bumped.values[7] += 1e-3;
        assert_ne!(actor.forward(&s).unwrap().mean, actor.forward(&bumped).unwrap().mean);
        assert_ne!(critic.forward(&s, &a).unwrap(), critic.forward(&bumped, &a).unwrap());
    }

    #[test]
    fn shape_errors() {
        let spec = tiny_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let actor = Actor::new(spec.clone(), &mut rng).unwrap();
        let wrong = StateTensor::zeros(3, 6, 0);
        assert!(matches!(actor.forward(&wrong), Err(NetworkError::ShapeMismatch { .. })));
        let critic = Critic::new(spec.clone(), &mut rng).unwrap();
        assert!(matches!(
            critic.forward(&state(1, &spec), &[0.0, 1.0]),
            Err(NetworkError::ActionMismatch { .. })
        ));
        let bad = NetworkSpec {
            per_layer_lrf: vec![1.0; 2],
            ..tiny_spec()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn attention_permutation_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut store = ParamStore::new();
        let attn = SelfAttention::new(&mut store, "a", 3, 4, 2, 0, &mut rng);
        let l = 5;
        let x = Tensor::new(l, 3, (0..l * 3).map(|_| rng.random_range(-1.0..1.0)).collect());
        let perm = [3, 0, 4, 1, 2];
        let px = Tensor::new(l, 3, perm.iter().flat_map(|&i| x.row(i).to_vec()).collect());
        let run = |x: &Tensor| {
            let mut g = Graph::new();
            let p = store.bind(&mut g, false);
            let v = g.constant(x.clone());
            let y = attn.forward(&mut g, &p, v, l);
            g.value(y).clone()
        };
        let (y, py) = (run(&x), run(&px));
        for (k, &i) in perm.iter().enumerate() {
            for (a, b) in py.row(k).iter().zip(y.row(i)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
