//! Tape-based reverse-mode differentiation over 2-D tensors.
//!
//! Sequence layers use a token-major layout: a batch of `S` sequences of
//! length `L` with `C` channels is a `(S*L) x C` matrix whose row `s*L + l`
//! is token `l` of sequence `s`.

use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

type BackwardFn = Box<dyn Fn(&Tensor) -> Vec<Tensor>>;

struct Node {
    value: Tensor,
    parents: Vec<usize>,
    backward: Option<BackwardFn>,
    requires_grad: bool,
}

/// Inputs of non-differentiable points, tracked for finite-difference checks.
enum Kink {
    Relu(usize),
    Min(usize, usize),
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
    kinks: Vec<Kink>,
}

/// Gradients of one scalar with respect to every node that requires them.
pub struct Grads {
    grads: Vec<Option<Tensor>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }

    /// Gradient of `v`, zeros if nothing flowed into it.
    pub fn get_or_zeros(&self, v: Var, shape: (usize, usize)) -> Tensor {
        self.get(v).cloned().unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
}

fn softmax_rows(x: &mut [f64], cols: usize) {
    for row in x.chunks_mut(cols) {
        let max = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
}

/// Numerically stable `ln(1 + e^x)`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, parents: Vec<usize>, backward: BackwardFn) -> Var {
        let requires_grad = parents.iter().any(|&p| self.nodes[p].requires_grad);
        self.nodes.push(Node {
            value,
            parents,
            backward: if requires_grad { Some(backward) } else { None },
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            parents: Vec::new(),
            backward: None,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    /// A leaf whose gradient is wanted.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.value(v).shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        let out = av.matmul(&bv);
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |g| vec![g.matmul_t(&bv), av.t_matmul(g)]),
        )
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(out, vec![a.0, b.0], Box::new(|g| vec![g.clone(), g.clone()]))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.value(a).zip_map(self.value(b), |x, y| x - y);
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(|g| vec![g.clone(), g.map(|x| -x)]),
        )
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        let out = av.zip_map(&bv, |x, y| x * y);
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |g| vec![g.zip_map(&bv, |x, y| x * y), g.zip_map(&av, |x, y| x * y)]),
        )
    }

    pub fn min(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (self.value(a).clone(), self.value(b).clone());
        self.kinks.push(Kink::Min(a.0, b.0));
        let mask = av.zip_map(&bv, |x, y| if x <= y { 1.0 } else { 0.0 });
        let out = av.zip_map(&bv, f64::min);
        self.push(
            out,
            vec![a.0, b.0],
            Box::new(move |g| {
                vec![
                    g.zip_map(&mask, |x, m| x * m),
                    g.zip_map(&mask, |x, m| x * (1.0 - m)),
                ]
            }),
        )
    }

    /// Adds a `1 x C` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.shape(row), (1, c), "bias shape");
        let mut out = self.value(a).clone();
        let b = self.value(row).data.clone();
        for chunk in out.data.chunks_mut(c) {
            chunk.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
        }
        self.push(
            out,
            vec![a.0, row.0],
            Box::new(move |g| {
                let mut gb = vec![0.0; c];
                for chunk in g.data.chunks(c) {
                    gb.iter_mut().zip(chunk).for_each(|(x, y)| *x += y);
                }
                debug_assert_eq!(g.rows, r);
                vec![g.clone(), Tensor::new(1, c, gb)]
            }),
        )
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| k * x);
        self.push(out, vec![a.0], Box::new(move |g| vec![g.map(|x| k * x)]))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let out = self.value(a).map(|x| x + k);
        self.push(out, vec![a.0], Box::new(|g| vec![g.clone()]))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64, f64) -> f64 + 'static) -> Var {
        let x = self.value(a).clone();
        let y = x.map(f);
        let yc = y.clone();
        self.push(
            y,
            vec![a.0],
            Box::new(move |g| {
                let mut out = g.clone();
                for ((o, &xi), &yi) in out.data.iter_mut().zip(&x.data).zip(&yc.data) {
                    *o *= df(xi, yi);
                }
                vec![out]
            }),
        )
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.kinks.push(Kink::Relu(a.0));
        self.unary(
            a,
            move |x| if x > 0.0 { x } else { slope * x },
            move |x, _| if x > 0.0 { 1.0 } else { slope },
        )
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.unary(a, f64::tanh, |_, y| 1.0 - y * y)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        self.unary(a, f64::exp, |_, y| y)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, |_, y| y * (1.0 - y))
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        self.unary(a, softplus, |x, _| sigmoid(x))
    }

    pub fn square(&mut self, a: Var) -> Var {
        self.unary(a, |x| x * x, |x, _| 2.0 * x)
    }

    /// Row sums: `R x C -> R x 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::new(r, 1, self.value(a).data.chunks(c).map(|ch| ch.iter().sum()).collect());
        self.push(
            out,
            vec![a.0],
            Box::new(move |g| {
                let mut d = Vec::with_capacity(r * c);
                for &gi in &g.data {
                    d.extend(std::iter::repeat_n(gi, c));
                }
                vec![Tensor::new(r, c, d)]
            }),
        )
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = Tensor::scalar(self.value(a).sum());
        self.push(out, vec![a.0], Box::new(move |g| vec![Tensor::full(r, c, g.item())]))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let s = self.sum(a);
        self.scale(s, 1.0 / (r * c) as f64)
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Var {
        let (r, ca) = self.shape(a);
        let (rb, cb) = self.shape(b);
        assert_eq!(r, rb, "concat row mismatch");
        let (av, bv) = (self.value(a), self.value(b));
        let mut d = Vec::with_capacity(r * (ca + cb));
        for i in 0..r {
            d.extend_from_slice(av.row(i));
            d.extend_from_slice(bv.row(i));
        }
        self.push(
            Tensor::new(r, ca + cb, d),
            vec![a.0, b.0],
            Box::new(move |g| {
                let mut ga = Vec::with_capacity(r * ca);
                let mut gb = Vec::with_capacity(r * cb);
                for row in g.data.chunks(ca + cb) {
                    ga.extend_from_slice(&row[..ca]);
                    gb.extend_from_slice(&row[ca..]);
                }
                vec![Tensor::new(r, ca, ga), Tensor::new(r, cb, gb)]
            }),
        )
    }

    /// Columns `start..end`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(start < end && end <= c, "column slice out of range");
        let w = end - start;
        let d: Vec<f64> = self
            .value(a)
            .data
            .chunks(c)
            .flat_map(|row| row[start..end].iter().copied())
            .collect();
        self.push(
            Tensor::new(r, w, d),
            vec![a.0],
            Box::new(move |g| {
                let mut out = Tensor::zeros(r, c);
                for i in 0..r {
                    out.data[i * c + start..i * c + end].copy_from_slice(g.row(i));
                }
                vec![out]
            }),
        )
    }

    /// Row-major reinterpretation.
    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(r * c, rows * cols, "reshape size mismatch");
        let out = Tensor::new(rows, cols, self.value(a).data.clone());
        self.push(
            out,
            vec![a.0],
            Box::new(move |g| vec![Tensor::new(r, c, g.data.clone())]),
        )
    }

    /// Adds a `L x C` table to every length-`L` sequence.
    pub fn add_positional(&mut self, a: Var, table: Var) -> Var {
        let (r, c) = self.shape(a);
        let (l, ct) = self.shape(table);
        assert!(ct == c && r % l == 0, "positional table shape");
        let mut out = self.value(a).clone();
        let t = self.value(table).data.clone();
        for seq in out.data.chunks_mut(l * c) {
            seq.iter_mut().zip(&t).for_each(|(x, y)| *x += y);
        }
        self.push(
            out,
            vec![a.0, table.0],
            Box::new(move |g| {
                let mut gt = vec![0.0; l * c];
                for seq in g.data.chunks(l * c) {
                    gt.iter_mut().zip(seq).for_each(|(x, y)| *x += y);
                }
                vec![g.clone(), Tensor::new(l, c, gt)]
            }),
        )
    }

    /// Same-padded 1-D patch extraction: `(S*L) x C -> (S*L) x (K*C)` where
    /// the row for token `l` holds tokens `l - K/2 .. l - K/2 + K` (zeros
    /// outside the sequence), offset-major.
    pub fn unfold(&mut self, a: Var, seq_len: usize, kernel: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(seq_len > 0 && r % seq_len == 0, "rows not a multiple of the sequence length");
        let pad = kernel / 2;
        let width = kernel * c;
        let src = self.value(a);
        let mut d = vec![0.0; r * width];
        for row in 0..r {
            let (s, l) = (row / seq_len, row % seq_len);
            for j in 0..kernel {
                let pos = l as isize + j as isize - pad as isize;
                if pos < 0 || pos >= seq_len as isize {
                    continue;
                }
                let from = (s * seq_len + pos as usize) * c;
                d[row * width + j * c..row * width + (j + 1) * c].copy_from_slice(&src.data[from..from + c]);
            }
        }
        self.push(
            Tensor::new(r, width, d),
            vec![a.0],
            Box::new(move |g| {
                let mut out = Tensor::zeros(r, c);
                for row in 0..r {
                    let (s, l) = (row / seq_len, row % seq_len);
                    for j in 0..kernel {
                        let pos = l as isize + j as isize - pad as isize;
                        if pos < 0 || pos >= seq_len as isize {
                            continue;
                        }
                        let to = (s * seq_len + pos as usize) * c;
                        let from = row * width + j * c;
                        for k in 0..c {
                            out.data[to + k] += g.data[from + k];
                        }
                    }
                }
                vec![out]
            }),
        )
    }

    /// Multi-head scaled dot-product self-attention within each length-`L`
    /// sequence. `q`, `k`, `v` are `(S*L) x D`, heads split `D` evenly.
    pub fn attention(&mut self, q: Var, k: Var, v: Var, seq_len: usize, heads: usize) -> Var {
        let (r, d) = self.shape(q);
        assert_eq!(self.shape(k), (r, d));
        assert_eq!(self.shape(v), (r, d));
        assert!(heads > 0 && d % heads == 0, "dimension not divisible by heads");
        assert!(r % seq_len == 0, "rows not a multiple of the sequence length");
        let n_seq = r / seq_len;
        let dh = d / heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let (qv, kv, vv) = (self.value(q).clone(), self.value(k).clone(), self.value(v).clone());
        let l = seq_len;
        // weights[(s*heads + h)] is an L x L row-stochastic matrix
        let mut weights = vec![0.0; n_seq * heads * l * l];
        let mut out = Tensor::zeros(r, d);
        for s in 0..n_seq {
            for h in 0..heads {
                let w = &mut weights[(s * heads + h) * l * l..(s * heads + h + 1) * l * l];
                for i in 0..l {
                    let qi = &qv.data[(s * l + i) * d + h * dh..(s * l + i) * d + (h + 1) * dh];
                    for j in 0..l {
                        let kj = &kv.data[(s * l + j) * d + h * dh..(s * l + j) * d + (h + 1) * dh];
                        w[i * l + j] = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                softmax_rows(w, l);
                for i in 0..l {
                    for j in 0..l {
                        let a = w[i * l + j];
                        for e in 0..dh {
                            out.data[(s * l + i) * d + h * dh + e] += a * vv.data[(s * l + j) * d + h * dh + e];
                        }
                    }
                }
            }
        }
        self.push(
            out,
            vec![q.0, k.0, v.0],
            Box::new(move |g| {
                let mut gq = Tensor::zeros(r, d);
                let mut gk = Tensor::zeros(r, d);
                let mut gv = Tensor::zeros(r, d);
                let mut ga = vec![0.0; l * l];
                for s in 0..n_seq {
                    for h in 0..heads {
                        let w = &weights[(s * heads + h) * l * l..(s * heads + h + 1) * l * l];
                        let at = |t: usize, e: usize| (s * l + t) * d + h * dh + e;
                        // dA = dO V^T, dV = A^T dO
                        for i in 0..l {
                            for j in 0..l {
                                let mut acc = 0.0;
                                for e in 0..dh {
                                    acc += g.data[at(i, e)] * vv.data[at(j, e)];
                                    gv.data[at(j, e)] += w[i * l + j] * g.data[at(i, e)];
                                }
                                ga[i * l + j] = acc;
                            }
                        }
                        // softmax backward, then through the scaled scores
                        for i in 0..l {
                            let dot: f64 = (0..l).map(|j| ga[i * l + j] * w[i * l + j]).sum();
                            for j in 0..l {
                                let ds = scale * w[i * l + j] * (ga[i * l + j] - dot);
                                if ds == 0.0 {
                                    continue;
                                }
                                for e in 0..dh {
                                    gq.data[at(i, e)] += ds * kv.data[at(j, e)];
                                    gk.data[at(j, e)] += ds * qv.data[at(i, e)];
                                }
                            }
                        }
                    }
                }
                vec![gq, gk, gv]
            }),
        )
    }

    /// Mean over each length-`L` sequence: `(S*L) x C -> S x C`.
    pub fn segment_mean(&mut self, a: Var, seq_len: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(r % seq_len == 0, "rows not a multiple of the sequence length");
        let n = r / seq_len;
        let mut out = Tensor::zeros(n, c);
        for (row, chunk) in self.value(a).data.chunks(c).enumerate() {
            let s = row / seq_len;
            for (o, x) in out.data[s * c..(s + 1) * c].iter_mut().zip(chunk) {
                *o += x / seq_len as f64;
            }
        }
        self.push(
            out,
            vec![a.0],
            Box::new(move |g| {
                let mut d = Vec::with_capacity(r * c);
                for row in 0..r {
                    let s = row / seq_len;
                    d.extend(g.row(s).iter().map(|x| x / seq_len as f64));
                }
                vec![Tensor::new(r, c, d)]
            }),
        )
    }

    /// Last token of each length-`L` sequence: `(S*L) x C -> S x C`.
    pub fn segment_last(&mut self, a: Var, seq_len: usize) -> Var {
        let (r, c) = self.shape(a);
        assert!(r % seq_len == 0, "rows not a multiple of the sequence length");
        let n = r / seq_len;
        let src = self.value(a);
        let d: Vec<f64> = (0..n).flat_map(|s| src.row((s + 1) * seq_len - 1).to_vec()).collect();
        self.push(
            Tensor::new(n, c, d),
            vec![a.0],
            Box::new(move |g| {
                let mut out = Tensor::zeros(r, c);
                for s in 0..n {
                    let row = (s + 1) * seq_len - 1;
                    out.data[row * c..(row + 1) * c].copy_from_slice(g.row(s));
                }
                vec![out]
            }),
        )
    }

    /// Which side of every kink each element sits on. Two graphs built from
    /// nearby inputs with equal signatures lie in the same smooth region.
    pub fn kink_signature(&self) -> Vec<bool> {
        let mut sig = Vec::new();
        for k in &self.kinks {
            match *k {
                Kink::Relu(i) => sig.extend(self.nodes[i].value.data.iter().map(|&x| x > 0.0)),
                Kink::Min(a, b) => sig.extend(
                    self.nodes[a]
                        .value
                        .data
                        .iter()
                        .zip(&self.nodes[b].value.data)
                        .map(|(x, y)| x <= y),
                ),
            }
        }
        sig
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Grads {
        assert_eq!(self.shape(loss), (1, 1), "loss must be a scalar");
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            let Some(backward) = &node.backward else {
                continue;
            };
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let parent_grads = backward(&g);
            for (&p, pg) in node.parents.iter().zip(parent_grads) {
                if !self.nodes[p].requires_grad {
                    continue;
                }
                match &mut grads[p] {
                    Some(acc) => acc.add_assign(&pg),
                    slot @ None => *slot = Some(pg),
                }
            }
            grads[idx] = Some(g);
        }
        Grads { grads }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: impl Fn(&Tensor) -> f64, x: &Tensor) -> Tensor {
        let h = 1e-6;
        let mut out = Tensor::zeros(x.rows, x.cols);
        for i in 0..x.len() {
            let mut p = x.clone();
            p.data[i] += h;
            let mut m = x.clone();
            m.data[i] -= h;
            out.data[i] = (f(&p) - f(&m)) / (2.0 * h);
        }
        out
    }

    fn input(rows: usize, cols: usize, seed: u64) -> Tensor {
        let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let data = (0..rows * cols)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
            })
            .collect();
        Tensor::new(rows, cols, data)
    }

    fn check(build: impl Fn(&mut Graph, Var) -> Var, x: Tensor) {
        let f = |t: &Tensor| {
            let mut g = Graph::new();
            let v = g.constant(t.clone());
            let y = build(&mut g, v);
            g.value(y).sum()
        };
        let mut g = Graph::new();
        let v = g.variable(x.clone());
        let y = build(&mut g, v);
        let loss = g.sum(y);
        let grads = g.backward(loss);
        let analytic = grads.get_or_zeros(v, x.shape());
        let numeric = numeric_grad(f, &x);
        for (a, n) in analytic.data.iter().zip(&numeric.data) {
            assert!((a - n).abs() < 1e-6 * (1.0 + n.abs()), "analytic {a} numeric {n}");
        }
    }

    #[test]
    fn elementwise_ops() {
        let x = input(3, 4, 1);
        check(|g, v| g.tanh(v), x.clone());
        check(|g, v| g.sigmoid(v), x.clone());
        check(|g, v| g.softplus(v), x.clone());
        check(|g, v| g.exp(v), x.clone());
        check(|g, v| g.leaky_relu(v, 0.1), x.clone());
        check(|g, v| g.square(v), x.clone());
        check(
            |g, v| {
                let s = g.scale(v, 0.5);
                g.mul(v, s)
            },
            x,
        );
    }

    #[test]
    fn structural_ops() {
        let x = input(6, 4, 2);
        let w = input(4, 3, 3);
        check(
            |g, v| {
                let c = g.constant(w.clone());
                let y = g.matmul(v, c);
                g.square(y)
            },
            x.clone(),
        );
        check(
            |g, v| {
                let u = g.unfold(v, 3, 3);
                g.square(u)
            },
            x.clone(),
        );
        check(
            |g, v| {
                let m = g.segment_mean(v, 3);
                let l = g.segment_last(v, 3);
                let c = g.concat_cols(m, l);
                let r = g.reshape(c, 1, 16);
                g.square(r)
            },
            x.clone(),
        );
        check(
            |g, v| {
                let s = g.slice_cols(v, 1, 3);
                let t = g.sum_cols(s);
                g.square(t)
            },
            x,
        );
    }

    #[test]
    fn attention_gradients() {
        let x = input(8, 4, 4);
        let wq = input(4, 4, 5);
        let wk = input(4, 4, 6);
        let wv = input(4, 4, 7);
        let proj = input(8, 4, 8);
        check(
            |g, v| {
                let (a, b, c) = (g.constant(wq.clone()), g.constant(wk.clone()), g.constant(wv.clone()));
                let q = g.matmul(v, a);
                let k = g.matmul(v, b);
                let vv = g.matmul(v, c);
                let o = g.attention(q, k, vv, 4, 2);
                let p = g.constant(proj.clone());
                g.mul(o, p)
            },
            x,
        );
    }

    #[test]
    fn unfold_same_padding_layout() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::new(3, 1, vec![1.0, 2.0, 3.0]));
        let u = g.unfold(x, 3, 3);
        assert_eq!(g.value(u).data, vec![0.0, 1.0, 2.0, 1.0, 2.0, 3.0, 2.0, 3.0, 0.0]);
    }

    #[test]
    fn min_routes_gradient() {
        let mut g = Graph::new();
        let a = g.variable(Tensor::row_vector(vec![1.0, 5.0]));
        let b = g.variable(Tensor::row_vector(vec![2.0, 3.0]));
        let m = g.min(a, b);
        let s = g.sum(m);
        let grads = g.backward(s);
        assert_eq!(grads.get(a).unwrap().data, vec![1.0, 0.0]);
        assert_eq!(grads.get(b).unwrap().data, vec![0.0, 1.0]);
    }
}
