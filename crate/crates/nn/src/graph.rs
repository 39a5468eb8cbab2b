use crate::kernels::{self, Window};
use crate::params::{ParamId, ParamStore};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// `Train` uses batch statistics in BatchNorm and records what backward
/// needs; `Eval` uses running statistics and records nothing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Pending BatchNorm running-statistics update from one training batch.
/// `batch_var` is the unbiased variance.
#[derive(Debug, Clone)]
pub struct StatUpdate {
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub batch_mean: Vec<f32>,
    pub batch_var: Vec<f32>,
    pub momentum: f32,
}

/// Parameters of a BatchNorm layer.
#[derive(Debug, Clone, Copy)]
pub struct BnParams {
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: ParamId,
    pub running_var: ParamId,
    pub eps: f32,
    pub momentum: f32,
}

enum Op {
    Leaf,
    Conv {
        x: Var,
        w: ParamId,
        win: Window,
        depthwise: bool,
    },
    BatchNorm {
        x: Var,
        gamma: ParamId,
        beta: ParamId,
        mean: Vec<f32>,
        invstd: Vec<f32>,
    },
    Relu(Var),
    Silu(Var),
    Sigmoid(Var),
    Add(Var, Var),
    ChannelMul {
        x: Var,
        s: Var,
    },
    MaxPool {
        x: Var,
        arg: Vec<u32>,
    },
    AvgPool {
        x: Var,
        win: Window,
    },
    GlobalAvg(Var),
    Linear {
        x: Var,
        w: ParamId,
        b: Option<ParamId>,
    },
    Concat(Vec<Var>),
    CrossEntropy {
        logits: Var,
        labels: Vec<usize>,
        probs: Vec<f32>,
    },
}

/// Gradients of trainable parameters, indexed by [`ParamId`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f32>>>,
}

impl Gradients {
    pub fn get(&self, id: ParamId) -> Option<&[f32]> {
        self.grads.get(id.index()).and_then(|g| g.as_deref())
    }

    /// Euclidean norm over all gradients.
    pub fn norm(&self) -> f64 {
        self.grads
            .iter()
            .flatten()
            .flat_map(|g| g.iter())
            .map(|&v| (v as f64) * (v as f64))
            .sum::<f64>()
            .sqrt()
    }
}

/// Record of one forward pass.
pub struct Graph<'p> {
    params: &'p ParamStore,
    mode: Mode,
    values: Vec<Tensor>,
    ops: Vec<Op>,
    stat_updates: Vec<StatUpdate>,
}

fn accumulate(slot: &mut Option<Vec<f32>>, g: Vec<f32>) {
    match slot {
        Some(acc) => {
            for (a, b) in acc.iter_mut().zip(g) {
                *a += b;
            }
        }
        None => *slot = Some(g),
    }
}

fn sigmoid(v: f32) -> f32 {
    1.0 / (1.0 + (-v).exp())
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore, mode: Mode) -> Self {
        Self {
            params,
            mode,
            values: Vec::new(),
            ops: Vec::new(),
            stat_updates: Vec::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.values[v.0]
    }

    pub fn stat_updates(&self) -> &[StatUpdate] {
        &self.stat_updates
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.values.push(value);
        self.ops.push(if self.mode == Mode::Train { op } else { Op::Leaf });
        Var(self.values.len() - 1)
    }

    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf)
    }

    /// Convolution without bias. `w` is `[o, c, k, k]`, or `[c, 1, k, k]`
    /// when `depthwise`.
    pub fn conv2d(&mut self, x: Var, w: ParamId, stride: usize, pad: usize, depthwise: bool) -> Var {
        let dims = self.values[x.0].dims4();
        let wt = self.params.get(w);
        let (o, wc, kh, kw) = wt.dims4();
        let win = Window { kh, kw, stride, pad };
        let (ho, wo) = win.out_size(dims.2, dims.3);
        let data = if depthwise {
            assert_eq!((o, wc), (dims.1, 1), "depthwise weight shape");
            kernels::depthwise_forward(self.values[x.0].data(), dims, wt.data(), win)
        } else {
            assert_eq!(wc, dims.1, "conv input channels");
            kernels::conv_forward(self.values[x.0].data(), dims, wt.data(), o, win)
        };
        let t = Tensor::new(vec![dims.0, o, ho, wo], data).expect("conv output shape");
        self.push(t, Op::Conv { x, w, win, depthwise })
    }

    pub fn batch_norm(&mut self, x: Var, p: BnParams) -> Var {
        let (n, c, h, w) = self.values[x.0].dims4();
        let hw = h * w;
        let m = n * hw;
        let (mean, invstd) = match self.mode {
            Mode::Train => {
                let xs = self.values[x.0].data();
                let mut mean = vec![0f32; c];
                let mut var = vec![0f32; c];
                for ch in 0..c {
                    let mut s = 0f64;
                    let mut s2 = 0f64;
                    for b in 0..n {
                        for &v in &xs[(b * c + ch) * hw..][..hw] {
                            s += v as f64;
                            s2 += (v as f64) * (v as f64);
                        }
                    }
                    let mu = s / m as f64;
                    mean[ch] = mu as f32;
                    var[ch] = (s2 / m as f64 - mu * mu).max(0.0) as f32;
                }
                let unbiased: Vec<f32> = if m > 1 {
                    var.iter().map(|&v| v * m as f32 / (m - 1) as f32).collect()
                } else {
                    var.clone()
                };
                self.stat_updates.push(StatUpdate {
                    running_mean: p.running_mean,
                    running_var: p.running_var,
                    batch_mean: mean.clone(),
                    batch_var: unbiased,
                    momentum: p.momentum,
                });
                let invstd: Vec<f32> = var.iter().map(|&v| 1.0 / (v + p.eps).sqrt()).collect();
                (mean, invstd)
            }
            Mode::Eval => (
                self.params.get(p.running_mean).data().to_vec(),
                self.params
                    .get(p.running_var)
                    .data()
                    .iter()
                    .map(|&v| 1.0 / (v + p.eps).sqrt())
                    .collect(),
            ),
        };
        let gamma = self.params.get(p.gamma).data();
        let beta = self.params.get(p.beta).data();
        let mut out = self.values[x.0].clone();
        for b in 0..n {
            for ch in 0..c {
                let scale = gamma[ch] * invstd[ch];
                let shift = beta[ch] - mean[ch] * scale;
                for v in &mut out.data_mut()[(b * c + ch) * hw..][..hw] {
                    *v = *v * scale + shift;
                }
            }
        }
        self.push(
            out,
            Op::BatchNorm {
                x,
                gamma: p.gamma,
                beta: p.beta,
                mean,
                invstd,
            },
        )
    }

    fn map(&mut self, x: Var, f: impl Fn(f32) -> f32, op: Op) -> Var {
        let mut out = self.values[x.0].clone();
        for v in out.data_mut() {
            *v = f(*v);
        }
        self.push(out, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn silu(&mut self, x: Var) -> Var {
        self.map(x, |v| v * sigmoid(v), Op::Silu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.values[a.0].shape(), self.values[b.0].shape(), "add shapes");
        let mut out = self.values[a.0].clone();
        for (o, &v) in out.data_mut().iter_mut().zip(self.values[b.0].data()) {
            *o += v;
        }
        self.push(out, Op::Add(a, b))
    }

    /// `x[n,c,h,w] · s[n,c]`.
    pub fn channel_mul(&mut self, x: Var, s: Var) -> Var {
        let (n, c, h, w) = self.values[x.0].dims4();
        assert_eq!(self.values[s.0].shape(), [n, c], "channel scale shape");
        let mut out = self.values[x.0].clone();
        let sv = self.values[s.0].data();
        for (i, chunk) in out.data_mut().chunks_mut(h * w).enumerate() {
            for v in chunk {
                *v *= sv[i];
            }
        }
        self.push(out, Op::ChannelMul { x, s })
    }

    pub fn max_pool(&mut self, x: Var, k: usize, stride: usize, pad: usize) -> Var {
        let dims = self.values[x.0].dims4();
        let win = Window { kh: k, kw: k, stride, pad };
        let (ho, wo) = win.out_size(dims.2, dims.3);
        let (data, arg) = kernels::max_pool(self.values[x.0].data(), dims, win);
        let t = Tensor::new(vec![dims.0, dims.1, ho, wo], data).expect("pool shape");
        self.push(t, Op::MaxPool { x, arg })
    }

    pub fn avg_pool(&mut self, x: Var, k: usize, stride: usize) -> Var {
        let dims = self.values[x.0].dims4();
        let win = Window { kh: k, kw: k, stride, pad: 0 };
        let (ho, wo) = win.out_size(dims.2, dims.3);
        let data = kernels::avg_pool(self.values[x.0].data(), dims, win);
        let t = Tensor::new(vec![dims.0, dims.1, ho, wo], data).expect("pool shape");
        self.push(t, Op::AvgPool { x, win })
    }

    /// `[n,c,h,w] → [n,c]`.
    pub fn global_avg_pool(&mut self, x: Var) -> Var {
        let (n, c, h, w) = self.values[x.0].dims4();
        let data = self.values[x.0]
            .data()
            .chunks(h * w)
            .map(|p| p.iter().sum::<f32>() / (h * w) as f32)
            .collect();
        let t = Tensor::new(vec![n, c], data).expect("pool shape");
        self.push(t, Op::GlobalAvg(x))
    }

    /// `x[n,f] · wᵀ + b` with `w[o,f]`.
    pub fn linear(&mut self, x: Var, w: ParamId, b: Option<ParamId>) -> Var {
        let (n, f) = self.values[x.0].dims2();
        let (o, wf) = self.params.get(w).dims2();
        assert_eq!(f, wf, "linear input features");
        let mut out = vec![0.0; n * o];
        if let Some(b) = b {
            for row in out.chunks_mut(o) {
                row.copy_from_slice(self.params.get(b).data());
            }
        }
        kernels::gemm(n, f, o, self.values[x.0].data(), (f, 1), self.params.get(w).data(), (1, f), 1.0, &mut out);
        let t = Tensor::new(vec![n, o], out).expect("linear shape");
        self.push(t, Op::Linear { x, w, b })
    }

    /// Concatenation along the channel axis of 4-D tensors.
    pub fn concat(&mut self, xs: &[Var]) -> Var {
        let (n, _, h, w) = self.values[xs[0].0].dims4();
        let channels: Vec<usize> = xs
            .iter()
            .map(|v| {
                let (vn, vc, vh, vw) = self.values[v.0].dims4();
                assert_eq!((vn, vh, vw), (n, h, w), "concat shapes");
                vc
            })
            .collect();
        let total: usize = channels.iter().sum();
        let mut out = Vec::with_capacity(n * total * h * w);
        for b in 0..n {
            for (v, &c) in xs.iter().zip(&channels) {
                out.extend_from_slice(&self.values[v.0].data()[b * c * h * w..][..c * h * w]);
            }
        }
        let t = Tensor::new(vec![n, total, h, w], out).expect("concat shape");
        self.push(t, Op::Concat(xs.to_vec()))
    }

    /// Mean cross-entropy of `logits[n,k]` against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Var {
        let (n, k) = self.values[logits.0].dims2();
        assert_eq!(labels.len(), n, "one label per row");
        let probs = crate::tensor::softmax_rows(&self.values[logits.0]);
        let mut loss = 0f64;
        for (p, &y) in probs.iter().zip(labels) {
            assert!(y < k, "label {y} out of range");
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
        }
        let t = Tensor::new(vec![1], vec![(loss / n as f64) as f32]).expect("scalar");
        let probs = probs.into_iter().flatten().map(|v| v as f32).collect();
        self.push(
            t,
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
        )
    }

    /// Reverse pass from a scalar node. Returns parameter gradients and the
    /// BatchNorm statistics recorded during the forward pass.
    pub fn backward(self, loss: Var) -> (Gradients, Vec<StatUpdate>) {
        assert_eq!(self.mode, Mode::Train, "backward needs a Train-mode graph");
        assert_eq!(self.values[loss.0].len(), 1, "backward starts from a scalar");
        let Graph {
            params,
            mut values,
            ops,
            stat_updates,
            ..
        } = self;
        let mut grads: Vec<Option<Vec<f32>>> = vec![None; values.len()];
        let mut pgrads: Vec<Option<Vec<f32>>> = vec![None; params.len()];
        grads[loss.0] = Some(vec![1.0]);
        for (i, op) in ops.into_iter().enumerate().rev() {
            let Some(dy) = grads[i].take() else {
                values[i] = Tensor::default();
                continue;
            };
            match op {
                Op::Leaf => {}
                Op::Conv { x, w, win, depthwise } => {
                    let xv = &values[x.0];
                    let dims = xv.dims4();
                    let wt = params.get(w);
                    if depthwise {
                        let (dx, dw) = kernels::depthwise_backward(xv.data(), dims, wt.data(), win, &dy);
                        accumulate(&mut grads[x.0], dx);
                        accumulate(&mut pgrads[w.index()], dw);
                    } else {
                        let o = wt.shape()[0];
                        let (dx, dw) = kernels::conv_backward(xv.data(), dims, wt.data(), o, win, &dy, true);
                        accumulate(&mut grads[x.0], dx.expect("requested"));
                        accumulate(&mut pgrads[w.index()], dw);
                    }
                }
                Op::BatchNorm {
                    x,
                    gamma,
                    beta,
                    mean,
                    invstd,
                } => {
                    let xv = &values[x.0];
                    let (n, c, h, w) = xv.dims4();
                    let hw = h * w;
                    let m = (n * hw) as f32;
                    let g = params.get(gamma).data();
                    let mut dgamma = vec![0f32; c];
                    let mut dbeta = vec![0f32; c];
                    for b in 0..n {
                        for ch in 0..c {
                            let off = (b * c + ch) * hw;
                            for j in 0..hw {
                                let xhat = (xv.data()[off + j] - mean[ch]) * invstd[ch];
                                dgamma[ch] += dy[off + j] * xhat;
                                dbeta[ch] += dy[off + j];
                            }
                        }
                    }
                    let mut dx = vec![0f32; xv.len()];
                    for b in 0..n {
                        for ch in 0..c {
                            let off = (b * c + ch) * hw;
                            let k = g[ch] * invstd[ch] / m;
                            for j in 0..hw {
                                let xhat = (xv.data()[off + j] - mean[ch]) * invstd[ch];
                                dx[off + j] = k * (m * dy[off + j] - dbeta[ch] - xhat * dgamma[ch]);
                            }
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut pgrads[gamma.index()], dgamma);
                    accumulate(&mut pgrads[beta.index()], dbeta);
                }
                Op::Relu(x) => {
                    let out = &values[i];
                    let dx = dy
                        .iter()
                        .zip(out.data())
                        .map(|(&g, &o)| if o > 0.0 { g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Silu(x) => {
                    let dx = dy
                        .iter()
                        .zip(values[x.0].data())
                        .map(|(&g, &v)| {
                            let s = sigmoid(v);
                            g * s * (1.0 + v * (1.0 - s))
                        })
                        .collect();
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Sigmoid(x) => {
                    let dx = dy
                        .iter()
                        .zip(values[i].data())
                        .map(|(&g, &s)| g * s * (1.0 - s))
                        .collect();
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], dy.clone());
                    accumulate(&mut grads[a.0], dy);
                }
                Op::ChannelMul { x, s } => {
                    let (_, _, h, w) = values[x.0].dims4();
                    let sv = values[s.0].data();
                    let xv = values[x.0].data();
                    let mut dx = vec![0f32; dy.len()];
                    let mut ds = vec![0f32; sv.len()];
                    for (p, scale) in sv.iter().enumerate() {
                        let off = p * h * w;
                        for j in off..off + h * w {
                            dx[j] = dy[j] * scale;
                            ds[p] += dy[j] * xv[j];
                        }
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut grads[s.0], ds);
                }
                Op::MaxPool { x, arg } => {
                    let mut dx = vec![0f32; values[x.0].len()];
                    for (&g, &a) in dy.iter().zip(&arg) {
                        dx[a as usize] += g;
                    }
                    accumulate(&mut grads[x.0], dx);
                }
                Op::AvgPool { x, win } => {
                    let dims = values[x.0].dims4();
                    accumulate(&mut grads[x.0], kernels::avg_pool_backward(&dy, dims, win));
                }
                Op::GlobalAvg(x) => {
                    let (_, _, h, w) = values[x.0].dims4();
                    let scale = 1.0 / (h * w) as f32;
                    let dx = dy.iter().flat_map(|&g| std::iter::repeat_n(g * scale, h * w)).collect();
                    accumulate(&mut grads[x.0], dx);
                }
                Op::Linear { x, w, b } => {
                    let (n, f) = values[x.0].dims2();
                    let o = params.get(w).shape()[0];
                    let mut dx = vec![0f32; n * f];
                    kernels::gemm(n, o, f, &dy, (o, 1), params.get(w).data(), (f, 1), 0.0, &mut dx);
                    let mut dw = vec![0f32; o * f];
                    kernels::gemm(o, n, f, &dy, (1, o), values[x.0].data(), (f, 1), 0.0, &mut dw);
                    if let Some(b) = b {
                        let mut db = vec![0f32; o];
                        for row in dy.chunks(o) {
                            for (d, &g) in db.iter_mut().zip(row) {
                                *d += g;
                            }
                        }
                        accumulate(&mut pgrads[b.index()], db);
                    }
                    accumulate(&mut grads[x.0], dx);
                    accumulate(&mut pgrads[w.index()], dw);
                }
                Op::Concat(xs) => {
                    let (n, total, h, w) = values[i].dims4();
                    let mut offset = 0;
                    for x in xs {
                        let c = values[x.0].dims4().1;
                        let mut dx = Vec::with_capacity(n * c * h * w);
                        for b in 0..n {
                            dx.extend_from_slice(&dy[(b * total + offset) * h * w..][..c * h * w]);
                        }
                        accumulate(&mut grads[x.0], dx);
                        offset += c;
                    }
                }
                Op::CrossEntropy { logits, labels, probs } => {
                    let (n, k) = values[logits.0].dims2();
                    let scale = dy[0] / n as f32;
                    let mut dx = probs;
                    for (r, &y) in labels.iter().enumerate() {
                        dx[r * k + y] -= 1.0;
                    }
                    for v in &mut dx {
                        *v *= scale;
                    }
                    accumulate(&mut grads[logits.0], dx);
                }
            }
            values[i] = Tensor::default();
        }
        (Gradients { grads: pgrads }, stat_updates)
    }
}
