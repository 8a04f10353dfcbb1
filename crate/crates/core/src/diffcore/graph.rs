use super::{GraphError, Result, Tensor};

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d {
        x: Var,
        k: Var,
        stride: usize,
        padding: usize,
    },
    ConvTranspose1d {
        x: Var,
        k: Var,
        stride: usize,
        padding: usize,
    },
    MatMul {
        a: Var,
        b: Var,
    },
    AddBias {
        x: Var,
        b: Var,
    },
    Relu(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Sum(Var),
    Mean(Var),
    MeanSquaredError(Var, Var),
    L1 {
        a: Var,
        b: Var,
        weights: Option<Vec<f64>>,
        denom: f64,
    },
    Embedding {
        table: Var,
        indices: Vec<usize>,
    },
    StraightThrough(Var),
    ConcatRows(Vec<Var>),
    BroadcastColumns {
        x: Var,
        len: usize,
    },
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Gradients from one backward pass, indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` when the variable does not influence the loss through a
    /// differentiable path.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient, or zeros shaped like `like` when no path exists.
    pub fn get_or_zeros(&self, v: Var, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape()))
    }
}

/// A tape of operations in creation order. Nodes only reference earlier
/// nodes, so creation order is a topological order.
#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

fn shape_err<T>(msg: String) -> Result<T> {
    Err(GraphError::Shape(msg))
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Trainable input.
    pub fn param(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, true)
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Leaf, false)
    }

    /// Stop-gradient: a constant copy of `v`'s current value.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).clone();
        self.constant(t)
    }

    /// Cross-correlation of `x: [cin, t]` with `k: [cout, cin, w]`.
    pub fn conv1d(&mut self, x: Var, k: Var, stride: usize, padding: usize) -> Result<Var> {
        let (cin, t) = self.value(x).dims2()?;
        let (cout, kin, w) = self.value(k).dims3()?;
        if kin != cin {
            return shape_err(format!(
                "conv1d: input has {cin} channels, kernel expects {kin}"
            ));
        }
        if stride == 0 || t + 2 * padding < w {
            return shape_err(format!(
                "conv1d: length {t} (+2*{padding}) shorter than kernel {w} or stride 0"
            ));
        }
        let t_out = (t + 2 * padding - w) / stride + 1;
        let xv = self.value(x).data();
        let kv = self.value(k).data();
        let mut out = vec![0.0; cout * t_out];
        for o in 0..cout {
            let orow = &mut out[o * t_out..(o + 1) * t_out];
            for c in 0..cin {
                let xrow = &xv[c * t..(c + 1) * t];
                for j in 0..w {
                    let kval = kv[(o * cin + c) * w + j];
                    if kval == 0.0 {
                        continue;
                    }
                    let (lo, hi) = valid_range(t_out, stride, j, padding, t);
                    for (ti, ov) in orow.iter_mut().enumerate().take(hi).skip(lo) {
                        *ov += kval * xrow[ti * stride + j - padding];
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(k);
        Ok(self.push(
            Tensor::from_parts(vec![cout, t_out], out),
            Op::Conv1d {
                x,
                k,
                stride,
                padding,
            },
            rg,
        ))
    }

    /// Transposed convolution of `x: [cin, t]` with `k: [cin, cout, w]`;
    /// output length `(t - 1) * stride - 2 * padding + w`.
    pub fn conv_transpose1d(
        &mut self,
        x: Var,
        k: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let (cin, t) = self.value(x).dims2()?;
        let (kin, cout, w) = self.value(k).dims3()?;
        if kin != cin {
            return shape_err(format!(
                "conv_transpose1d: input has {cin} channels, kernel expects {kin}"
            ));
        }
        if stride == 0 || t == 0 || (t - 1) * stride + w <= 2 * padding {
            return shape_err(format!("conv_transpose1d: empty output for length {t}"));
        }
        let t_out = (t - 1) * stride + w - 2 * padding;
        let xv = self.value(x).data();
        let kv = self.value(k).data();
        let mut out = vec![0.0; cout * t_out];
        for c in 0..cin {
            let xrow = &xv[c * t..(c + 1) * t];
            for o in 0..cout {
                let orow = &mut out[o * t_out..(o + 1) * t_out];
                for j in 0..w {
                    let kval = kv[(c * cout + o) * w + j];
                    if kval == 0.0 {
                        continue;
                    }
                    let (lo, hi) = valid_range(t, stride, j, padding, t_out);
                    for ti in lo..hi {
                        orow[ti * stride + j - padding] += kval * xrow[ti];
                    }
                }
            }
        }
        let rg = self.rg(x) || self.rg(k);
        Ok(self.push(
            Tensor::from_parts(vec![cout, t_out], out),
            Op::ConvTranspose1d {
                x,
                k,
                stride,
                padding,
            },
            rg,
        ))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.value(a).dims2()?;
        let (kb, n) = self.value(b).dims2()?;
        if ka != kb {
            return shape_err(format!("matmul: [{m}, {ka}] x [{kb}, {n}]"));
        }
        let av = self.value(a).data();
        let bv = self.value(b).data();
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..ka {
                let aip = av[i * ka + p];
                let brow = &bv[p * n..(p + 1) * n];
                for (o, bv) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                    *o += aip * bv;
                }
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::from_parts(vec![m, n], out), Op::MatMul { a, b }, rg))
    }

    /// `x: [c, t]` plus a per-row bias `b: [c]`.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (c, t) = self.value(x).dims2()?;
        if self.value(b).shape() != [c] {
            return shape_err(format!(
                "add_bias: bias {:?} for {c} rows",
                self.value(b).shape()
            ));
        }
        let bv = self.value(b).data();
        let out: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .map(|(i, v)| v + bv[i / t])
            .collect();
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(
            Tensor::from_parts(vec![c, t], out),
            Op::AddBias { x, b },
            rg,
        ))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = Tensor::from_parts(
            t.shape().to_vec(),
            t.data().iter().map(|v| v.max(0.0)).collect(),
        );
        let rg = self.rg(x);
        self.push(out, Op::Relu(x), rg)
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape() != self.value(b).shape() {
            return shape_err(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape(),
                self.value(b).shape()
            ));
        }
        Ok(())
    }

    fn zip_with(&mut self, a: Var, b: Var, op: Op, f: impl Fn(f64, f64) -> f64) -> Var {
        let av = self.value(a);
        let data = av
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| f(*x, *y))
            .collect();
        let out = Tensor::from_parts(av.shape().to_vec(), data);
        let rg = self.rg(a) || self.rg(b);
        self.push(out, op, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "add")?;
        Ok(self.zip_with(a, b, Op::Add(a, b), |x, y| x + y))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "sub")?;
        Ok(self.zip_with(a, b, Op::Sub(a, b), |x, y| x - y))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mul")?;
        Ok(self.zip_with(a, b, Op::Mul(a, b), |x, y| x * y))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let out = Tensor::from_parts(
            t.shape().to_vec(),
            t.data().iter().map(|v| v * factor).collect(),
        );
        let rg = self.rg(x);
        self.push(out, Op::Scale(x, factor), rg)
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.rg(x);
        self.push(Tensor::scalar(s), Op::Sum(x), rg)
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let n = self.value(x).len();
        if n == 0 {
            return Err(GraphError::InvalidArgument(
                "mean of an empty tensor".into(),
            ));
        }
        let s = self.value(x).data().iter().sum::<f64>() / n as f64;
        let rg = self.rg(x);
        Ok(self.push(Tensor::scalar(s), Op::Mean(x), rg))
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape(a, b, "mse")?;
        let n = self.value(a).len().max(1) as f64;
        let s: f64 = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum();
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::scalar(s / n), Op::MeanSquaredError(a, b), rg))
    }

    /// `sum(|a - b|) / n`, or with `weights`, `sum(w |a - b|) / sum(w)`.
    pub fn l1(&mut self, a: Var, b: Var, weights: Option<&Tensor>) -> Result<Var> {
        self.same_shape(a, b, "l1")?;
        let diffs = self
            .value(a)
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| (x - y).abs());
        let (num, denom, weights) = match weights {
            None => (diffs.sum::<f64>(), self.value(a).len() as f64, None),
            Some(w) => {
                if w.shape() != self.value(a).shape() {
                    return shape_err(format!(
                        "l1 weights {:?} for {:?}",
                        w.shape(),
                        self.value(a).shape()
                    ));
                }
                let num = diffs.zip(w.data()).map(|(d, w)| d * w).sum::<f64>();
                (num, w.data().iter().sum::<f64>(), Some(w.data().to_vec()))
            }
        };
        if denom <= 0.0 {
            return Err(GraphError::InvalidArgument(
                "l1: total weight must be positive".into(),
            ));
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(
            Tensor::scalar(num / denom),
            Op::L1 {
                a,
                b,
                weights,
                denom,
            },
            rg,
        ))
    }

    /// Rows `indices` of `table: [k, d]`, laid out as columns: `[d, indices.len()]`.
    pub fn embedding(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (k, d) = self.value(table).dims2()?;
        if let Some(bad) = indices.iter().find(|&&i| i >= k) {
            return Err(GraphError::InvalidArgument(format!(
                "embedding index {bad} out of range for {k} rows"
            )));
        }
        let tv = self.value(table).data();
        let n = indices.len();
        let mut out = vec![0.0; d * n];
        for (col, &i) in indices.iter().enumerate() {
            for r in 0..d {
                out[r * n + col] = tv[i * d + r];
            }
        }
        let rg = self.rg(table);
        Ok(self.push(
            Tensor::from_parts(vec![d, n], out),
            Op::Embedding {
                table,
                indices: indices.to_vec(),
            },
            rg,
        ))
    }

    /// Forward value of `q`; backward hands the upstream gradient to `z`
    /// unchanged and nothing to `q`.
    pub fn straight_through(&mut self, z: Var, q: Var) -> Result<Var> {
        self.same_shape(z, q, "straight_through")?;
        let out = self.value(q).clone();
        let rg = self.rg(z);
        Ok(self.push(out, Op::StraightThrough(z), rg))
    }

    /// Stacks `[c_i, t]` matrices along rows.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts
            .first()
            .ok_or_else(|| GraphError::InvalidArgument("concat of nothing".into()))?;
        let (_, t) = self.value(first).dims2()?;
        let mut rows = 0;
        let mut data = Vec::new();
        for &p in parts {
            let (r, tp) = self.value(p).dims2()?;
            if tp != t {
                return shape_err(format!("concat_rows: widths {t} and {tp}"));
            }
            rows += r;
            data.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(
            Tensor::from_parts(vec![rows, t], data),
            Op::ConcatRows(parts.to_vec()),
            rg,
        ))
    }

    /// Repeats a single column `x: [c, 1]` `len` times.
    pub fn broadcast_columns(&mut self, x: Var, len: usize) -> Result<Var> {
        let (c, one) = self.value(x).dims2()?;
        if one != 1 {
            return shape_err(format!("broadcast_columns needs one column, got {one}"));
        }
        let xv = self.value(x).data();
        let data: Vec<f64> = (0..c)
            .flat_map(|r| std::iter::repeat_n(xv[r], len))
            .collect();
        let rg = self.rg(x);
        Ok(self.push(
            Tensor::from_parts(vec![c, len], data),
            Op::BroadcastColumns { x, len },
            rg,
        ))
    }

    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        self.backward_scaled(loss, 1.0)
    }

    /// Reverse pass seeded with `seed` at `loss`. Gradients from fan-out are
    /// summed.
    pub fn backward_scaled(&self, loss: Var, seed: f64) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(GraphError::InvalidArgument(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::from_parts(
            self.value(loss).shape().to_vec(),
            vec![seed],
        ));

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            self.propagate(&node.op, &node.value, &g, &mut grads);
            grads[id] = Some(g);
        }
        for (g, n) in grads.iter_mut().zip(&self.nodes) {
            if !n.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
        if !self.rg(v) {
            return;
        }
        match &mut grads[v.0] {
            Some(existing) => existing.add_assign(&g),
            slot @ None => *slot = Some(g),
        }
    }

    fn propagate(&self, op: &Op, out: &Tensor, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let gv = g.data();
        match op {
            Op::Leaf => {}
            &Op::Conv1d {
                x,
                k,
                stride,
                padding,
            } => {
                let (cin, t) = self.value(x).dims2().unwrap();
                let (cout, _, w) = self.value(k).dims3().unwrap();
                let t_out = out.shape()[1];
                let xv = self.value(x).data();
                let kv = self.value(k).data();
                let mut dx = vec![0.0; cin * t];
                let mut dk = vec![0.0; cout * cin * w];
                for o in 0..cout {
                    let grow = &gv[o * t_out..(o + 1) * t_out];
                    for c in 0..cin {
                        let xrow = &xv[c * t..(c + 1) * t];
                        let dxrow = &mut dx[c * t..(c + 1) * t];
                        for j in 0..w {
                            let (lo, hi) = valid_range(t_out, stride, j, padding, t);
                            let kval = kv[(o * cin + c) * w + j];
                            let mut acc = 0.0;
                            for ti in lo..hi {
                                let xi = ti * stride + j - padding;
                                acc += grow[ti] * xrow[xi];
                                dxrow[xi] += kval * grow[ti];
                            }
                            dk[(o * cin + c) * w + j] += acc;
                        }
                    }
                }
                self.accumulate(grads, x, Tensor::from_parts(vec![cin, t], dx));
                self.accumulate(grads, k, Tensor::from_parts(vec![cout, cin, w], dk));
            }
            &Op::ConvTranspose1d {
                x,
                k,
                stride,
                padding,
            } => {
                let (cin, t) = self.value(x).dims2().unwrap();
                let (_, cout, w) = self.value(k).dims3().unwrap();
                let t_out = out.shape()[1];
                let xv = self.value(x).data();
                let kv = self.value(k).data();
                let mut dx = vec![0.0; cin * t];
                let mut dk = vec![0.0; cin * cout * w];
                for c in 0..cin {
                    let xrow = &xv[c * t..(c + 1) * t];
                    for o in 0..cout {
                        let grow = &gv[o * t_out..(o + 1) * t_out];
                        for j in 0..w {
                            let (lo, hi) = valid_range(t, stride, j, padding, t_out);
                            let kval = kv[(c * cout + o) * w + j];
                            let mut acc = 0.0;
                            for ti in lo..hi {
                                let oi = ti * stride + j - padding;
                                acc += xrow[ti] * grow[oi];
                                dx[c * t + ti] += kval * grow[oi];
                            }
                            dk[(c * cout + o) * w + j] += acc;
                        }
                    }
                }
                self.accumulate(grads, x, Tensor::from_parts(vec![cin, t], dx));
                self.accumulate(grads, k, Tensor::from_parts(vec![cin, cout, w], dk));
            }
            &Op::MatMul { a, b } => {
                let (m, kk) = self.value(a).dims2().unwrap();
                let (_, n) = self.value(b).dims2().unwrap();
                let av = self.value(a).data();
                let bv = self.value(b).data();
                if self.rg(a) {
                    let mut da = vec![0.0; m * kk];
                    for i in 0..m {
                        for p in 0..kk {
                            da[i * kk + p] = (0..n).map(|j| gv[i * n + j] * bv[p * n + j]).sum();
                        }
                    }
                    self.accumulate(grads, a, Tensor::from_parts(vec![m, kk], da));
                }
                if self.rg(b) {
                    let mut db = vec![0.0; kk * n];
                    for i in 0..m {
                        for p in 0..kk {
                            let aip = av[i * kk + p];
                            for j in 0..n {
                                db[p * n + j] += aip * gv[i * n + j];
                            }
                        }
                    }
                    self.accumulate(grads, b, Tensor::from_parts(vec![kk, n], db));
                }
            }
            &Op::AddBias { x, b } => {
                let (c, t) = out.dims2().unwrap();
                let db: Vec<f64> = (0..c)
                    .map(|r| gv[r * t..(r + 1) * t].iter().sum())
                    .collect();
                self.accumulate(grads, x, g.clone());
                self.accumulate(grads, b, Tensor::from_parts(vec![c], db));
            }
            &Op::Relu(x) => {
                let data = self
                    .value(x)
                    .data()
                    .iter()
                    .zip(gv)
                    .map(|(v, g)| if *v > 0.0 { *g } else { 0.0 })
                    .collect();
                self.accumulate(grads, x, Tensor::from_parts(out.shape().to_vec(), data));
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, g.clone());
                self.accumulate(grads, b, g.clone());
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, g.clone());
                let neg = Tensor::from_parts(g.shape().to_vec(), gv.iter().map(|v| -v).collect());
                self.accumulate(grads, b, neg);
            }
            &Op::Mul(a, b) => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let shape = out.shape().to_vec();
                self.accumulate(
                    grads,
                    a,
                    Tensor::from_parts(
                        shape.clone(),
                        gv.iter().zip(bv).map(|(g, b)| g * b).collect(),
                    ),
                );
                self.accumulate(
                    grads,
                    b,
                    Tensor::from_parts(shape, gv.iter().zip(av).map(|(g, a)| g * a).collect()),
                );
            }
            &Op::Scale(x, f) => {
                self.accumulate(
                    grads,
                    x,
                    Tensor::from_parts(g.shape().to_vec(), gv.iter().map(|v| v * f).collect()),
                );
            }
            &Op::Sum(x) => {
                self.accumulate(grads, x, Tensor::full(self.value(x).shape(), gv[0]));
            }
            &Op::Mean(x) => {
                let n = self.value(x).len() as f64;
                self.accumulate(grads, x, Tensor::full(self.value(x).shape(), gv[0] / n));
            }
            &Op::MeanSquaredError(a, b) => {
                let av = self.value(a).data();
                let bv = self.value(b).data();
                let f = 2.0 * gv[0] / av.len().max(1) as f64;
                let da: Vec<f64> = av.iter().zip(bv).map(|(x, y)| f * (x - y)).collect();
                let shape = self.value(a).shape().to_vec();
                if self.rg(b) {
                    let db = da.iter().map(|v| -v).collect();
                    self.accumulate(grads, b, Tensor::from_parts(shape.clone(), db));
                }
                self.accumulate(grads, a, Tensor::from_parts(shape, da));
            }
            Op::L1 {
                a,
                b,
                weights,
                denom,
            } => {
                let av = self.value(*a).data();
                let bv = self.value(*b).data();
                let f = gv[0] / denom;
                let da: Vec<f64> = av
                    .iter()
                    .zip(bv)
                    .enumerate()
                    .map(|(i, (x, y))| {
                        let w = weights.as_ref().map_or(1.0, |w| w[i]);
                        f * w * sign(x - y)
                    })
                    .collect();
                let shape = self.value(*a).shape().to_vec();
                if self.rg(*b) {
                    let db = da.iter().map(|v| -v).collect();
                    self.accumulate(grads, *b, Tensor::from_parts(shape.clone(), db));
                }
                self.accumulate(grads, *a, Tensor::from_parts(shape, da));
            }
            Op::Embedding { table, indices } => {
                let (k, d) = self.value(*table).dims2().unwrap();
                let n = indices.len();
                let mut dt = vec![0.0; k * d];
                for (col, &i) in indices.iter().enumerate() {
                    for r in 0..d {
                        dt[i * d + r] += gv[r * n + col];
                    }
                }
                self.accumulate(grads, *table, Tensor::from_parts(vec![k, d], dt));
            }
            &Op::StraightThrough(z) => {
                self.accumulate(grads, z, g.clone());
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    let piece = Tensor::from_parts(
                        self.value(p).shape().to_vec(),
                        gv[offset..offset + len].to_vec(),
                    );
                    self.accumulate(grads, p, piece);
                    offset += len;
                }
            }
            &Op::BroadcastColumns { x, len } => {
                let c = self.value(x).shape()[0];
                let dx = (0..c)
                    .map(|r| gv[r * len..(r + 1) * len].iter().sum())
                    .collect();
                self.accumulate(grads, x, Tensor::from_parts(vec![c, 1], dx));
            }
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Range of strided positions `ti` for which `ti * stride + tap - padding`
/// falls inside `0..len`.
fn valid_range(
    n_pos: usize,
    stride: usize,
    tap: usize,
    padding: usize,
    len: usize,
) -> (usize, usize) {
    // lower bound: ti * stride + tap >= padding
    let lo = if tap >= padding {
        0
    } else {
        (padding - tap).div_ceil(stride)
    };
    // upper bound: ti * stride + tap - padding < len
    let limit = len + padding;
    let hi = if limit <= tap {
        0
    } else {
        ((limit - tap - 1) / stride + 1).min(n_pos)
    };
    (lo.min(hi), hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn conv1d_hand_example() {
        let mut g = Graph::new();
        let x = g.constant(t(&[1, 3], &[1.0, 2.0, 3.0]));
        let k = g.constant(t(&[1, 1, 2], &[1.0, 1.0]));
        let y = g.conv1d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 5.0]);
    }

    #[test]
    fn identity_kernel() {
        let mut g = Graph::new();
        let x = g.constant(t(&[2, 4], &[1.0, -2.0, 3.0, 0.5, 7.0, 8.0, 9.0, -1.0]));
        let k = g.constant(t(&[2, 2, 1], &[1.0, 0.0, 0.0, 1.0]));
        let y = g.conv1d(x, k, 1, 0).unwrap();
        assert_eq!(g.value(y), g.value(x));
    }

    #[test]
    fn conv_output_lengths() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[3, 64]));
        let k = g.constant(Tensor::zeros(&[4, 3, 5]));
        let y = g.conv1d(x, k, 2, 2).unwrap();
        assert_eq!(g.value(y).shape(), &[4, 32]);
        let kt = g.constant(Tensor::zeros(&[4, 3, 4]));
        let up = g.conv_transpose1d(y, kt, 2, 1).unwrap();
        assert_eq!(g.value(up).shape(), &[3, 64]);
    }

    #[test]
    fn shape_errors() {
        let mut g = Graph::new();
        let x = g.constant(Tensor::zeros(&[3, 4]));
        let k = g.constant(Tensor::zeros(&[1, 2, 2]));
        assert!(matches!(g.conv1d(x, k, 1, 0), Err(GraphError::Shape(_))));
        let k = g.constant(Tensor::zeros(&[1, 3, 9]));
        assert!(g.conv1d(x, k, 1, 0).is_err());
        let y = g.constant(Tensor::zeros(&[4, 3]));
        assert!(g.add(x, y).is_err());
        assert!(g.straight_through(x, y).is_err());
        assert!(g.matmul(x, x).is_err());
    }

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let x = g.param(t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let s = g.sum(x);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[1.0; 6]);
    }

    #[test]
    fn square_gives_twice_x() {
        let mut g = Graph::new();
        let x = g.param(t(&[4], &[1.0, -2.0, 0.5, 3.0]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum(sq);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(x).unwrap().data(), &[2.0, -4.0, 1.0, 6.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.param(Tensor::zeros(&[2]));
        assert!(matches!(g.backward(x), Err(GraphError::InvalidArgument(_))));
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut g = Graph::new();
        let x = g.param(t(&[2], &[1.0, 2.0]));
        let c = g.constant(t(&[2], &[3.0, 4.0]));
        let d = g.detach(x);
        let p = g.mul(x, c).unwrap();
        let p2 = g.mul(p, d).unwrap();
        let s = g.sum(p2);
        let grads = g.backward(s).unwrap();
        assert!(grads.get(c).is_none());
        assert!(grads.get(d).is_none());
        // d/dx (x * c * sg(x)) = c * x
        assert_eq!(grads.get(x).unwrap().data(), &[3.0, 8.0]);
    }

    #[test]
    fn straight_through_forward_and_backward() {
        let mut g = Graph::new();
        let z = g.param(t(&[2, 2], &[0.1, 0.2, 0.3, 0.4]));
        let q = g.param(t(&[2, 2], &[1.0, 0.0, -1.0, 2.0]));
        let st = g.straight_through(z, q).unwrap();
        assert_eq!(g.value(st), g.value(q));
        let w = g.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let p = g.mul(st, w).unwrap();
        let s = g.sum(p);
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(z).unwrap().data(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(grads.get(q).is_none());
    }

    #[test]
    fn fan_out_accumulates() {
        let mut g = Graph::new();
        let x = g.param(t(&[3], &[1.0, 2.0, 3.0]));
        let a = g.add(x, x).unwrap();
        let b = g.add(a, x).unwrap();
        let s = g.sum(b);
        assert_eq!(g.backward(s).unwrap().get(x).unwrap().data(), &[3.0; 3]);
    }

    #[test]
    fn embedding_layout_and_scatter() {
        let mut g = Graph::new();
        let table = g.param(t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let e = g.embedding(table, &[2, 0, 2]).unwrap();
        assert_eq!(g.value(e).shape(), &[2, 3]);
        assert_eq!(g.value(e).data(), &[5.0, 1.0, 5.0, 6.0, 2.0, 6.0]);
        let s = g.sum(e);
        assert_eq!(
            g.backward(s).unwrap().get(table).unwrap().data(),
            &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]
        );
        assert!(g.embedding(table, &[3]).is_err());
    }

    #[test]
    fn valid_range_matches_brute_force() {
        for n_pos in 0..6 {
            for stride in 1..4 {
                for tap in 0..6 {
                    for padding in 0..4 {
                        for len in 0..8 {
                            let ok: Vec<usize> = (0..n_pos)
                                .filter(|&ti| {
                                    let p = (ti * stride + tap) as isize - padding as isize;
                                    p >= 0 && (p as usize) < len
                                })
                                .collect();
                            let (lo, hi) = valid_range(n_pos, stride, tap, padding, len);
                            assert_eq!(
                                (lo..hi).collect::<Vec<_>>(),
                                ok,
                                "{n_pos} {stride} {tap} {padding} {len}"
                            );
                        }
                    }
                }
            }
        }
    }
}
