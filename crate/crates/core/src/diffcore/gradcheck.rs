//! Central finite-difference checks for the graph primitives.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Graph, Result, Tensor, Var};

/// Step used by [`numeric_gradient`].
pub const FD_STEP: f64 = 1e-6;

/// Gradients smaller than this are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Central differences of a scalar function of several tensors.
pub fn numeric_gradient(
    inputs: &[Tensor],
    h: f64,
    mut f: impl FnMut(&[Tensor]) -> Result<f64>,
) -> Result<Vec<Tensor>> {
    let mut work = inputs.to_vec();
    let mut out = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Tensor::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + h;
            let up = f(&work)?;
            work[i].data_mut()[j] = x0 - h;
            let down = f(&work)?;
            work[i].data_mut()[j] = x0;
            g.data_mut()[j] = (up - down) / (2.0 * h);
        }
        out.push(g);
    }
    Ok(out)
}

/// Builds `build` over `inputs` as parameters, backpropagates and returns
/// the worst relative error against central differences.
pub fn max_relative_error(
    inputs: &[Tensor],
    build: impl Fn(&mut Graph, &[Var]) -> Result<Var>,
) -> Result<f64> {
    let eval = |ts: &[Tensor]| -> Result<(Graph, Vec<Var>, Var)> {
        let mut g = Graph::new();
        let vars: Vec<Var> = ts.iter().map(|t| g.param(t.clone())).collect();
        let loss = build(&mut g, &vars)?;
        Ok((g, vars, loss))
    };
    let (g, vars, loss) = eval(inputs)?;
    let grads = g.backward(loss)?;
    let numeric = numeric_gradient(inputs, FD_STEP, |ts| {
        let (g, _, l) = eval(ts)?;
        Ok(g.value(l).data()[0])
    })?;
    let mut worst = 0.0f64;
    for ((v, t), n) in vars.iter().zip(inputs).zip(&numeric) {
        let a = grads.get_or_zeros(*v, t);
        for (x, y) in a.data().iter().zip(n.data()) {
            worst = worst.max(relative_error(*x, *y));
        }
    }
    Ok(worst)
}

/// The differentiable primitives. The straight-through estimator is left
/// out: its backward rule is a surrogate, not the derivative of its forward
/// value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Primitive {
    Conv1d,
    ConvTranspose1d,
    MatMul,
    AddBias,
    Relu,
    Add,
    Sub,
    Mul,
    Scale,
    Sum,
    Mean,
    Mse,
    L1,
    WeightedL1,
    Embedding,
    ConcatRows,
    BroadcastColumns,
}

impl Primitive {
    pub const ALL: [Primitive; 17] = [
        Primitive::Conv1d,
        Primitive::ConvTranspose1d,
        Primitive::MatMul,
        Primitive::AddBias,
        Primitive::Relu,
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Scale,
        Primitive::Sum,
        Primitive::Mean,
        Primitive::Mse,
        Primitive::L1,
        Primitive::WeightedL1,
        Primitive::Embedding,
        Primitive::ConcatRows,
        Primitive::BroadcastColumns,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Primitive::Conv1d => "conv1d",
            Primitive::ConvTranspose1d => "conv_transpose1d",
            Primitive::MatMul => "matmul",
            Primitive::AddBias => "add_bias",
            Primitive::Relu => "relu",
            Primitive::Add => "add",
            Primitive::Sub => "sub",
            Primitive::Mul => "mul",
            Primitive::Scale => "scale",
            Primitive::Sum => "sum",
            Primitive::Mean => "mean",
            Primitive::Mse => "mse",
            Primitive::L1 => "l1",
            Primitive::WeightedL1 => "l1_weighted",
            Primitive::Embedding => "embedding",
            Primitive::ConcatRows => "concat_rows",
            Primitive::BroadcastColumns => "broadcast_columns",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub primitive: Primitive,
    pub cases: usize,
    pub max_rel_error: f64,
}

fn uniform(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = rng.gen_range(-1.0..1.0);
    }
    t
}

/// Values bounded away from zero by `gap`, for inputs to kinked functions.
fn away_from_zero(rng: &mut ChaCha8Rng, shape: &[usize], gap: f64) -> Tensor {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        let m = rng.gen_range(gap..1.0);
        *v = if rng.gen_bool(0.5) { m } else { -m };
    }
    t
}

/// Contracts a non-scalar output with fixed random weights so every output
/// element contributes to the checked scalar.
fn project(g: &mut Graph, v: Var, w: &Tensor) -> Result<Var> {
    let c = g.constant(w.clone());
    let p = g.mul(v, c)?;
    Ok(g.sum(p))
}

fn one_case(p: Primitive, rng: &mut ChaCha8Rng) -> Result<f64> {
    let dim = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| rng.gen_range(lo..=hi);
    match p {
        Primitive::Conv1d | Primitive::ConvTranspose1d => {
            let (cin, cout, w, stride) = (
                dim(rng, 1, 3),
                dim(rng, 1, 3),
                dim(rng, 1, 4),
                dim(rng, 1, 3),
            );
            let padding = dim(rng, 0, w / 2);
            let t = dim(rng, w.max(2), 9);
            let x = uniform(rng, &[cin, t]);
            let k = if p == Primitive::Conv1d {
                uniform(rng, &[cout, cin, w])
            } else {
                uniform(rng, &[cin, cout, w])
            };
            let mut g = Graph::new();
            let (xv, kv) = (g.constant(x.clone()), g.constant(k.clone()));
            let out_shape = if p == Primitive::Conv1d {
                g.conv1d(xv, kv, stride, padding)?
            } else {
                g.conv_transpose1d(xv, kv, stride, padding)?
            };
            let wts = uniform(rng, g.value(out_shape).shape());
            max_relative_error(&[x, k], |g, v| {
                let y = if p == Primitive::Conv1d {
                    g.conv1d(v[0], v[1], stride, padding)?
                } else {
                    g.conv_transpose1d(v[0], v[1], stride, padding)?
                };
                project(g, y, &wts)
            })
        }
        Primitive::MatMul => {
            let (m, k, n) = (dim(rng, 1, 4), dim(rng, 1, 4), dim(rng, 1, 4));
            let (a, b, w) = (
                uniform(rng, &[m, k]),
                uniform(rng, &[k, n]),
                uniform(rng, &[m, n]),
            );
            max_relative_error(&[a, b], |g, v| {
                let y = g.matmul(v[0], v[1])?;
                project(g, y, &w)
            })
        }
        Primitive::AddBias => {
            let (c, t) = (dim(rng, 1, 4), dim(rng, 1, 6));
            let (x, b, w) = (
                uniform(rng, &[c, t]),
                uniform(rng, &[c]),
                uniform(rng, &[c, t]),
            );
            max_relative_error(&[x, b], |g, v| {
                let y = g.add_bias(v[0], v[1])?;
                project(g, y, &w)
            })
        }
        Primitive::Relu => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let (x, w) = (away_from_zero(rng, &shape, 1e-3), uniform(rng, &shape));
            max_relative_error(&[x], |g, v| {
                let y = g.relu(v[0]);
                project(g, y, &w)
            })
        }
        Primitive::Add | Primitive::Sub | Primitive::Mul => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let (a, b, w) = (
                uniform(rng, &shape),
                uniform(rng, &shape),
                uniform(rng, &shape),
            );
            max_relative_error(&[a, b], |g, v| {
                let y = match p {
                    Primitive::Add => g.add(v[0], v[1])?,
                    Primitive::Sub => g.sub(v[0], v[1])?,
                    _ => g.mul(v[0], v[1])?,
                };
                project(g, y, &w)
            })
        }
        Primitive::Scale => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let factor = rng.gen_range(-3.0..3.0);
            let (x, w) = (uniform(rng, &shape), uniform(rng, &shape));
            max_relative_error(&[x], |g, v| {
                let y = g.scale(v[0], factor);
                project(g, y, &w)
            })
        }
        Primitive::Sum | Primitive::Mean => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let x = uniform(rng, &shape);
            // square first so the gradient depends on the input
            max_relative_error(&[x], |g, v| {
                let sq = g.mul(v[0], v[0])?;
                if p == Primitive::Sum {
                    Ok(g.sum(sq))
                } else {
                    g.mean(sq)
                }
            })
        }
        Primitive::Mse => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let (a, b) = (uniform(rng, &shape), uniform(rng, &shape));
            max_relative_error(&[a, b], |g, v| g.mse(v[0], v[1]))
        }
        Primitive::L1 | Primitive::WeightedL1 => {
            let shape = [dim(rng, 1, 4), dim(rng, 1, 6)];
            let a = uniform(rng, &shape);
            let mut b = away_from_zero(rng, &shape, 1e-3);
            for (bv, av) in b.data_mut().iter_mut().zip(a.data()) {
                *bv += av;
            }
            let weights = (p == Primitive::WeightedL1).then(|| {
                let mut w = Tensor::zeros(&shape);
                for v in w.data_mut() {
                    *v = if rng.gen_bool(0.25) {
                        0.0
                    } else {
                        rng.gen_range(0.1..2.0)
                    };
                }
                w.data_mut()[0] = 1.0;
                w
            });
            max_relative_error(&[a, b], |g, v| g.l1(v[0], v[1], weights.as_ref()))
        }
        Primitive::Embedding => {
            let (k, d, n) = (dim(rng, 1, 5), dim(rng, 1, 4), dim(rng, 1, 8));
            let indices: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            let (table, w) = (uniform(rng, &[k, d]), uniform(rng, &[d, n]));
            max_relative_error(&[table], |g, v| {
                let y = g.embedding(v[0], &indices)?;
                project(g, y, &w)
            })
        }
        Primitive::ConcatRows => {
            let t = dim(rng, 1, 5);
            let n_parts = dim(rng, 1, 3);
            let parts: Vec<Tensor> = (0..n_parts)
                .map(|_| {
                    let r = rng.gen_range(1..=3);
                    uniform(rng, &[r, t])
                })
                .collect();
            let rows: usize = parts.iter().map(|p| p.shape()[0]).sum();
            let w = uniform(rng, &[rows, t]);
            max_relative_error(&parts, |g, v| {
                let y = g.concat_rows(v)?;
                project(g, y, &w)
            })
        }
        Primitive::BroadcastColumns => {
            let (c, len) = (dim(rng, 1, 4), dim(rng, 1, 6));
            let (x, w) = (uniform(rng, &[c, 1]), uniform(rng, &[c, len]));
            max_relative_error(&[x], |g, v| {
                let y = g.broadcast_columns(v[0], len)?;
                project(g, y, &w)
            })
        }
    }
}

/// Runs `cases` random shapes and values through one primitive.
pub fn check_primitive(p: Primitive, cases: usize, seed: u64) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (p as u64) << 32);
    let mut worst = 0.0f64;
    for _ in 0..cases {
        worst = worst.max(one_case(p, &mut rng)?);
    }
    Ok(GradCheckReport {
        primitive: p,
        cases,
        max_rel_error: worst,
    })
}
