//! Reverse-mode differentiation over dense matrices.
//!
//! Every value is a 2-D array; scalars are `1 × 1`. Operations append to the
//! tape in evaluation order, so a single backward sweep in reverse order
//! visits each node after all of its consumers.

use ndarray::{concatenate, s, Array2, Axis};

/// Handle to a value on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    /// Adds a `1 × m` row to every row.
    AddRow(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Transpose(Var),
    ConcatCols(Vec<Var>),
    MeanRows(Var),
    /// Cosine similarity of two `1 × d` rows.
    Cosine(Var, Var),
    /// `-pos / tau + ln Σ exp(neg_k / tau)` over `1 × 1` similarities.
    Contrast { pos: Var, negs: Vec<Var>, tau: f64 },
    /// `Σ weight · (softplus(z) − target · z)` over logits `z`.
    BceLogits {
        logits: Var,
        target: Array2<f64>,
        weight: Array2<f64>,
    },
    Sum(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    value: Array2<f64>,
    op: Op,
    needs_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of one scalar with respect to every value that needed one.
#[derive(Debug)]
pub struct Grads {
    grads: Vec<Option<Array2<f64>>>,
}

impl Grads {
    pub fn get(&self, v: Var) -> Option<&Array2<f64>> {
        self.grads[v.0].as_ref()
    }

    pub fn take(&mut self, v: Var) -> Option<Array2<f64>> {
        self.grads[v.0].take()
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn scalar(x: f64) -> Array2<f64> {
    Array2::from_elem((1, 1), x)
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    /// A trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that takes no gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Sign of every ReLU output, in tape order.
    pub fn relu_pattern(&self) -> Vec<bool> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.op, Op::Relu(_)))
            .flat_map(|n| n.value.iter().map(|&x| x > 0.0))
            .collect()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let g = self.needs(&[a, b]);
        self.push(value, Op::MatMul(a, b), g)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let g = self.needs(&[a, b]);
        self.push(value, Op::Add(a, b), g)
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        let g = self.needs(&[a, row]);
        self.push(value, Op::AddRow(a, row), g)
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        let g = self.needs(&[a]);
        self.push(value, Op::Scale(a, k), g)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let g = self.needs(&[a]);
        self.push(value, Op::Relu(a), g)
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        let g = self.needs(&[a]);
        self.push(value, Op::Transpose(a), g)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = concatenate(Axis(1), &views).expect("row counts agree");
        let g = self.needs(parts);
        self.push(value, Op::ConcatCols(parts.to_vec()), g)
    }

    pub fn mean_rows(&mut self, a: Var) -> Var {
        let value = self.value(a).mean_axis(Axis(0)).expect("non-empty").insert_axis(Axis(0));
        let g = self.needs(&[a]);
        self.push(value, Op::MeanRows(a), g)
    }

    /// Cosine similarity of two rows. Both must have non-zero norm.
    pub fn cosine(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        let value = (x * y).sum() / (norm(x) * norm(y));
        let g = self.needs(&[a, b]);
        self.push(scalar(value), Op::Cosine(a, b), g)
    }

    pub fn contrast(&mut self, pos: Var, negs: &[Var], tau: f64) -> Var {
        let p = self.scalar(pos);
        let ns: Vec<f64> = negs.iter().map(|v| self.scalar(*v) / tau).collect();
        let value = -p / tau + log_sum_exp(&ns);
        let mut all = negs.to_vec();
        all.push(pos);
        let g = self.needs(&all);
        self.push(
            scalar(value),
            Op::Contrast {
                pos,
                negs: negs.to_vec(),
                tau,
            },
            g,
        )
    }

    pub fn bce_logits(&mut self, logits: Var, target: Array2<f64>, weight: Array2<f64>) -> Var {
        let z = self.value(logits);
        let value = ndarray::Zip::from(z)
            .and(&target)
            .and(&weight)
            .fold(0.0, |acc, &z, &t, &w| acc + w * (softplus(z) - t * z));
        let g = self.needs(&[logits]);
        self.push(scalar(value), Op::BceLogits { logits, target, weight }, g)
    }

    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let value = parts.iter().map(|v| self.scalar(*v)).sum();
        let g = self.needs(parts);
        self.push(scalar(value), Op::Sum(parts.to_vec()), g)
    }

    /// Gradients of the `1 × 1` value `out`.
    pub fn backward(&self, out: Var) -> Grads {
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(scalar(1.0));
        for k in (0..=out.0).rev() {
            let node = &self.nodes[k];
            if !node.needs_grad {
                continue;
            }
            let Some(g) = grads[k].take() else {
                continue;
            };
            let mut give = |v: Var, d: Array2<f64>| {
                if !self.nodes[v.0].needs_grad {
                    return;
                }
                match &mut grads[v.0] {
                    Some(acc) => *acc += &d,
                    slot => *slot = Some(d),
                }
            };
            match &node.op {
                Op::Leaf => {
                    grads[k] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    if self.nodes[a.0].needs_grad {
                        give(*a, g.dot(&self.value(*b).t()));
                    }
                    if self.nodes[b.0].needs_grad {
                        give(*b, self.value(*a).t().dot(&g));
                    }
                }
                Op::Add(a, b) => {
                    give(*a, g.clone());
                    give(*b, g);
                }
                Op::AddRow(a, row) => {
                    give(*row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    give(*a, g);
                }
                Op::Scale(a, c) => give(*a, g * *c),
                Op::Relu(a) => {
                    let mut d = g;
                    ndarray::Zip::from(&mut d)
                        .and(&node.value)
                        .for_each(|d, &y| {
                            if y <= 0.0 {
                                *d = 0.0
                            }
                        });
                    give(*a, d);
                }
                Op::Transpose(a) => give(*a, g.t().to_owned()),
                Op::ConcatCols(parts) => {
                    let mut col = 0;
                    for v in parts {
                        let w = self.value(*v).ncols();
                        give(*v, g.slice(s![.., col..col + w]).to_owned());
                        col += w;
                    }
                }
                Op::MeanRows(a) => {
                    let rows = self.value(*a).nrows();
                    let d = g / rows as f64;
                    give(*a, d.broadcast((rows, d.ncols())).expect("row").to_owned());
                }
                Op::Cosine(a, b) => {
                    let (x, y) = (self.value(*a), self.value(*b));
                    let (nx, ny) = (norm(x), norm(y));
                    let c = node.value[[0, 0]];
                    let gs = g[[0, 0]];
                    give(*a, (y / (nx * ny) - x * (c / (nx * nx))) * gs);
                    give(*b, (x / (nx * ny) - y * (c / (ny * ny))) * gs);
                }
                Op::Contrast { pos, negs, tau } => {
                    let gs = g[[0, 0]];
                    give(*pos, scalar(-gs / tau));
                    let ns: Vec<f64> = negs.iter().map(|v| self.scalar(*v) / tau).collect();
                    let lse = log_sum_exp(&ns);
                    for (v, n) in negs.iter().zip(ns) {
                        give(*v, scalar(gs * (n - lse).exp() / tau));
                    }
                }
                Op::BceLogits { logits, target, weight } => {
                    let gs = g[[0, 0]];
                    let mut d = self.value(*logits).mapv(sigmoid);
                    ndarray::Zip::from(&mut d)
                        .and(target)
                        .and(weight)
                        .for_each(|d, &t, &w| *d = gs * w * (*d - t));
                    give(*logits, d);
                }
                Op::Sum(parts) => {
                    for v in parts {
                        give(*v, g.clone());
                    }
                }
            }
        }
        Grads { grads }
    }
}

pub(crate) fn norm(x: &Array2<f64>) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>) -> Array2<f64> {
        let h = 1e-6;
        let mut out = Array2::zeros(x.raw_dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut up = x.clone();
            up[[r, c]] += h;
            let mut down = x.clone();
            down[[r, c]] -= h;
            out[[r, c]] = (f(&up) - f(&down)) / (2.0 * h);
        }
        out
    }

    fn close(a: &Array2<f64>, b: &Array2<f64>) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-6 * (1.0 + x.abs().max(y.abs())))
    }

    #[test]
    fn matmul_relu_mean_gradient() {
        let x0 = array![[0.3, -1.2, 0.5], [1.1, 0.4, -0.7]];
        let w = array![[0.2, -0.5], [0.9, 0.1], [-0.3, 0.8]];
        let f = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let xv = t.param(x.clone());
            let wv = t.constant(w.clone());
            let h = t.matmul(xv, wv);
            let h = t.relu(h);
            let m = t.mean_rows(h);
            let ones = t.constant(array![[1.0], [1.0]]);
            let out = t.matmul(m, ones);
            (t.scalar(out), t.backward(out).get(xv).cloned().unwrap())
        };
        let (_, analytic) = f(&x0);
        assert!(close(&analytic, &numeric(|x| f(x).0, &x0)));
    }

    #[test]
    fn cosine_and_contrast_gradient() {
        let a0 = array![[0.3, -1.2, 0.5, 2.0]];
        let p = array![[1.0, 0.2, -0.4, 0.3]];
        let n = array![[-0.5, 0.7, 0.1, 0.9]];
        let f = |a: &Array2<f64>| {
            let mut t = Tape::new();
            let av = t.param(a.clone());
            let pv = t.constant(p.clone());
            let nv = t.constant(n.clone());
            let sp = t.cosine(av, pv);
            let sn = t.cosine(av, nv);
            let out = t.contrast(sp, &[sn], 0.07);
            (t.scalar(out), t.backward(out).get(av).cloned().unwrap())
        };
        let (_, analytic) = f(&a0);
        assert!(close(&analytic, &numeric(|x| f(x).0, &a0)));
    }

    #[test]
    fn bilinear_bce_gradient() {
        let s0 = array![[0.3, -1.2], [1.1, 0.4], [0.2, 0.9]];
        let b = array![[0.5, -0.3], [0.8, 0.1]];
        let target = array![[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];
        let weight = array![[0.0, 1.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 0.0]] / 6.0;
        let f = |s: &Array2<f64>| {
            let mut t = Tape::new();
            let sv = t.param(s.clone());
            let bv = t.constant(b.clone());
            let sb = t.matmul(sv, bv);
            let st = t.transpose(sv);
            let z = t.matmul(sb, st);
            let out = t.bce_logits(z, target.clone(), weight.clone());
            (t.scalar(out), t.backward(out).get(sv).cloned().unwrap())
        };
        let (_, analytic) = f(&s0);
        assert!(close(&analytic, &numeric(|x| f(x).0, &s0)));
    }

    #[test]
    fn concat_and_add_row_gradient() {
        let x0 = array![[0.3, -1.2], [1.1, 0.4]];
        let f = |x: &Array2<f64>| {
            let mut t = Tape::new();
            let xv = t.param(x.clone());
            let yv = t.scale(xv, 2.0);
            let c = t.concat_cols(&[xv, yv]);
            let b = t.constant(array![[0.1, 0.2, 0.3, 0.4]]);
            let c = t.add_row(c, b);
            let c = t.add(c, c);
            let w = t.constant(array![[1.0], [-2.0], [0.5], [3.0]]);
            let col = t.matmul(c, w);
            let m = t.mean_rows(col);
            let out = t.sum(&[m, m]);
            (t.scalar(out), t.backward(out).get(xv).cloned().unwrap())
        };
        let (_, analytic) = f(&x0);
        assert!(close(&analytic, &numeric(|x| f(x).0, &x0)));
    }
}
