use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Primitive that produced a node.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Input,
    Param(ParamId),
    MatVec,
    Add,
    Sub,
    Hadamard,
    Scale(f64),
    Sigmoid,
    Tanh,
    AddN,
    SumRows,
    Concat,
    Row(usize),
    LogSoftmax,
    NllPick(usize),
    SquaredNorm,
    Mask,
}

#[derive(Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Hadamard(usize, usize),
    Scale(usize, f64),
    Sigmoid(usize),
    Tanh(usize),
    AddN(Vec<usize>),
    SumRows(usize),
    Concat(Vec<usize>),
    Row(usize, usize),
    LogSoftmax(usize),
    NllPick(usize, usize),
    SquaredNorm(usize),
    Mask(usize, Vec<f64>),
}

#[derive(Debug)]
struct Node {
    op: Op,
    /// `None` for parameter leaves, whose value lives in the store.
    value: Option<Tensor>,
    requires_grad: bool,
}

/// A reverse-mode computation graph over the parameters of one [`ParamStore`].
///
/// Nodes are appended in evaluation order, so the node list is always a valid
/// topological order and cycles cannot be expressed. A graph belongs to a
/// single thread from construction through [`Graph::backward`].
pub struct Graph<'p> {
    store: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

fn shape_err(op: &'static str, detail: String) -> Error {
    Error::Shape { op, detail }
}

fn finite(op: &'static str, t: Tensor) -> Result<Tensor> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite { op })
    }
}

impl<'p> Graph<'p> {
    pub fn new(store: &'p ParamStore) -> Self {
        Graph {
            store,
            nodes: Vec::new(),
            param_vars: vec![None; store.len()],
        }
    }

    pub fn store(&self) -> &'p ParamStore {
        self.store
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(id), _) => self.store.get(*id),
            (_, Some(t)) => t,
            (_, None) => unreachable!("non-parameter node without a value"),
        }
    }

    pub fn op_kind(&self, v: Var) -> OpKind {
        match &self.nodes[v.0].op {
            Op::Input => OpKind::Input,
            Op::Param(id) => OpKind::Param(*id),
            Op::MatVec(..) => OpKind::MatVec,
            Op::Add(..) => OpKind::Add,
            Op::Sub(..) => OpKind::Sub,
            Op::Hadamard(..) => OpKind::Hadamard,
            Op::Scale(_, c) => OpKind::Scale(*c),
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Tanh(_) => OpKind::Tanh,
            Op::AddN(_) => OpKind::AddN,
            Op::SumRows(_) => OpKind::SumRows,
            Op::Concat(_) => OpKind::Concat,
            Op::Row(_, r) => OpKind::Row(*r),
            Op::LogSoftmax(_) => OpKind::LogSoftmax,
            Op::NllPick(_, k) => OpKind::NllPick(*k),
            Op::SquaredNorm(_) => OpKind::SquaredNorm,
            Op::Mask(..) => OpKind::Mask,
        }
    }

    /// Parameters with a leaf in this graph, in registration order.
    pub fn used_params(&self) -> Vec<ParamId> {
        self.param_vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some())
            .map(|(i, _)| ParamId(i))
            .collect()
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value: Some(value),
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn req(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant leaf; gradients never flow into it.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        let value = finite("input", value)?;
        Ok(self.push(Op::Input, value, false))
    }

    /// Leaf for a stored parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: None,
            requires_grad: true,
        });
        let v = Var(self.nodes.len() - 1);
        self.param_vars[id.0] = Some(v);
        v
    }

    /// Matrix–vector product `W·x` for `W: m×n`, `x: n`.
    pub fn matvec(&mut self, w: Var, x: Var) -> Result<Var> {
        let (wt, xt) = (self.value(w), self.value(x));
        if wt.rank() != 2 || xt.rank() != 1 || wt.shape()[1] != xt.len() {
            return Err(shape_err(
                "matvec",
                format!("{:?} · {:?}", wt.shape(), xt.shape()),
            ));
        }
        let (m, n) = (wt.shape()[0], wt.shape()[1]);
        let (wd, xd) = (wt.data(), xt.data());
        let out: Vec<f64> = (0..m)
            .map(|r| {
                wd[r * n..(r + 1) * n]
                    .iter()
                    .zip(xd)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        let value = finite("matvec", Tensor::new(vec![m], out)?)?;
        let rg = self.req(w) || self.req(x);
        Ok(self.push(Op::MatVec(w.0, x.0), value, rg))
    }

    fn zip_same(
        &self,
        op: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (at, bt) = (self.value(a), self.value(b));
        if at.shape() != bt.shape() {
            return Err(shape_err(op, format!("{:?} vs {:?}", at.shape(), bt.shape())));
        }
        let data = at.data().iter().zip(bt.data()).map(|(x, y)| f(*x, *y)).collect();
        finite(op, Tensor::new(at.shape().to_vec(), data)?)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("add", a, b, |x, y| x + y)?;
        let rg = self.req(a) || self.req(b);
        Ok(self.push(Op::Add(a.0, b.0), value, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("sub", a, b, |x, y| x - y)?;
        let rg = self.req(a) || self.req(b);
        Ok(self.push(Op::Sub(a.0, b.0), value, rg))
    }

    /// Elementwise product.
    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.zip_same("hadamard", a, b, |x, y| x * y)?;
        let rg = self.req(a) || self.req(b);
        Ok(self.push(Op::Hadamard(a.0, b.0), value, rg))
    }

    fn map(&self, op: &'static str, a: Var, f: impl Fn(f64) -> f64) -> Result<Tensor> {
        let at = self.value(a);
        let data = at.data().iter().map(|x| f(*x)).collect();
        finite(op, Tensor::new(at.shape().to_vec(), data)?)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Result<Var> {
        let value = self.map("scale", a, |x| x * factor)?;
        let rg = self.req(a);
        Ok(self.push(Op::Scale(a.0, factor), value, rg))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let value = self.map("sigmoid", a, sigmoid)?;
        let rg = self.req(a);
        Ok(self.push(Op::Sigmoid(a.0), value, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let value = self.map("tanh", a, f64::tanh)?;
        let rg = self.req(a);
        Ok(self.push(Op::Tanh(a.0), value, rg))
    }

    /// Elementwise sum of equally shaped tensors.
    pub fn add_n(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("add_n"))?;
        let shape = self.value(first).shape().to_vec();
        let mut acc = vec![0.0; self.value(first).len()];
        for &p in parts {
            let t = self.value(p);
            if t.shape() != shape.as_slice() {
                return Err(shape_err("add_n", format!("{:?} vs {:?}", shape, t.shape())));
            }
            for (a, v) in acc.iter_mut().zip(t.data()) {
                *a += v;
            }
        }
        let value = finite("add_n", Tensor::new(shape, acc)?)?;
        let rg = parts.iter().any(|p| self.req(*p));
        Ok(self.push(Op::AddN(parts.iter().map(|p| p.0).collect()), value, rg))
    }

    /// Sums the rows of a matrix: `r×c → c`.
    pub fn sum_rows(&mut self, m: Var) -> Result<Var> {
        let t = self.value(m);
        if t.rank() != 2 {
            return Err(shape_err("sum_rows", format!("expected a matrix, got {:?}", t.shape())));
        }
        let (r, c) = (t.shape()[0], t.shape()[1]);
        let mut out = vec![0.0; c];
        for row in t.data().chunks(c).take(r) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        let value = finite("sum_rows", Tensor::new(vec![c], out)?)?;
        let rg = self.req(m);
        Ok(self.push(Op::SumRows(m.0), value, rg))
    }

    /// Concatenates vectors.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Empty("concat"));
        }
        let mut out = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.rank() != 1 {
                return Err(shape_err("concat", format!("expected vectors, got {:?}", t.shape())));
            }
            out.extend_from_slice(t.data());
        }
        let n = out.len();
        let value = Tensor::new(vec![n], out)?;
        let rg = parts.iter().any(|p| self.req(*p));
        Ok(self.push(Op::Concat(parts.iter().map(|p| p.0).collect()), value, rg))
    }

    /// Row `row` of a matrix as a vector; gradient flows only into that row.
    pub fn row(&mut self, table: Var, row: usize) -> Result<Var> {
        let t = self.value(table);
        if t.rank() != 2 {
            return Err(shape_err("row", format!("expected a matrix, got {:?}", t.shape())));
        }
        let (r, c) = (t.shape()[0], t.shape()[1]);
        if row >= r {
            return Err(Error::IndexOutOfRange {
                what: "embedding rows",
                index: row,
                len: r,
            });
        }
        let value = Tensor::new(vec![c], t.data()[row * c..(row + 1) * c].to_vec())?;
        let rg = self.req(table);
        Ok(self.push(Op::Row(table.0, row), value, rg))
    }

    /// `x_i − logsumexp(x)`, computed with max subtraction.
    pub fn log_softmax(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        if t.rank() != 1 {
            return Err(shape_err("log_softmax", format!("expected a vector, got {:?}", t.shape())));
        }
        let value = finite("log_softmax", Tensor::vector(&log_softmax(t.data())))?;
        let rg = self.req(x);
        Ok(self.push(Op::LogSoftmax(x.0), value, rg))
    }

    /// `−logp[gold]` as a scalar.
    pub fn nll_pick(&mut self, logp: Var, gold: usize) -> Result<Var> {
        let t = self.value(logp);
        if t.rank() != 1 {
            return Err(shape_err("nll_pick", format!("expected a vector, got {:?}", t.shape())));
        }
        if gold >= t.len() {
            return Err(Error::IndexOutOfRange {
                what: "label scores",
                index: gold,
                len: t.len(),
            });
        }
        let value = Tensor::scalar(-t.data()[gold]);
        let rg = self.req(logp);
        Ok(self.push(Op::NllPick(logp.0, gold), value, rg))
    }

    /// Sum of squared entries as a scalar.
    pub fn squared_norm(&mut self, x: Var) -> Result<Var> {
        let value = finite("squared_norm", Tensor::scalar(self.value(x).squared_norm()))?;
        let rg = self.req(x);
        Ok(self.push(Op::SquaredNorm(x.0), value, rg))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<f64>) -> Result<Var> {
        let t = self.value(x);
        if t.len() != mask.len() {
            return Err(shape_err("mask", format!("{} values vs mask of {}", t.len(), mask.len())));
        }
        let data = t.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let value = finite("mask", Tensor::new(t.shape().to_vec(), data)?)?;
        let rg = self.req(x);
        Ok(self.push(Op::Mask(x.0, mask), value, rg))
    }

    /// Backpropagates from a scalar root and returns the gradient of every
    /// parameter in the store (zeros for parameters the root does not reach).
    pub fn backward(&self, root: Var) -> Result<Gradients> {
        let rt = self.value(root);
        if rt.len() != 1 {
            return Err(Error::NonScalarRoot(rt.shape().to_vec()));
        }
        let mut out = Gradients::zeros_like(self.store);
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Input => {}
                Op::Param(id) => out.accumulate(*id, &g),
                Op::MatVec(w, x) => {
                    let wt = self.value(Var(*w));
                    let xt = self.value(Var(*x));
                    let n = xt.len();
                    if self.nodes[*w].requires_grad {
                        let xd = xt.data();
                        self.acc(&mut grads, *w, |dw| {
                            for (r, gr) in g.iter().enumerate() {
                                if *gr == 0.0 {
                                    continue;
                                }
                                for (d, xv) in dw[r * n..(r + 1) * n].iter_mut().zip(xd) {
                                    *d += gr * xv;
                                }
                            }
                        });
                    }
                    if self.nodes[*x].requires_grad {
                        let wd = wt.data();
                        self.acc(&mut grads, *x, |dx| {
                            for (r, gr) in g.iter().enumerate() {
                                for (d, wv) in dx.iter_mut().zip(&wd[r * n..(r + 1) * n]) {
                                    *d += gr * wv;
                                }
                            }
                        });
                    }
                }
                Op::Add(a, b) => {
                    self.acc(&mut grads, *a, |d| add_into(d, &g));
                    self.acc(&mut grads, *b, |d| add_into(d, &g));
                }
                Op::Sub(a, b) => {
                    self.acc(&mut grads, *a, |d| add_into(d, &g));
                    self.acc(&mut grads, *b, |d| {
                        d.iter_mut().zip(&g).for_each(|(d, g)| *d -= g)
                    });
                }
                Op::Hadamard(a, b) => {
                    let (av, bv) = (self.value(Var(*a)).data(), self.value(Var(*b)).data());
                    self.acc(&mut grads, *a, |d| {
                        for ((d, g), y) in d.iter_mut().zip(&g).zip(bv) {
                            *d += g * y;
                        }
                    });
                    self.acc(&mut grads, *b, |d| {
                        for ((d, g), x) in d.iter_mut().zip(&g).zip(av) {
                            *d += g * x;
                        }
                    });
                }
                Op::Scale(a, c) => {
                    self.acc(&mut grads, *a, |d| {
                        d.iter_mut().zip(&g).for_each(|(d, g)| *d += c * g)
                    });
                }
                Op::Sigmoid(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    self.acc(&mut grads, *a, |d| {
                        for ((d, g), y) in d.iter_mut().zip(&g).zip(y) {
                            *d += g * y * (1.0 - y);
                        }
                    });
                }
                Op::Tanh(a) => {
                    let y = node.value.as_ref().unwrap().data();
                    self.acc(&mut grads, *a, |d| {
                        for ((d, g), y) in d.iter_mut().zip(&g).zip(y) {
                            *d += g * (1.0 - y * y);
                        }
                    });
                }
                Op::AddN(parts) => {
                    for p in parts {
                        self.acc(&mut grads, *p, |d| add_into(d, &g));
                    }
                }
                Op::SumRows(m) => {
                    let c = g.len();
                    self.acc(&mut grads, *m, |d| {
                        for row in d.chunks_mut(c) {
                            add_into(row, &g);
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(Var(*p)).len();
                        let slice = &g[offset..offset + n];
                        self.acc(&mut grads, *p, |d| add_into(d, slice));
                        offset += n;
                    }
                }
                Op::Row(table, row) => {
                    let c = g.len();
                    self.acc(&mut grads, *table, |d| add_into(&mut d[row * c..(row + 1) * c], &g));
                }
                Op::LogSoftmax(x) => {
                    let y = node.value.as_ref().unwrap().data();
                    let total: f64 = g.iter().sum();
                    self.acc(&mut grads, *x, |d| {
                        for ((d, g), y) in d.iter_mut().zip(&g).zip(y) {
                            *d += g - y.exp() * total;
                        }
                    });
                }
                Op::NllPick(x, gold) => {
                    self.acc(&mut grads, *x, |d| d[*gold] -= g[0]);
                }
                Op::SquaredNorm(x) => {
                    let xv = self.value(Var(*x)).data();
                    self.acc(&mut grads, *x, |d| {
                        for (d, x) in d.iter_mut().zip(xv) {
                            *d += 2.0 * x * g[0];
                        }
                    });
                }
                Op::Mask(x, mask) => {
                    self.acc(&mut grads, *x, |d| {
                        for ((d, g), m) in d.iter_mut().zip(&g).zip(mask) {
                            *d += g * m;
                        }
                    });
                }
            }
        }
        Ok(out)
    }

    fn acc(&self, grads: &mut [Option<Vec<f64>>], target: usize, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[target].requires_grad {
            return;
        }
        let buf = grads[target].get_or_insert_with(|| vec![0.0; self.value(Var(target)).len()]);
        f(buf);
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable log-softmax of a slice.
pub fn log_softmax(x: &[f64]) -> Vec<f64> {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    x.iter().map(|v| v - lse).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store_with(values: &[(&str, Tensor)]) -> (ParamStore, Vec<ParamId>) {
        let mut s = ParamStore::new();
        let ids = values.iter().map(|(n, t)| s.add(*n, t.clone())).collect();
        (s, ids)
    }

    #[test]
    fn matvec_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let eye = g.input(Tensor::matrix(2, 2, &[1.0, 0.0, 0.0, 1.0]).unwrap()).unwrap();
        let x = g.input(Tensor::vector(&[3.0, 4.0])).unwrap();
        let y = g.matvec(eye, x).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 4.0]);

        let zero = g.input(Tensor::zeros(&[3, 2])).unwrap();
        let y = g.matvec(zero, x).unwrap();
        assert_eq!(g.value(y).data(), &[0.0, 0.0, 0.0]);

        let w = g.input(Tensor::matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let ones = g.input(Tensor::vector(&[1.0, 1.0])).unwrap();
        let y = g.matvec(w, ones).unwrap();
        assert_eq!(g.value(y).data(), &[3.0, 7.0]);

        let bad = g.input(Tensor::vector(&[1.0, 1.0, 1.0])).unwrap();
        assert!(matches!(g.matvec(w, bad), Err(Error::Shape { .. })));
    }

    #[test]
    fn concat_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let a = g.input(Tensor::vector(&[1.0, 2.0])).unwrap();
        let b = g.input(Tensor::vector(&[3.0])).unwrap();
        let c = g.concat(&[a, b]).unwrap();
        assert_eq!(g.value(c).data(), &[1.0, 2.0, 3.0]);
        let single = g.concat(&[a]).unwrap();
        assert_eq!(g.value(single), g.value(a));
        assert!(matches!(g.concat(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn concat_gradient_splits() {
        let (store, ids) = store_with(&[
            ("a", Tensor::vector(&[0.3])),
            ("b", Tensor::vector(&[-1.2])),
        ]);
        let mut g = Graph::new(&store);
        let (a, b) = (g.param(ids[0]), g.param(ids[1]));
        let c = g.concat(&[a, b]).unwrap();
        let row = g.input(Tensor::matrix(1, 2, &[1.0, 1.0]).unwrap()).unwrap();
        let s = g.matvec(row, c).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(ids[0]).data(), &[1.0]);
        assert_eq!(grads.get(ids[1]).data(), &[1.0]);
    }

    #[test]
    fn elementwise_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let z = g.input(Tensor::vector(&[0.0])).unwrap();
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).data(), &[0.5]);
        let t = g.tanh(z).unwrap();
        assert_eq!(g.value(t).data(), &[0.0]);
        let m = g.input(Tensor::matrix(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap()).unwrap();
        let r = g.sum_rows(m).unwrap();
        assert_eq!(g.value(r).data(), &[4.0, 6.0]);
        let a = g.input(Tensor::vector(&[1.0, 2.0])).unwrap();
        let b = g.input(Tensor::vector(&[1.0, 2.0, 3.0])).unwrap();
        assert!(matches!(g.add(a, b), Err(Error::Shape { .. })));
        let big = g.input(Tensor::vector(&[1e300])).unwrap();
        assert!(matches!(g.scale(big, 1e300), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn log_softmax_examples() {
        let store = ParamStore::new();
        let mut g = Graph::new(&store);
        let u = g.input(Tensor::vector(&[0.0, 0.0, 0.0])).unwrap();
        let y = g.log_softmax(u).unwrap();
        for v in g.value(y).data() {
            assert!((v + 3f64.ln()).abs() < 1e-15);
        }
        let big = g.input(Tensor::vector(&[1000.0, 0.0])).unwrap();
        let y = g.log_softmax(big).unwrap();
        let d = g.value(y).data();
        assert!(d[0].abs() < 1e-12 && (d[1] + 1000.0).abs() < 1e-9);
        let x = g.input(Tensor::vector(&[1.0, 2.0])).unwrap();
        let y = g.log_softmax(x).unwrap();
        let d = g.value(y).data();
        assert!((d[0] + 1.3133).abs() < 1e-4 && (d[1] + 0.3133).abs() < 1e-4);

        let nll = g.nll_pick(y, 0).unwrap();
        assert!((g.value(nll).item() - 1.3133).abs() < 1e-4);
        let nll = g.nll_pick(u, 2).unwrap();
        assert_eq!(g.value(nll).item(), 0.0);
        let ls = g.log_softmax(u).unwrap();
        let nll = g.nll_pick(ls, 1).unwrap();
        assert!((g.value(nll).item() - 1.0986).abs() < 1e-4);
        assert!(matches!(g.nll_pick(ls, 3), Err(Error::IndexOutOfRange { .. })));
        let nan = Tensor::vector(&[f64::NAN]);
        assert!(matches!(g.input(nan), Err(Error::NonFinite { .. })));
    }

    #[test]
    fn square_gradient_and_unused_param() {
        let (store, ids) = store_with(&[
            ("x", Tensor::vector(&[3.0])),
            ("unused", Tensor::vector(&[7.0, 8.0])),
        ]);
        let mut g = Graph::new(&store);
        let x = g.param(ids[0]);
        let sq = g.squared_norm(x).unwrap();
        assert_eq!(g.value(sq).item(), 9.0);
        let grads = g.backward(sq).unwrap();
        assert_eq!(grads.get(ids[0]).data(), &[6.0]);
        assert_eq!(grads.get(ids[1]).data(), &[0.0, 0.0]);
        assert!(!grads.is_reached(ids[1]));
        assert_eq!(g.used_params(), vec![ids[0]]);
    }

    #[test]
    fn non_scalar_root_is_rejected() {
        let (store, ids) = store_with(&[("x", Tensor::vector(&[1.0, 2.0]))]);
        let mut g = Graph::new(&store);
        let x = g.param(ids[0]);
        let y = g.tanh(x).unwrap();
        assert!(matches!(g.backward(y), Err(Error::NonScalarRoot(_))));
    }

    #[test]
    fn repeated_use_accumulates() {
        // f(x) = x ⊙ x summed through a row vector: df/dx = 2x
        let (store, ids) = store_with(&[("x", Tensor::vector(&[1.5, -2.0]))]);
        let mut g = Graph::new(&store);
        let x = g.param(ids[0]);
        let sq = g.hadamard(x, x).unwrap();
        let row = g.input(Tensor::matrix(1, 2, &[1.0, 1.0]).unwrap()).unwrap();
        let s = g.matvec(row, sq).unwrap();
        let grads = g.backward(s).unwrap();
        assert_eq!(grads.get(ids[0]).data(), &[3.0, -4.0]);
        assert_eq!(g.op_kind(s), OpKind::MatVec);
    }

    #[test]
    fn row_gradient_only_touches_one_row() {
        let (store, ids) = store_with(&[(
            "table",
            Tensor::matrix(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap(),
        )]);
        let mut g = Graph::new(&store);
        let t = g.param(ids[0]);
        let r = g.row(t, 1).unwrap();
        assert_eq!(g.value(r).data(), &[3.0, 4.0]);
        let n = g.squared_norm(r).unwrap();
        let grads = g.backward(n).unwrap();
        assert_eq!(grads.get(ids[0]).data(), &[0.0, 0.0, 6.0, 8.0, 0.0, 0.0]);
        assert!(matches!(g.row(t, 3), Err(Error::IndexOutOfRange { .. })));
    }
}
