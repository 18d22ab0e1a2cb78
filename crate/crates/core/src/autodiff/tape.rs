//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Every operation appends one node holding its forward value. Nodes refer
//! to their inputs by index, so the tape is topologically ordered by
//! construction and `backward` is a single reverse sweep.

use super::tensor::{dot, gemm, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    MatVec(Var, Var),
    VecMat(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Vec<f64>),
    Scale(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Pick(Var, usize),
    Sum(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    Stack(Vec<Var>),
    WeightNorm(Var, Var),
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation; values are immutable once pushed.
#[derive(Default, Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Tape::backward`], indexed by [`Var`].
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; zeros when `v` does not
    /// reach the loss.
    pub fn get(&self, v: Var) -> Tensor {
        let shape = &self.shapes[v.0];
        match &self.grads[v.0] {
            Some(g) => Tensor::new(shape.clone(), g.clone()).expect("gradient shape"),
            None => Tensor::zeros(shape),
        }
    }

    pub fn raw(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }
}

fn check_finite(op: &'static str, t: &Tensor) -> Result<()> {
    if t.data().iter().any(|x| x.is_nan()) {
        return Err(Error::Numeric(format!("{op}: NaN input")));
    }
    Ok(())
}

/// Softmax over `x`, ignoring entries where `mask[i]` is false (their
/// output is exactly zero). Subtracts the max for stability.
pub fn softmax_values(x: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Numeric("softmax of empty vector".into()));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("softmax: NaN input".into()));
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| keep(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numeric("softmax: every position is masked".into()));
    }
    let mut out: Vec<f64> = x
        .iter()
        .enumerate()
        .map(|(i, &v)| if keep(i) { (v - max).exp() } else { 0.0 })
        .collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= z);
    Ok(out)
}

/// Log-softmax with the same masking rule as [`softmax_values`]; masked
/// entries are `-inf`.
pub fn log_softmax_values(x: &[f64], mask: Option<&[bool]>) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::Numeric("log-softmax of empty vector".into()));
    }
    if x.iter().any(|v| v.is_nan()) {
        return Err(Error::Numeric("log-softmax: NaN input".into()));
    }
    let keep = |i: usize| mask.is_none_or(|m| m[i]);
    let max = x
        .iter()
        .enumerate()
        .filter(|&(i, _)| keep(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::Numeric(
            "log-softmax: every position is masked".into(),
        ));
    }
    let lse = max
        + x.iter()
            .enumerate()
            .filter(|&(i, _)| keep(i))
            .map(|(_, &v)| (v - max).exp())
            .sum::<f64>()
            .ln();
    Ok(x.iter()
        .enumerate()
        .map(|(i, &v)| if keep(i) { v - lse } else { f64::NEG_INFINITY })
        .collect())
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
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

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.push(value, Op::Leaf, requires_grad)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.rg(v)
    }

    fn mat(&self, op: &'static str, v: Var) -> Result<(usize, usize)> {
        let t = self.value(v);
        t.dims2().ok_or_else(|| Error::shape(op, t.shape(), &[]))
    }

    fn vec_len(&self, op: &'static str, v: Var) -> Result<usize> {
        let t = self.value(v);
        match t.shape() {
            [n] => Ok(*n),
            s => Err(Error::shape(op, s, &[])),
        }
    }

    /// `a [m×k] · b [k×n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat("matmul", a)?;
        let (k2, n) = self.mat("matmul", b)?;
        if k != k2 {
            return Err(Error::shape(
                "matmul",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let mut out = vec![0.0; m * n];
        gemm(
            self.value(a).data(),
            self.value(b).data(),
            m,
            k,
            n,
            &mut out,
        );
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMul(a, b), rg))
    }

    /// `a [m×k] · bᵀ` for `b [n×k]`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.mat("matmul_nt", a)?;
        let (n, k2) = self.mat("matmul_nt", b)?;
        if k != k2 {
            return Err(Error::shape(
                "matmul_nt",
                self.value(a).shape(),
                self.value(b).shape(),
            ));
        }
        let (ad, bd) = (self.value(a).data(), self.value(b).data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[i * n + j] = dot(&ad[i * k..(i + 1) * k], &bd[j * k..(j + 1) * k]);
            }
        }
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Tensor::matrix(m, n, out)?, Op::MatMulNt(a, b), rg))
    }

    /// `m [r×c] · x [c]`.
    pub fn matvec(&mut self, m: Var, x: Var) -> Result<Var> {
        let (r, c) = self.mat("matvec", m)?;
        let n = self.vec_len("matvec", x)?;
        if n != c {
            return Err(Error::shape(
                "matvec",
                self.value(m).shape(),
                self.value(x).shape(),
            ));
        }
        let (md, xd) = (self.value(m).data(), self.value(x).data());
        let out: Vec<f64> = (0..r).map(|i| dot(&md[i * c..(i + 1) * c], xd)).collect();
        let rg = self.rg(m) || self.rg(x);
        Ok(self.push(Tensor::vector(out)?, Op::MatVec(m, x), rg))
    }

    /// `xᵀ · m` for `x [r]`, `m [r×c]`.
    pub fn vecmat(&mut self, x: Var, m: Var) -> Result<Var> {
        let (r, c) = self.mat("vecmat", m)?;
        let n = self.vec_len("vecmat", x)?;
        if n != r {
            return Err(Error::shape(
                "vecmat",
                self.value(x).shape(),
                self.value(m).shape(),
            ));
        }
        let mut out = vec![0.0; c];
        gemm(
            self.value(x).data(),
            self.value(m).data(),
            1,
            r,
            c,
            &mut out,
        );
        let rg = self.rg(m) || self.rg(x);
        Ok(self.push(Tensor::vector(out)?, Op::VecMat(x, m), rg))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::shape(op, sa, sb));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x + y)
            .collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Add(a, b), rg))
    }

    /// Adds vector `v [c]` to every row of `m [r×c]`.
    pub fn add_row(&mut self, m: Var, v: Var) -> Result<Var> {
        let (r, c) = self.mat("add_row", m)?;
        let n = self.vec_len("add_row", v)?;
        if n != c {
            return Err(Error::shape(
                "add_row",
                self.value(m).shape(),
                self.value(v).shape(),
            ));
        }
        let vd = self.value(v).data();
        let mut out = self.value(m).data().to_vec();
        for i in 0..r {
            for (o, x) in out[i * c..(i + 1) * c].iter_mut().zip(vd) {
                *o += x;
            }
        }
        let rg = self.rg(m) || self.rg(v);
        Ok(self.push(Tensor::matrix(r, c, out)?, Op::AddRow(m, v), rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let va = self.value(a);
        let data = va
            .data()
            .iter()
            .zip(self.value(b).data())
            .map(|(x, y)| x * y)
            .collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(t, Op::Mul(a, b), rg))
    }

    /// Elementwise product with a constant mask (no gradient to the mask).
    pub fn mul_const(&mut self, a: Var, factors: Vec<f64>) -> Result<Var> {
        let va = self.value(a);
        if factors.len() != va.len() {
            return Err(Error::shape("mul_const", va.shape(), &[factors.len()]));
        }
        let data = va.data().iter().zip(&factors).map(|(x, y)| x * y).collect();
        let t = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.rg(a);
        Ok(self.push(t, Op::MulConst(a, factors), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let va = self.value(a);
        let data = va.data().iter().map(|x| x * s).collect();
        let t = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Scale(a, s), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let t = Tensor::new(
            va.shape().to_vec(),
            va.data().iter().map(|x| x.tanh()).collect(),
        )
        .expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Tanh(a), rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let va = self.value(a);
        let data = va.data().iter().map(|&x| sigmoid(x)).collect();
        let t = Tensor::new(va.shape().to_vec(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(t, Op::Sigmoid(a), rg)
    }

    /// Softmax over a vector. Positions with `mask[i] == false` get
    /// probability zero.
    pub fn softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let n = self.vec_len("softmax", a)?;
        check_mask("softmax", n, mask)?;
        check_finite("softmax", self.value(a))?;
        let out = softmax_values(self.value(a).data(), mask)?;
        let rg = self.rg(a);
        Ok(self.push(Tensor::vector(out)?, Op::Softmax(a), rg))
    }

    pub fn log_softmax(&mut self, a: Var, mask: Option<&[bool]>) -> Result<Var> {
        let n = self.vec_len("log_softmax", a)?;
        check_mask("log_softmax", n, mask)?;
        let out = log_softmax_values(self.value(a).data(), mask)?;
        let rg = self.rg(a);
        Ok(self.push(Tensor::vector(out)?, Op::LogSoftmax(a), rg))
    }

    /// Scalar at flat index `i`.
    pub fn pick(&mut self, a: Var, i: usize) -> Result<Var> {
        let va = self.value(a);
        if i >= va.len() {
            return Err(Error::shape("pick", va.shape(), &[i]));
        }
        let t = Tensor::scalar(va.data()[i]);
        let rg = self.rg(a);
        Ok(self.push(t, Op::Pick(a, i), rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let t = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(t, Op::Sum(a), rg)
    }

    /// Sums a list of scalars (or same-shape tensors).
    pub fn add_all(&mut self, xs: &[Var]) -> Result<Var> {
        let (&first, rest) = xs
            .split_first()
            .ok_or_else(|| Error::invalid("add_all of empty list"))?;
        rest.iter().try_fold(first, |acc, &x| self.add(acc, x))
    }

    /// Concatenates vectors end to end.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::invalid("concat of empty list"));
        }
        let mut out = Vec::new();
        for &p in parts {
            self.vec_len("concat", p)?;
            out.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Tensor::vector(out)?, Op::Concat(parts.to_vec()), rg))
    }

    /// `a[start..start + len]` of a vector.
    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let n = self.vec_len("slice", a)?;
        if len == 0 || start + len > n {
            return Err(Error::shape("slice", &[n], &[start, len]));
        }
        let out = self.value(a).data()[start..start + len].to_vec();
        let rg = self.rg(a);
        Ok(self.push(Tensor::vector(out)?, Op::Slice(a, start), rg))
    }

    /// Row `i` of a matrix as a vector (embedding lookup).
    pub fn row(&mut self, m: Var, i: usize) -> Result<Var> {
        let (r, _) = self.mat("row", m)?;
        if i >= r {
            return Err(Error::UnknownToken(i));
        }
        let out = self.value(m).row(i).to_vec();
        let rg = self.rg(m);
        Ok(self.push(Tensor::vector(out)?, Op::Row(m, i), rg))
    }

    /// Stacks equal-length vectors as the rows of a matrix.
    pub fn stack(&mut self, rows: &[Var]) -> Result<Var> {
        let first = *rows
            .first()
            .ok_or_else(|| Error::invalid("stack of empty list"))?;
        let c = self.vec_len("stack", first)?;
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            if self.vec_len("stack", r)? != c {
                return Err(Error::shape("stack", &[c], self.value(r).shape()));
            }
            out.extend_from_slice(self.value(r).data());
        }
        let rg = rows.iter().any(|&r| self.rg(r));
        Ok(self.push(
            Tensor::matrix(rows.len(), c, out)?,
            Op::Stack(rows.to_vec()),
            rg,
        ))
    }

    /// `gain · direction / ‖direction‖₂` with `gain` a scalar.
    pub fn weight_norm(&mut self, direction: Var, gain: Var) -> Result<Var> {
        let g = self.value(gain);
        if !g.is_scalar() {
            return Err(Error::shape(
                "weight_norm",
                self.value(direction).shape(),
                g.shape(),
            ));
        }
        let g = g.item();
        let d = self.value(direction);
        let norm = d.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Numeric(
                "weight_norm: direction has zero norm".into(),
            ));
        }
        let data = d.data().iter().map(|x| g * x / norm).collect();
        let t = Tensor::new(d.shape().to_vec(), data)?;
        let rg = self.rg(direction) || self.rg(gain);
        Ok(self.push(t, Op::WeightNorm(direction, gain), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.value(loss).is_scalar() {
            return Err(Error::invalid(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = self.nodes.len();
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; n];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.requires_grad {
                grads[idx] = Some(g);
                continue;
            }
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }

        for (i, node) in self.nodes.iter().enumerate() {
            if !node.requires_grad {
                grads[i] = None;
            }
        }
        Ok(Gradients {
            grads,
            shapes: self
                .nodes
                .iter()
                .map(|n| n.value.shape().to_vec())
                .collect(),
        })
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let val = |v: Var| self.nodes[v.0].value.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).dims2().unwrap().1;
                if self.rg(*a) {
                    // dA = dC · Bᵀ
                    let bd = val(*b);
                    let ga = acc(grads, *a, m * k);
                    for i in 0..m {
                        for p in 0..k {
                            ga[i * k + p] += dot(&g[i * n..(i + 1) * n], &bd[p * n..(p + 1) * n]);
                        }
                    }
                }
                if self.rg(*b) {
                    // dB = Aᵀ · dC
                    let ad = val(*a);
                    let gb = acc(grads, *b, k * n);
                    for i in 0..m {
                        for p in 0..k {
                            let aip = ad[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                gb[p * n + j] += aip * g[i * n + j];
                            }
                        }
                    }
                }
            }
            Op::MatMulNt(a, b) => {
                let (m, k) = self.value(*a).dims2().unwrap();
                let n = self.value(*b).dims2().unwrap().0;
                if self.rg(*a) {
                    let bd = val(*b);
                    let ga = acc(grads, *a, m * k);
                    gemm(g, bd, m, n, k, ga);
                }
                if self.rg(*b) {
                    let ad = val(*a);
                    let gb = acc(grads, *b, n * k);
                    for i in 0..m {
                        for j in 0..n {
                            let gij = g[i * n + j];
                            if gij == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                gb[j * k + p] += gij * ad[i * k + p];
                            }
                        }
                    }
                }
            }
            Op::MatVec(m, x) => {
                let (r, c) = self.value(*m).dims2().unwrap();
                if self.rg(*m) {
                    let xd = val(*x);
                    let gm = acc(grads, *m, r * c);
                    for i in 0..r {
                        if g[i] == 0.0 {
                            continue;
                        }
                        for (o, xv) in gm[i * c..(i + 1) * c].iter_mut().zip(xd) {
                            *o += g[i] * xv;
                        }
                    }
                }
                if self.rg(*x) {
                    let md = val(*m);
                    let gx = acc(grads, *x, c);
                    gemm(g, md, 1, r, c, gx);
                }
            }
            Op::VecMat(x, m) => {
                let (r, c) = self.value(*m).dims2().unwrap();
                if self.rg(*m) {
                    let xd = val(*x);
                    let gm = acc(grads, *m, r * c);
                    for i in 0..r {
                        if xd[i] == 0.0 {
                            continue;
                        }
                        for (o, gv) in gm[i * c..(i + 1) * c].iter_mut().zip(g) {
                            *o += xd[i] * gv;
                        }
                    }
                }
                if self.rg(*x) {
                    let md = val(*m);
                    let gx = acc(grads, *x, r);
                    for i in 0..r {
                        gx[i] += dot(&md[i * c..(i + 1) * c], g);
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [a, b] {
                    if self.rg(*v) {
                        add_into(acc(grads, *v, g.len()), g);
                    }
                }
            }
            Op::AddRow(m, v) => {
                let (r, c) = self.value(*m).dims2().unwrap();
                if self.rg(*m) {
                    add_into(acc(grads, *m, r * c), g);
                }
                if self.rg(*v) {
                    let gv = acc(grads, *v, c);
                    for i in 0..r {
                        add_into(gv, &g[i * c..(i + 1) * c]);
                    }
                }
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    let bd = val(*b);
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), bi) in ga.iter_mut().zip(g).zip(bd) {
                        *o += gi * bi;
                    }
                }
                if self.rg(*b) {
                    let ad = val(*a);
                    let gb = acc(grads, *b, g.len());
                    for ((o, gi), ai) in gb.iter_mut().zip(g).zip(ad) {
                        *o += gi * ai;
                    }
                }
            }
            Op::MulConst(a, f) => {
                if self.rg(*a) {
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), fi) in ga.iter_mut().zip(g).zip(f) {
                        *o += gi * fi;
                    }
                }
            }
            Op::Scale(a, s) => {
                if self.rg(*a) {
                    let ga = acc(grads, *a, g.len());
                    for (o, gi) in ga.iter_mut().zip(g) {
                        *o += gi * s;
                    }
                }
            }
            Op::Tanh(a) => {
                if self.rg(*a) {
                    let y = node.value.data();
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * (1.0 - yi * yi);
                    }
                }
            }
            Op::Sigmoid(a) => {
                if self.rg(*a) {
                    let y = node.value.data();
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += gi * yi * (1.0 - yi);
                    }
                }
            }
            Op::Softmax(a) => {
                if self.rg(*a) {
                    let y = node.value.data();
                    let inner = dot(g, y);
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        *o += yi * (gi - inner);
                    }
                }
            }
            Op::LogSoftmax(a) => {
                if self.rg(*a) {
                    let y = node.value.data();
                    // Masked entries are -inf and carry no gradient.
                    let total: f64 = g
                        .iter()
                        .zip(y)
                        .filter(|(_, yi)| yi.is_finite())
                        .map(|(gi, _)| gi)
                        .sum();
                    let ga = acc(grads, *a, g.len());
                    for ((o, gi), yi) in ga.iter_mut().zip(g).zip(y) {
                        if yi.is_finite() {
                            *o += gi - yi.exp() * total;
                        }
                    }
                }
            }
            Op::Pick(a, i) => {
                if self.rg(*a) {
                    let n = self.value(*a).len();
                    acc(grads, *a, n)[*i] += g[0];
                }
            }
            Op::Sum(a) => {
                if self.rg(*a) {
                    let n = self.value(*a).len();
                    acc(grads, *a, n).iter_mut().for_each(|o| *o += g[0]);
                }
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    if self.rg(*p) {
                        add_into(acc(grads, *p, n), &g[off..off + n]);
                    }
                    off += n;
                }
            }
            Op::Slice(a, start) => {
                if self.rg(*a) {
                    let n = self.value(*a).len();
                    let ga = acc(grads, *a, n);
                    add_into(&mut ga[*start..*start + g.len()], g);
                }
            }
            Op::Row(m, i) => {
                if self.rg(*m) {
                    let n = self.value(*m).len();
                    let c = g.len();
                    let gm = acc(grads, *m, n);
                    add_into(&mut gm[i * c..(i + 1) * c], g);
                }
            }
            Op::Stack(rows) => {
                let c = node.value.dims2().unwrap().1;
                for (i, r) in rows.iter().enumerate() {
                    if self.rg(*r) {
                        add_into(acc(grads, *r, c), &g[i * c..(i + 1) * c]);
                    }
                }
            }
            Op::WeightNorm(d, gain) => {
                let dd = val(*d);
                let gv = self.value(*gain).item();
                let norm = dd.iter().map(|x| x * x).sum::<f64>().sqrt();
                // unit direction u = d/‖d‖; w = g·u
                let ug: f64 = dd.iter().zip(g).map(|(x, gi)| x / norm * gi).sum();
                if self.rg(*gain) {
                    acc(grads, *gain, 1)[0] += ug;
                }
                if self.rg(*d) {
                    let gd = acc(grads, *d, dd.len());
                    for ((o, gi), x) in gd.iter_mut().zip(g).zip(dd) {
                        *o += gv / norm * (gi - x / norm * ug);
                    }
                }
            }
        }
    }
}

fn check_mask(op: &'static str, n: usize, mask: Option<&[bool]>) -> Result<()> {
    match mask {
        Some(m) if m.len() != n => Err(Error::shape(op, &[n], &[m.len()])),
        _ => Ok(()),
    }
}

fn acc(grads: &mut [Option<Vec<f64>>], v: Var, n: usize) -> &mut Vec<f64> {
    grads[v.0].get_or_insert_with(|| vec![0.0; n])
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    for (d, s) in dst.iter_mut().zip(src) {
        *d += s;
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
