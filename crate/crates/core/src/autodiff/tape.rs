//! Reverse-mode tape over the closed op set of the unrolled networks.
//!
//! Complex cotangents follow `dL/dRe + i dL/dIm`, so a complex-linear map
//! `o = M x` pulls back as `x_bar = M^H o_bar`.

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, QrFactor};
use crate::scalar::{moduli, Scalar};
use crate::solvers::kernels::{combine, gradient_step, hadamard, residual, weighted};
use crate::sortops::{softmax_row, sum_rows};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq)]
pub enum Value<T> {
    Real(Vec<f64>),
    Field(Vec<T>),
}

impl<T: Scalar> Value<T> {
    pub fn real(&self) -> &[f64] {
        match self {
            Value::Real(v) => v,
            Value::Field(_) => panic!("expected a real node"),
        }
    }

    pub fn field(&self) -> &[T] {
        match self {
            Value::Field(v) => v,
            Value::Real(_) => panic!("expected a field node"),
        }
    }

    fn zeros_like(&self) -> Self {
        match self {
            Value::Real(v) => Value::Real(vec![0.0; v.len()]),
            Value::Field(v) => Value::Field(vec![T::zero(); v.len()]),
        }
    }

    fn is_finite(&self) -> bool {
        match self {
            Value::Real(v) => v.iter().all(|x| x.is_finite()),
            Value::Field(v) => v.iter().all(|x| x.is_finite()),
        }
    }

    fn real_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Value::Real(v) => v,
            Value::Field(_) => panic!("expected a real node"),
        }
    }

    fn field_mut(&mut self) -> &mut Vec<T> {
        match self {
            Value::Field(v) => v,
            Value::Real(_) => panic!("expected a field node"),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Op<T> {
    Input,
    /// `r = y - A x`
    Residual { x: NodeId },
    /// `c = A* r`
    Adjoint { r: NodeId },
    /// `u = x + eta c`
    Axpy { x: NodeId, c: NodeId, eta: f64 },
    /// `a = |z|`
    Modulus { z: NodeId },
    /// `v = w ⊙ a`
    WeightedScale { w: NodeId, a: NodeId },
    /// `p = softmax(-|v_pivot - v| / tau)`
    SoftmaxRow { v: NodeId, pivot: usize, tau: f64 },
    /// `b = A p` with real `p`
    Forward { p: NodeId },
    /// `z = argmin ||[b_1 .. b_l] z - y||`
    LsSolve { bs: Vec<NodeId>, qr: Box<QrFactor<T>> },
    /// `x = sum_i z_i p_i`
    Combine { z: NodeId, ps: Vec<NodeId> },
    /// `q = sum_i p_i`
    SumRows { rows: Vec<NodeId> },
    /// `x = q ⊙ u`
    Hadamard { q: NodeId, u: NodeId },
    /// `||x - target||^2`
    SquaredError { x: NodeId, target: Vec<T> },
}

impl<T> Op<T> {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Input => "input",
            Op::Residual { .. } => "residual",
            Op::Adjoint { .. } => "adjoint",
            Op::Axpy { .. } => "axpy",
            Op::Modulus { .. } => "modulus",
            Op::WeightedScale { .. } => "weighted-scale",
            Op::SoftmaxRow { .. } => "softmax-row",
            Op::Forward { .. } => "matvec",
            Op::LsSolve { .. } => "ls-solve",
            Op::Combine { .. } => "combine",
            Op::SumRows { .. } => "sum-rows",
            Op::Hadamard { .. } => "hadamard",
            Op::SquaredError { .. } => "squared-error",
        }
    }
}

#[derive(Clone, Debug)]
pub struct TapeNode<T> {
    pub op: Op<T>,
    pub value: Value<T>,
    /// Network layer (1-based); 0 for inputs and the loss.
    pub layer: usize,
}

/// A DAG recorded in evaluation order over a fixed matrix and measurement.
pub struct Tape<'a, T> {
    a: &'a DenseMatrix<T>,
    y: &'a [T],
    nodes: Vec<TapeNode<T>>,
    layer: usize,
}

impl<'a, T: Scalar> Tape<'a, T> {
    pub fn new(a: &'a DenseMatrix<T>, y: &'a [T]) -> Self {
        Self {
            a,
            y,
            nodes: Vec::new(),
            layer: 0,
        }
    }

    pub fn set_layer(&mut self, layer: usize) {
        self.layer = layer;
    }

    pub fn nodes(&self) -> &[TapeNode<T>] {
        &self.nodes
    }

    pub fn value(&self, id: NodeId) -> &Value<T> {
        &self.nodes[id].value
    }

    fn push(&mut self, op: Op<T>, value: Value<T>) -> Result<NodeId> {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                layer: self.layer,
                op: op.name(),
                phase: "forward",
            });
        }
        self.nodes.push(TapeNode {
            op,
            value,
            layer: self.layer,
        });
        Ok(self.nodes.len() - 1)
    }

    pub fn input_real(&mut self, v: Vec<f64>) -> Result<NodeId> {
        self.push(Op::Input, Value::Real(v))
    }

    pub fn input_field(&mut self, v: Vec<T>) -> Result<NodeId> {
        self.push(Op::Input, Value::Field(v))
    }

    pub fn residual(&mut self, x: NodeId) -> Result<NodeId> {
        let r = residual(self.a, self.y, self.value(x).field());
        self.push(Op::Residual { x }, Value::Field(r))
    }

    pub fn adjoint(&mut self, r: NodeId) -> Result<NodeId> {
        let c = self.a.adjoint_matvec_unchecked(self.value(r).field());
        self.push(Op::Adjoint { r }, Value::Field(c))
    }

    pub fn axpy(&mut self, x: NodeId, c: NodeId, eta: f64) -> Result<NodeId> {
        let u = gradient_step(self.value(x).field(), self.value(c).field(), eta);
        self.push(Op::Axpy { x, c, eta }, Value::Field(u))
    }

    pub fn modulus(&mut self, z: NodeId) -> Result<NodeId> {
        let a = moduli(self.value(z).field());
        self.push(Op::Modulus { z }, Value::Real(a))
    }

    pub fn weighted_scale(&mut self, w: NodeId, a: NodeId) -> Result<NodeId> {
        let v = weighted(self.value(a).real(), Some(self.value(w).real()));
        self.push(Op::WeightedScale { w, a }, Value::Real(v))
    }

    pub fn softmax_row(&mut self, v: NodeId, pivot: usize, tau: f64) -> Result<NodeId> {
        let vv = self.value(v).real();
        let p = softmax_row(vv, vv[pivot], tau);
        self.push(Op::SoftmaxRow { v, pivot, tau }, Value::Real(p))
    }

    pub fn forward(&mut self, p: NodeId) -> Result<NodeId> {
        let b = self.a.matvec_real_unchecked(self.value(p).real());
        self.push(Op::Forward { p }, Value::Field(b))
    }

    pub fn ls_solve(&mut self, bs: Vec<NodeId>) -> Result<NodeId> {
        let cols: Vec<Vec<T>> = bs.iter().map(|&b| self.value(b).field().to_vec()).collect();
        let qr = QrFactor::new(&DenseMatrix::from_columns(&cols)?)?;
        let z = qr.solve(self.y)?;
        self.push(
            Op::LsSolve {
                bs,
                qr: Box::new(qr),
            },
            Value::Field(z),
        )
    }

    pub fn combine(&mut self, z: NodeId, ps: Vec<NodeId>) -> Result<NodeId> {
        let rows: Vec<Vec<f64>> = ps.iter().map(|&p| self.value(p).real().to_vec()).collect();
        let x = combine(self.value(z).field(), &rows, self.a.cols());
        self.push(Op::Combine { z, ps }, Value::Field(x))
    }

    pub fn sum_rows(&mut self, rows: Vec<NodeId>) -> Result<NodeId> {
        let vals: Vec<Vec<f64>> = rows.iter().map(|&p| self.value(p).real().to_vec()).collect();
        let q = sum_rows(&vals);
        self.push(Op::SumRows { rows }, Value::Real(q))
    }

    pub fn hadamard(&mut self, q: NodeId, u: NodeId) -> Result<NodeId> {
        let x = hadamard(self.value(q).real(), self.value(u).field());
        self.push(Op::Hadamard { q, u }, Value::Field(x))
    }

    pub fn squared_error(&mut self, x: NodeId, target: Vec<T>) -> Result<NodeId> {
        let loss: f64 = self
            .value(x)
            .field()
            .iter()
            .zip(&target)
            .map(|(&xi, &ti)| (xi - ti).modulus_sq())
            .sum();
        self.push(Op::SquaredError { x, target }, Value::Real(vec![loss]))
    }

    /// Cotangents of every node with respect to the scalar node `loss`.
    pub fn backward(&self, loss: NodeId) -> Result<Vec<Value<T>>> {
        let mut bar: Vec<Value<T>> = self.nodes[..=loss]
            .iter()
            .map(|n| n.value.zeros_like())
            .collect();
        bar[loss] = Value::Real(vec![1.0]);
        for id in (0..=loss).rev() {
            let node = &self.nodes[id];
            if !bar[id].is_finite() {
                return Err(Error::NonFinite {
                    layer: node.layer,
                    op: node.op.name(),
                    phase: "backward",
                });
            }
            let out = std::mem::replace(&mut bar[id], Value::Real(Vec::new()));
            self.pull_back(node, &out, &mut bar)?;
            bar[id] = out;
        }
        Ok(bar)
    }

    fn pull_back(&self, node: &TapeNode<T>, out: &Value<T>, bar: &mut [Value<T>]) -> Result<()> {
        let a = self.a;
        match &node.op {
            Op::Input => {}
            Op::Residual { x } => {
                let g = a.adjoint_matvec_unchecked(out.field());
                for (xb, gi) in bar[*x].field_mut().iter_mut().zip(g) {
                    *xb -= gi;
                }
            }
            Op::Adjoint { r } => {
                let g = a.matvec_unchecked(out.field());
                add_field(bar[*r].field_mut(), &g);
            }
            Op::Axpy { x, c, eta } => {
                let ub = out.field();
                add_field(bar[*x].field_mut(), ub);
                for (cb, &u) in bar[*c].field_mut().iter_mut().zip(ub) {
                    *cb += u.scale(*eta);
                }
            }
            Op::Modulus { z } => {
                let zs = self.value(*z).field().to_vec();
                for ((zb, &zi), &ab) in bar[*z].field_mut().iter_mut().zip(&zs).zip(out.real()) {
                    *zb += modulus_backward(zi, ab);
                }
            }
            Op::WeightedScale { w, a: an } => {
                let vb = out.real();
                let av = self.value(*an).real();
                let wv = self.value(*w).real();
                for ((wb, &ai), &g) in bar[*w].real_mut().iter_mut().zip(av).zip(vb) {
                    *wb += ai * g;
                }
                for ((ab, &wi), &g) in bar[*an].real_mut().iter_mut().zip(wv).zip(vb) {
                    *ab += wi * g;
                }
            }
            Op::SoftmaxRow { v, pivot, tau } => {
                let p = node.value.real();
                let pb = out.real();
                let inner: f64 = p.iter().zip(pb).map(|(x, y)| x * y).sum();
                let vv = self.value(*v).real();
                let piv = vv[*pivot];
                let vb = bar[*v].real_mut();
                let mut to_pivot = 0.0;
                for j in 0..p.len() {
                    let zb = p[j] * (pb[j] - inner);
                    let d = piv - vv[j];
                    let db = if d > 0.0 {
                        -zb / tau
                    } else if d < 0.0 {
                        zb / tau
                    } else {
                        0.0
                    };
                    to_pivot += db;
                    vb[j] -= db;
                }
                vb[*pivot] += to_pivot;
            }
            Op::Forward { p } => {
                let g = a.adjoint_matvec_unchecked(out.field());
                for (pb, gi) in bar[*p].real_mut().iter_mut().zip(g) {
                    *pb += gi.re();
                }
            }
            Op::LsSolve { bs, qr } => {
                let z = node.value.field();
                let cols: Vec<&[T]> = bs.iter().map(|&b| self.value(b).field()).collect();
                let (bbar, _) = ls_backward_parts(&cols, qr, self.y, z, out.field());
                for (&b, g) in bs.iter().zip(bbar) {
                    add_field(bar[b].field_mut(), &g);
                }
            }
            Op::Combine { z, ps } => {
                let xb = out.field();
                let zv = self.value(*z).field().to_vec();
                for (i, &p) in ps.iter().enumerate() {
                    let pv = self.value(p).real();
                    let mut acc = T::zero();
                    for (&pj, &xj) in pv.iter().zip(xb) {
                        acc += xj.scale(pj);
                    }
                    bar[*z].field_mut()[i] += acc;
                    let zc = zv[i].conj();
                    for (pb, &xj) in bar[p].real_mut().iter_mut().zip(xb) {
                        *pb += (zc * xj).re();
                    }
                }
            }
            Op::SumRows { rows } => {
                for &r in rows {
                    for (rb, &g) in bar[r].real_mut().iter_mut().zip(out.real()) {
                        *rb += g;
                    }
                }
            }
            Op::Hadamard { q, u } => {
                let xb = out.field();
                let qv = self.value(*q).real().to_vec();
                let uv = self.value(*u).field().to_vec();
                for ((ub, &qi), &g) in bar[*u].field_mut().iter_mut().zip(&qv).zip(xb) {
                    *ub += g.scale(qi);
                }
                for ((qb, &ui), &g) in bar[*q].real_mut().iter_mut().zip(&uv).zip(xb) {
                    *qb += (ui.conj() * g).re();
                }
            }
            Op::SquaredError { x, target } => {
                let lb = out.real()[0];
                let xv = self.value(*x).field().to_vec();
                for ((xb, &xi), &ti) in bar[*x].field_mut().iter_mut().zip(&xv).zip(target) {
                    *xb += (xi - ti).scale(2.0 * lb);
                }
            }
        }
        Ok(())
    }
}

fn add_field<T: Scalar>(acc: &mut [T], g: &[T]) {
    for (a, &b) in acc.iter_mut().zip(g) {
        *a += b;
    }
}

/// Cotangents `(B_bar columns, y_bar)` of `z = argmin ||B z - y||`.
fn ls_backward_parts<T: Scalar>(
    cols: &[&[T]],
    qr: &QrFactor<T>,
    y: &[T],
    z: &[T],
    z_bar: &[T],
) -> (Vec<Vec<T>>, Vec<T>) {
    let m = y.len();
    let s = qr.solve_normal(z_bar);
    let mut bz = vec![T::zero(); m];
    let mut bs = vec![T::zero(); m];
    for (col, (&zi, &si)) in cols.iter().zip(z.iter().zip(&s)) {
        for i in 0..m {
            bz[i] += col[i] * zi;
            bs[i] += col[i] * si;
        }
    }
    let r: Vec<T> = y.iter().zip(&bz).map(|(&yi, &bi)| yi - bi).collect();
    let bbar = z
        .iter()
        .zip(&s)
        .map(|(&zi, &si)| {
            let (sc, zc) = (si.conj(), zi.conj());
            (0..m).map(|i| r[i] * sc - bs[i] * zc).collect()
        })
        .collect();
    (bbar, bs)
}

/// Reverse rule of the least-squares solve `z = argmin ||B z - y||`.
/// Returns the cotangents of `B` and `y` given the cotangent of `z`.
pub fn ls_solve_backward<T: Scalar>(
    b: &DenseMatrix<T>,
    y: &[T],
    z: &[T],
    upstream: &[T],
) -> Result<(DenseMatrix<T>, Vec<T>)> {
    if y.len() != b.rows() || z.len() != b.cols() || upstream.len() != b.cols() {
        return Err(Error::DimensionMismatch {
            op: "ls_solve_backward",
            left: b.shape(),
            right: (y.len(), z.len()),
        });
    }
    let qr = QrFactor::new(b)?;
    let cols: Vec<&[T]> = (0..b.cols()).map(|j| b.column(j)).collect();
    let (bbar, ybar) = ls_backward_parts(&cols, &qr, y, z, upstream);
    Ok((DenseMatrix::from_columns(&bbar)?, ybar))
}

/// Cotangent of `z` for `a = |z|`; the subgradient at zero is 0.
pub fn modulus_backward<T: Scalar>(z: T, upstream: f64) -> T {
    let m = z.modulus();
    if m == 0.0 {
        T::zero()
    } else {
        z.scale(upstream / m)
    }
}
