//! Exact gradients of the squared recovery loss with respect to the shared
//! weight vector of OMP-Net and IHT-Net.

mod tape;

pub use tape::{ls_solve_backward, modulus_backward, NodeId, Op, Tape, TapeNode, Value};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::scalar::Scalar;
use crate::solvers::{solve, SolverConfig, SolverKind};
use crate::sortops::{argmax, argsort_desc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetFamily {
    Omp,
    Iht,
}

impl NetFamily {
    pub fn soft_solver(self) -> SolverKind {
        match self {
            NetFamily::Omp => SolverKind::SoftOmp,
            NetFamily::Iht => SolverKind::SoftIht,
        }
    }
}

/// An unrolled Soft-OMP or Soft-IHT with one weight vector shared by all layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetSpec {
    pub family: NetFamily,
    pub layers: usize,
    pub tau: f64,
    /// Step size (IHT-Net).
    pub eta: f64,
    /// Thresholding level (IHT-Net); OMP-Net selects one index per layer.
    pub k: usize,
}

impl NetSpec {
    pub fn omp(layers: usize, tau: f64) -> Self {
        Self {
            family: NetFamily::Omp,
            layers,
            tau,
            eta: 1.0,
            k: layers,
        }
    }

    pub fn iht(layers: usize, k: usize, eta: f64, tau: f64) -> Self {
        Self {
            family: NetFamily::Iht,
            layers,
            tau,
            eta,
            k,
        }
    }

    /// The equivalent soft solver configuration.
    pub fn solver_config(&self, w: &[f64]) -> SolverConfig {
        let base = match self.family {
            NetFamily::Omp => SolverConfig::omp(self.layers),
            NetFamily::Iht => SolverConfig::iht(self.k, self.eta, self.layers),
        };
        base.with_tau(self.tau).with_weights(w.to_vec())
    }

    fn validate(&self, n: usize, w: &[f64]) -> Result<()> {
        if self.layers == 0 {
            return Err(Error::InvalidArgument("a network needs at least one layer".into()));
        }
        if w.len() != n {
            return Err(Error::InvalidArgument(format!("{} weights for {n} columns", w.len())));
        }
        if w.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidArgument("weights must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientResult {
    pub loss: f64,
    pub grad_w: Vec<f64>,
    /// Norm of each layer's contribution to `grad_w`.
    pub layer_grad_norms: Vec<f64>,
    /// Softmax rows whose largest entry is exactly 1 (no gradient flows).
    pub saturated_rows: usize,
    pub total_rows: usize,
}

/// Network output through the untaped solver (bitwise equal to the tape).
pub fn net_output<T: Scalar>(
    net: &NetSpec,
    w: &[f64],
    a: &DenseMatrix<T>,
    y: &[T],
) -> Result<Vec<T>> {
    net.validate(a.cols(), w)?;
    let trace = solve(net.family.soft_solver(), a, y, &net.solver_config(w))?;
    Ok(trace.output().to_vec())
}

struct Recorded {
    w: NodeId,
    iterates: Vec<NodeId>,
    scales: Vec<(NodeId, NodeId)>,
    rows: Vec<NodeId>,
}

fn record<T: Scalar>(tape: &mut Tape<'_, T>, net: &NetSpec, w: &[f64], n: usize) -> Result<Recorded> {
    let w_id = tape.input_real(w.to_vec())?;
    let mut x = tape.input_field(vec![T::zero(); n])?;
    let mut rec = Recorded {
        w: w_id,
        iterates: vec![x],
        scales: Vec::new(),
        rows: Vec::new(),
    };
    let mut b_nodes = Vec::new();
    let mut p_nodes = Vec::new();
    for layer in 1..=net.layers {
        tape.set_layer(layer);
        let r = tape.residual(x)?;
        let c = tape.adjoint(r)?;
        match net.family {
            NetFamily::Omp => {
                let a_node = tape.modulus(c)?;
                let v = tape.weighted_scale(w_id, a_node)?;
                rec.scales.push((a_node, v));
                let pivot = argmax(tape.value(v).real());
                let p = tape.softmax_row(v, pivot, net.tau)?;
                rec.rows.push(p);
                let b = tape.forward(p)?;
                b_nodes.push(b);
                p_nodes.push(p);
                let z = tape.ls_solve(b_nodes.clone())?;
                x = tape.combine(z, p_nodes.clone())?;
            }
            NetFamily::Iht => {
                let u = tape.axpy(x, c, net.eta)?;
                let a_node = tape.modulus(u)?;
                let v = tape.weighted_scale(w_id, a_node)?;
                rec.scales.push((a_node, v));
                let order = argsort_desc(tape.value(v).real()).order;
                let mut rows = Vec::with_capacity(net.k);
                for &pivot in &order[..net.k] {
                    rows.push(tape.softmax_row(v, pivot, net.tau)?);
                }
                rec.rows.extend(&rows);
                let q = tape.sum_rows(rows)?;
                x = tape.hadamard(q, u)?;
            }
        }
        rec.iterates.push(x);
    }
    tape.set_layer(0);
    Ok(rec)
}

/// Per-layer outputs `x^(0), ..., x^(L)` computed on the tape.
pub fn taped_iterates<T: Scalar>(
    net: &NetSpec,
    w: &[f64],
    a: &DenseMatrix<T>,
    y: &[T],
) -> Result<Vec<Vec<T>>> {
    net.validate(a.cols(), w)?;
    if net.family == NetFamily::Iht && (net.k == 0 || net.k > a.cols()) {
        return Err(Error::InvalidArgument(format!("k = {} outside [1, {}]", net.k, a.cols())));
    }
    let mut tape = Tape::new(a, y);
    let rec = record(&mut tape, net, w, a.cols())?;
    Ok(rec
        .iterates
        .iter()
        .map(|&id| tape.value(id).field().to_vec())
        .collect())
}

/// Loss `||NN_w(y) - x_true||^2` and its exact gradient in `w`.
pub fn forward_backward<T: Scalar>(
    net: &NetSpec,
    w: &[f64],
    a: &DenseMatrix<T>,
    y: &[T],
    x_true: &[T],
) -> Result<GradientResult> {
    net.validate(a.cols(), w)?;
    if net.family == NetFamily::Iht && (net.k == 0 || net.k > a.cols()) {
        return Err(Error::InvalidArgument(format!("k = {} outside [1, {}]", net.k, a.cols())));
    }
    if x_true.len() != a.cols() || y.len() != a.rows() {
        return Err(Error::DimensionMismatch {
            op: "forward_backward",
            left: a.shape(),
            right: (y.len(), x_true.len()),
        });
    }
    let mut tape = Tape::new(a, y);
    let rec = record(&mut tape, net, w, a.cols())?;
    let out = *rec.iterates.last().expect("at least one layer");
    let loss_id = tape.squared_error(out, x_true.to_vec())?;
    let bar = tape.backward(loss_id)?;

    let layer_grad_norms = rec
        .scales
        .iter()
        .map(|&(a_node, v)| {
            let av = tape.value(a_node).real();
            av.iter()
                .zip(bar[v].real())
                .map(|(x, g)| (x * g) * (x * g))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    let saturated_rows = rec
        .rows
        .iter()
        .filter(|&&p| tape.value(p).real().iter().any(|&e| e == 1.0))
        .count();
    Ok(GradientResult {
        loss: tape.value(loss_id).real()[0],
        grad_w: bar[rec.w].real().to_vec(),
        layer_grad_norms,
        saturated_rows,
        total_rows: rec.rows.len(),
    })
}
