//! The derivative operators `D⁽ᵐ⁾` and `D⁽ᵐ⁾C` shared by both solvers.

use crate::error::Result;
use crate::image::Dims;
use crate::operators::{Coupling, Gradient, LinearMap};

#[derive(Debug, Clone)]
pub struct RegularizerOps {
    dims: Dims,
    grads: Vec<Gradient>,
    coupling: Coupling,
}

impl RegularizerOps {
    pub fn new(dims: Dims, orders: usize) -> Result<Self> {
        let grads = (1..=orders)
            .map(|m| Gradient::new(dims, m))
            .collect::<Result<Vec<_>>>()?;
        Ok(RegularizerOps {
            dims,
            grads,
            coupling: Coupling::new(dims.pixels()),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn orders(&self) -> usize {
        self.grads.len()
    }

    /// Output length of `D⁽ᵐ⁾` (1-based order index `m`).
    pub fn len(&self, order_idx: usize) -> usize {
        self.grads[order_idx].output_len()
    }

    pub fn coupling(&self) -> &Coupling {
        &self.coupling
    }

    /// `D⁽ᵐ⁾u`, `order_idx` counted from zero.
    pub fn grad(&self, order_idx: usize, u: &[f64]) -> Vec<f64> {
        self.grads[order_idx].apply(u)
    }

    pub fn grad_adj(&self, order_idx: usize, y: &[f64]) -> Vec<f64> {
        self.grads[order_idx].apply_adjoint(y)
    }

    /// `D⁽ᵐ⁾Cu`.
    pub fn grad_coupled(&self, order_idx: usize, u: &[f64]) -> Vec<f64> {
        self.grads[order_idx].apply(&self.coupling.apply(u))
    }

    /// `(D⁽ᵐ⁾C)ᵀy = CᵀD⁽ᵐ⁾ᵀy`.
    pub fn grad_coupled_adj(&self, order_idx: usize, y: &[f64]) -> Vec<f64> {
        self.coupling.apply_adjoint(&self.grads[order_idx].apply_adjoint(y))
    }
}

pub(crate) fn axpy(acc: &mut [f64], scale: f64, x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, v)| *a += scale * v);
}

pub(crate) fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub(crate) fn diff_norm_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `‖uᵏ − uᵏ⁺¹‖² / ‖uᵏ⁺¹‖²`.
pub(crate) fn relative_step(prev: &[f64], next: &[f64]) -> f64 {
    let denom = norm_sq(next);
    let num = diff_norm_sq(prev, next);
    if denom > 0.0 {
        num / denom
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}
