//! Conjugate gradients for symmetric positive (semi-)definite systems
//! given only by their matrix-vector product.

use crate::error::{Error, Result};
use crate::operators::dot;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub iterations: usize,
    /// `‖b − A x‖` before the first step and after every step.
    pub residual_norms: Vec<f64>,
    pub converged: bool,
}

/// Solves `A x = b` starting from the contents of `x`.
///
/// Stops once `‖b − A x‖ ≤ tol · ‖b‖` or after `max_iter` steps.
pub fn conjugate_gradient<F>(
    mut apply: F,
    rhs: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome>
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = rhs.len();
    Error::check_len(n, x.len())?;
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rs = dot(&r, &r);
    let target = tol * dot(rhs, rhs).sqrt();
    let mut norms = vec![rs.sqrt()];
    if !rs.is_finite() {
        return Err(Error::numerical("non-finite initial residual in CG", None));
    }
    if rs.sqrt() <= target || rs == 0.0 {
        return Ok(CgOutcome {
            iterations: 0,
            residual_norms: norms,
            converged: true,
        });
    }
    let mut ap = vec![0.0; n];
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap.is_finite()) {
            return Err(Error::numerical("non-finite curvature in CG", None));
        }
        if pap <= 0.0 {
            // direction in the null space: nothing left to reduce
            return Ok(CgOutcome {
                iterations: it - 1,
                residual_norms: norms,
                converged: false,
            });
        }
        let step = rs / pap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rs_new = dot(&r, &r);
        if !rs_new.is_finite() {
            return Err(Error::numerical("non-finite residual in CG", None));
        }
        norms.push(rs_new.sqrt());
        if rs_new.sqrt() <= target {
            return Ok(CgOutcome {
                iterations: it,
                residual_norms: norms,
                converged: true,
            });
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
    }
    Ok(CgOutcome {
        iterations: max_iter,
        residual_norms: norms,
        converged: false,
    })
}
