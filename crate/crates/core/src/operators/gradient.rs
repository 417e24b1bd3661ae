//! Forward finite differences with replicate (Neumann) boundaries.
//!
//! Order 1 produces `[Dx, Dy]` per channel, order 2 `[Dxx, Dxy, Dyx, Dyy]`,
//! with `Dxx = −DxᵀDx` (the centered three-point stencil), `Dxy = Dy Dx`
//! and `Dyx = Dx Dy`. Differences across the trailing row/column are zero,
//! so constants lie in the kernel of every block.

use crate::error::{Error, Result};
use crate::image::Dims;

use super::LinearMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Gradient {
    dims: Dims,
    order: usize,
}

impl Gradient {
    pub fn new(dims: Dims, order: usize) -> Result<Self> {
        if !(1..=2).contains(&order) {
            return Err(Error::UnsupportedOrder(order));
        }
        Ok(Gradient { dims, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Derivative planes per color channel.
    pub fn blocks(&self) -> usize {
        if self.order == 1 {
            2
        } else {
            4
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
}

fn dx(d: Dims, u: &[f64], out: &mut [f64]) {
    for r in 0..d.height {
        let row = &u[r * d.width..(r + 1) * d.width];
        let o = &mut out[r * d.width..(r + 1) * d.width];
        for c in 0..d.width - 1 {
            o[c] = row[c + 1] - row[c];
        }
        o[d.width - 1] = 0.0;
    }
}

fn dx_t(d: Dims, v: &[f64], out: &mut [f64]) {
    let w = d.width;
    for r in 0..d.height {
        let row = &v[r * w..(r + 1) * w];
        let o = &mut out[r * w..(r + 1) * w];
        for c in 0..w {
            let left = if c >= 1 { row[c - 1] } else { 0.0 };
            let here = if c + 1 < w { row[c] } else { 0.0 };
            o[c] = left - here;
        }
    }
}

fn dy(d: Dims, u: &[f64], out: &mut [f64]) {
    let w = d.width;
    for r in 0..d.height {
        for c in 0..w {
            let i = r * w + c;
            out[i] = if r + 1 < d.height { u[i + w] - u[i] } else { 0.0 };
        }
    }
}

fn dy_t(d: Dims, v: &[f64], out: &mut [f64]) {
    let w = d.width;
    for r in 0..d.height {
        for c in 0..w {
            let i = r * w + c;
            let up = if r >= 1 { v[i - w] } else { 0.0 };
            let here = if r + 1 < d.height { v[i] } else { 0.0 };
            out[i] = up - here;
        }
    }
}

impl Gradient {
    fn apply_plane(&self, u: &[f64], out: &mut [f64]) {
        let d = self.dims;
        let n = d.pixels();
        if self.order == 1 {
            let (gx, gy) = out.split_at_mut(n);
            dx(d, u, gx);
            dy(d, u, gy);
        } else {
            let mut tx = vec![0.0; n];
            let mut ty = vec![0.0; n];
            dx(d, u, &mut tx);
            dy(d, u, &mut ty);
            let (xx, rest) = out.split_at_mut(n);
            let (xy, rest) = rest.split_at_mut(n);
            let (yx, yy) = rest.split_at_mut(n);
            dx_t(d, &tx, xx);
            xx.iter_mut().for_each(|v| *v = -*v);
            dy(d, &tx, xy);
            dx(d, &ty, yx);
            dy_t(d, &ty, yy);
            yy.iter_mut().for_each(|v| *v = -*v);
        }
    }

    fn adjoint_plane(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dims;
        let n = d.pixels();
        let mut tmp = vec![0.0; n];
        if self.order == 1 {
            dx_t(d, &v[..n], out);
            dy_t(d, &v[n..], &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        } else {
            let mut acc_x = vec![0.0; n];
            let mut acc_y = vec![0.0; n];
            // Dxxᵀ = −DxᵀDx; Dxyᵀ = DxᵀDyᵀ; Dyxᵀ = DyᵀDxᵀ; Dyyᵀ = −DyᵀDy
            dx(d, &v[..n], &mut tmp);
            acc_x.iter_mut().zip(&tmp).for_each(|(a, t)| *a -= t);
            dy_t(d, &v[n..2 * n], &mut tmp);
            acc_x.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
            dx_t(d, &v[2 * n..3 * n], &mut tmp);
            acc_y.iter_mut().zip(&tmp).for_each(|(a, t)| *a += t);
            dy(d, &v[3 * n..], &mut tmp);
            acc_y.iter_mut().zip(&tmp).for_each(|(a, t)| *a -= t);
            dx_t(d, &acc_x, out);
            dy_t(d, &acc_y, &mut tmp);
            out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
        }
    }
}

impl LinearMap for Gradient {
    fn input_len(&self) -> usize {
        self.dims.field_len()
    }

    fn output_len(&self) -> usize {
        self.blocks() * self.dims.field_len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dims.pixels();
        let span = self.blocks() * n;
        for c in 0..3 {
            self.apply_plane(&x[c * n..(c + 1) * n], &mut out[c * span..(c + 1) * span]);
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        let n = self.dims.pixels();
        let span = self.blocks() * n;
        for c in 0..3 {
            self.adjoint_plane(&y[c * span..(c + 1) * span], &mut out[c * n..(c + 1) * n]);
        }
    }
}

/// `D⁽ᵐ⁾u` for a channel-stacked field.
pub fn grad_apply(u: &[f64], order: usize, width: usize, height: usize) -> Result<Vec<f64>> {
    let op = Gradient::new(Dims::new(width, height), order)?;
    Error::check_len(op.input_len(), u.len())?;
    Ok(op.apply(u))
}

/// `D⁽ᵐ⁾ᵀd`, the exact transpose of [`grad_apply`].
pub fn grad_adjoint(d: &[f64], order: usize, width: usize, height: usize) -> Result<Vec<f64>> {
    let op = Gradient::new(Dims::new(width, height), order)?;
    Error::check_len(op.output_len(), d.len())?;
    Ok(op.apply_adjoint(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::test_util::{random_vec, rng};
    use crate::operators::{adjoint_defect, dot};

    #[test]
    fn constant_field_has_zero_gradient() {
        for order in 1..=2 {
            let g = grad_apply(&vec![0.7; 3 * 20], order, 5, 4).unwrap();
            assert!(g.iter().all(|&v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn horizontal_ramp() {
        let (w, h) = (6, 3);
        let n = w * h;
        let mut u = vec![0.0; 3 * n];
        for r in 0..h {
            for c in 0..w {
                u[r * w + c] = c as f64 / (w - 1) as f64;
            }
        }
        let g = grad_apply(&u, 1, w, h).unwrap();
        for r in 0..h {
            for c in 0..w {
                let expect = if c + 1 < w { 1.0 / (w - 1) as f64 } else { 0.0 };
                assert!((g[r * w + c] - expect).abs() < 1e-15);
                assert_eq!(g[n + r * w + c], 0.0);
            }
        }
    }

    #[test]
    fn second_order_vanishes_on_affine_interior() {
        let (w, h) = (7, 6);
        let n = w * h;
        let mut u = vec![0.0; 3 * n];
        for ch in 0..3 {
            for r in 0..h {
                for c in 0..w {
                    u[ch * n + r * w + c] = 0.3 * c as f64 - 0.2 * r as f64 + 0.1 * ch as f64;
                }
            }
        }
        let g = grad_apply(&u, 2, w, h).unwrap();
        for ch in 0..3 {
            for r in 1..h - 1 {
                for c in 1..w - 1 {
                    for b in 0..4 {
                        let v = g[(ch * 4 + b) * n + r * w + c];
                        assert!(v.abs() < 1e-12, "block {b} at ({r},{c}) = {v}");
                    }
                }
            }
        }
    }

    #[test]
    fn mixed_blocks_coincide() {
        let mut rg = rng(1);
        let u = random_vec(&mut rg, 3 * 30);
        let g = grad_apply(&u, 2, 6, 5).unwrap();
        let n = 30;
        for ch in 0..3 {
            for i in 0..n {
                assert_eq!(g[(ch * 4 + 1) * n + i], g[(ch * 4 + 2) * n + i]);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut rg = rng(2);
        for &(w, h) in &[(1, 1), (1, 5), (5, 1), (7, 4), (16, 9)] {
            for order in 1..=2 {
                let op = Gradient::new(Dims::new(w, h), order).unwrap();
                for _ in 0..50 {
                    let x = random_vec(&mut rg, op.input_len());
                    let y = random_vec(&mut rg, op.output_len());
                    assert!(adjoint_defect(&op, &x, &y) <= 1e-10);
                    let du = op.apply(&x);
                    let dtdu = op.apply_adjoint(&du);
                    let a = dot(&du, &du);
                    let b = dot(&x, &dtdu);
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1e-300));
                }
            }
        }
    }

    #[test]
    fn adjoint_of_zero() {
        let z = grad_adjoint(&vec![0.0; 12 * 12], 2, 4, 3).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        assert!(matches!(grad_apply(&[0.0; 3], 3, 1, 1), Err(Error::UnsupportedOrder(3))));
        assert!(matches!(grad_adjoint(&[0.0; 5], 1, 1, 1), Err(Error::Dimension { .. })));
    }
}
