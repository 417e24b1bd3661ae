//! Matrix-free linear operators on channel-stacked fields.
//!
//! Every operator exposes its exact adjoint so that normal equations can
//! be formed implicitly and solved with conjugate gradients.

mod blur;
mod coupling;
mod gradient;
mod mask;

pub use blur::{blur_adjoint, blur_apply, motion_kernel, Blur, BlurKernel};
pub use coupling::{coupling_adjoint, coupling_apply, Coupling};
pub use gradient::{grad_adjoint, grad_apply, Gradient};
pub use mask::{mask_apply, Mask, MaskOp};

use crate::image::Dims;

/// A linear map `A: R^input_len → R^output_len` given by its action and
/// the action of its transpose.
pub trait LinearMap {
    fn input_len(&self) -> usize;

    fn output_len(&self) -> usize;

    /// `out = A x`. Implementations overwrite `out`.
    fn apply_into(&self, x: &[f64], out: &mut [f64]);

    /// `out = Aᵀ y`. Implementations overwrite `out`.
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.output_len()];
        self.apply_into(x, &mut out);
        out
    }

    fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.input_len()];
        self.adjoint_into(y, &mut out);
        out
    }

    /// Starting point for an iterative solve against observations `g`.
    fn initial_guess(&self, g: &[f64]) -> Vec<f64> {
        g.to_vec()
    }
}

impl<T: LinearMap + ?Sized> LinearMap for &T {
    fn input_len(&self) -> usize {
        (**self).input_len()
    }
    fn output_len(&self) -> usize {
        (**self).output_len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        (**self).apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        (**self).adjoint_into(y, out)
    }
    fn initial_guess(&self, g: &[f64]) -> Vec<f64> {
        (**self).initial_guess(g)
    }
}

/// The identity on fields of a given length (denoising).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Identity {
    pub len: usize,
}

impl Identity {
    pub fn new(len: usize) -> Self {
        Identity { len }
    }

    pub fn for_dims(dims: Dims) -> Self {
        Identity {
            len: dims.field_len(),
        }
    }
}

impl LinearMap for Identity {
    fn input_len(&self) -> usize {
        self.len
    }
    fn output_len(&self) -> usize {
        self.len
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y);
    }
}

/// The forward models used by the restoration tasks.
#[derive(Debug, Clone)]
pub enum ForwardModel {
    Identity(Identity),
    Blur(Blur),
    Mask(MaskOp),
}

impl ForwardModel {
    pub fn identity(dims: Dims) -> Self {
        ForwardModel::Identity(Identity::for_dims(dims))
    }

    fn inner(&self) -> &dyn LinearMap {
        match self {
            ForwardModel::Identity(op) => op,
            ForwardModel::Blur(op) => op,
            ForwardModel::Mask(op) => op,
        }
    }
}

impl LinearMap for ForwardModel {
    fn input_len(&self) -> usize {
        self.inner().input_len()
    }
    fn output_len(&self) -> usize {
        self.inner().output_len()
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        self.inner().apply_into(x, out)
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.inner().adjoint_into(y, out)
    }
    fn initial_guess(&self, g: &[f64]) -> Vec<f64> {
        self.inner().initial_guess(g)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Relative defect of `⟨A x, y⟩ = ⟨x, Aᵀ y⟩`.
pub fn adjoint_defect(op: &dyn LinearMap, x: &[f64], y: &[f64]) -> f64 {
    let lhs = dot(&op.apply(x), y);
    let rhs = dot(x, &op.apply_adjoint(y));
    let scale = lhs.abs().max(rhs.abs()).max(f64::MIN_POSITIVE);
    (lhs - rhs).abs() / scale
}

#[cfg(test)]
pub(crate) mod test_util {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    pub fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Dense matrix (row-major rows) of a linear map on `n` unknowns.
    pub fn dense(n: usize, mut apply: impl FnMut(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        let mut rows = vec![vec![0.0; n]; n];
        let mut e = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            let col = apply(&e);
            for i in 0..n {
                rows[i][j] = col[i];
            }
            e[j] = 0.0;
        }
        rows
    }

    /// Gaussian elimination with partial pivoting.
    pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for k in 0..n {
            let piv = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
            a.swap(k, piv);
            b.swap(k, piv);
            for i in k + 1..n {
                let f = a[i][k] / a[k][k];
                if f == 0.0 {
                    continue;
                }
                for j in k..n {
                    a[i][j] -= f * a[k][j];
                }
                b[i] -= f * b[k];
            }
        }
        let mut x = vec![0.0; n];
        for k in (0..n).rev() {
            let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
            x[k] = (b[k] - s) / a[k][k];
        }
        x
    }
}
