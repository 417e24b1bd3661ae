use crate::error::{Error, Result};
use crate::image::Dims;

use super::LinearMap;

/// Observation mask: `true` where the pixel is observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dims: Dims,
    keep: Vec<bool>,
}

impl Mask {
    pub fn new(dims: Dims, keep: Vec<bool>) -> Result<Self> {
        Error::check_len(dims.pixels(), keep.len())?;
        Ok(Mask { dims, keep })
    }

    pub fn all(dims: Dims, observed: bool) -> Self {
        Mask {
            dims,
            keep: vec![observed; dims.pixels()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    pub fn is_observed(&self, pixel: usize) -> bool {
        self.keep[pixel]
    }

    /// Number of pixels to be filled in.
    pub fn missing(&self) -> usize {
        self.keep.iter().filter(|k| !**k).count()
    }
}

/// Diagonal 0/1 operator that zeroes unobserved pixels in every channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskOp {
    mask: Mask,
}

impl MaskOp {
    pub fn new(mask: Mask) -> Self {
        MaskOp { mask }
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }
}

impl LinearMap for MaskOp {
    fn input_len(&self) -> usize {
        self.mask.dims.field_len()
    }

    fn output_len(&self) -> usize {
        self.mask.dims.field_len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.mask.dims.pixels();
        for (i, (o, v)) in out.iter_mut().zip(x).enumerate() {
            *o = if self.mask.keep[i % n] { *v } else { 0.0 };
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        self.apply_into(y, out)
    }

    /// Observed pixels keep their value; missing ones start at the
    /// per-channel mean of the observed pixels.
    fn initial_guess(&self, g: &[f64]) -> Vec<f64> {
        let n = self.mask.dims.pixels();
        let mut u = g.to_vec();
        for c in 0..3 {
            let plane = &mut u[c * n..(c + 1) * n];
            let (sum, count) = plane
                .iter()
                .zip(&self.mask.keep)
                .filter(|(_, k)| **k)
                .fold((0.0, 0usize), |(s, k), (v, _)| (s + v, k + 1));
            let mean = if count > 0 { sum / count as f64 } else { 0.5 };
            for (v, k) in plane.iter_mut().zip(&self.mask.keep) {
                if !k {
                    *v = mean;
                }
            }
        }
        u
    }
}

pub fn mask_apply(u: &[f64], mask: &Mask) -> Result<Vec<f64>> {
    Error::check_len(mask.dims.field_len(), u.len())?;
    Ok(MaskOp::new(mask.clone()).apply(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::adjoint_defect;
    use crate::operators::test_util::{random_vec, rng};
    use rand::Rng;

    #[test]
    fn trivial_masks() {
        let dims = Dims::new(4, 3);
        let mut rg = rng(9);
        let u = random_vec(&mut rg, dims.field_len());
        assert_eq!(mask_apply(&u, &Mask::all(dims, true)).unwrap(), u);
        assert!(mask_apply(&u, &Mask::all(dims, false)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn idempotent_and_self_adjoint() {
        let dims = Dims::new(9, 7);
        let mut rg = rng(10);
        let keep = (0..dims.pixels()).map(|_| rg.random_bool(0.6)).collect();
        let mask = Mask::new(dims, keep).unwrap();
        let op = MaskOp::new(mask.clone());
        for _ in 0..20 {
            let u = random_vec(&mut rg, dims.field_len());
            let v = random_vec(&mut rg, dims.field_len());
            let once = mask_apply(&u, &mask).unwrap();
            assert_eq!(mask_apply(&once, &mask).unwrap(), once);
            assert!(adjoint_defect(&op, &u, &v) <= 1e-14);
        }
    }

    #[test]
    fn dimension_mismatch() {
        let mask = Mask::all(Dims::new(2, 2), true);
        assert!(mask_apply(&[0.0; 6], &mask).is_err());
        assert!(Mask::new(Dims::new(2, 2), vec![true; 3]).is_err());
    }

    #[test]
    fn initial_guess_fills_means() {
        let dims = Dims::new(3, 1);
        let mask = Mask::new(dims, vec![true, false, true]).unwrap();
        let g = vec![0.2, 0.0, 0.4, 1.0, 0.0, 0.0, 0.5, 0.9, 0.7];
        let u = MaskOp::new(mask).initial_guess(&g);
        let expect = [0.2, 0.3, 0.4, 1.0, 0.5, 0.0, 0.5, 0.6, 0.7];
        for (a, b) in u.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
