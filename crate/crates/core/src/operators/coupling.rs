use crate::color::COUPLING;
use crate::error::{Error, Result};

use super::LinearMap;

/// `C = C₁ ⊗ I_N`: per pixel, `(r, g, b) ↦ (r − g, g − b, b − r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coupling {
    pixels: usize,
}

impl Coupling {
    pub fn new(pixels: usize) -> Self {
        Coupling { pixels }
    }
}

fn mix(m: &[[f64; 3]; 3], transpose: bool, x: &[f64], out: &mut [f64]) {
    let n = x.len() / 3;
    let (r, rest) = x.split_at(n);
    let (g, b) = rest.split_at(n);
    for i in 0..n {
        let v = [r[i], g[i], b[i]];
        for (c, chunk) in out.chunks_exact_mut(n).enumerate() {
            chunk[i] = if transpose {
                m[0][c] * v[0] + m[1][c] * v[1] + m[2][c] * v[2]
            } else {
                m[c][0] * v[0] + m[c][1] * v[1] + m[c][2] * v[2]
            };
        }
    }
}

impl LinearMap for Coupling {
    fn input_len(&self) -> usize {
        3 * self.pixels
    }
    fn output_len(&self) -> usize {
        3 * self.pixels
    }
    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        mix(&COUPLING, false, x, out);
    }
    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        mix(&COUPLING, true, y, out);
    }
}

fn check(u: &[f64]) -> Result<()> {
    if !u.len().is_multiple_of(3) {
        return Err(Error::Dimension {
            expected: u.len() / 3 * 3,
            actual: u.len(),
        });
    }
    Ok(())
}

pub fn coupling_apply(u: &[f64]) -> Result<Vec<f64>> {
    check(u)?;
    Ok(Coupling::new(u.len() / 3).apply(u))
}

pub fn coupling_adjoint(v: &[f64]) -> Result<Vec<f64>> {
    check(v)?;
    Ok(Coupling::new(v.len() / 3).apply_adjoint(v))
}
