//! Double-opponent color geometry.
//!
//! The opponent transform is an orthogonal change of basis of RGB:
//! `o1` measures lightness along the gray axis, `o2` blue against yellow
//! and `o3` red against green. Saturation is the length of `(o2, o3)`.
//! The colorfulness `γ(u) = uᵀPu` is the quantity the coupled regularizer
//! differentiates; the pullback metric and its eigen-system are provided
//! for analysis.

use crate::image::ImageRgb;

const INV_SQRT2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn inv_sqrt3() -> f64 {
    1.0 / 3f64.sqrt()
}

fn inv_sqrt6() -> f64 {
    1.0 / 6f64.sqrt()
}

/// Saturation below which the hue is reported as zero.
pub const HUE_EPS: f64 = 1e-12;

/// Rows of the opponent matrix `O`.
pub fn opponent_matrix() -> [[f64; 3]; 3] {
    let a = inv_sqrt3();
    let b = inv_sqrt6();
    [
        [a, a, a],
        [b, b, -2.0 * b],
        [INV_SQRT2, -INV_SQRT2, 0.0],
    ]
}

/// `O⁻¹ = Oᵀ`.
pub fn opponent_inverse_matrix() -> [[f64; 3]; 3] {
    let o = opponent_matrix();
    let mut t = [[0.0; 3]; 3];
    for (i, row) in o.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            t[j][i] = *v;
        }
    }
    t
}

/// Pairwise channel-difference matrix `C₁`.
pub const COUPLING: [[f64; 3]; 3] = [[1.0, -1.0, 0.0], [0.0, 1.0, -1.0], [-1.0, 0.0, 1.0]];

/// `P = C₁ᵀC₁ = C₁C₁ᵀ`: 2 on the diagonal, −1 elsewhere.
pub const COLORFULNESS_FORM: [[f64; 3]; 3] = [[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpponentTriple {
    pub o1: f64,
    pub o2: f64,
    pub o3: f64,
}

impl OpponentTriple {
    pub fn as_array(&self) -> [f64; 3] {
        [self.o1, self.o2, self.o3]
    }
}

/// Lightness, hue and saturation of an opponent triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LhsTriple {
    pub lightness: f64,
    /// Radians in `(−π/2, π/2]`.
    pub hue: f64,
    pub saturation: f64,
}

pub fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

pub fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn opponent_forward(rgb: [f64; 3]) -> OpponentTriple {
    let [o1, o2, o3] = mat_vec(&opponent_matrix(), rgb);
    OpponentTriple { o1, o2, o3 }
}

pub fn opponent_inverse(o: OpponentTriple) -> [f64; 3] {
    mat_vec(&opponent_inverse_matrix(), o.as_array())
}

/// Lightness/hue/saturation. The hue is the single-argument arctangent
/// of `o2/o3`; gray inputs (`s ≤ HUE_EPS`) get hue 0.
pub fn to_lhs(o: OpponentTriple) -> LhsTriple {
    let saturation = o.o2.hypot(o.o3);
    let hue = if saturation <= HUE_EPS {
        0.0
    } else if o.o3 == 0.0 {
        std::f64::consts::FRAC_PI_2
    } else {
        (o.o2 / o.o3).atan()
    };
    LhsTriple {
        lightness: o.o1,
        hue,
        saturation,
    }
}

/// Per-pixel colorfulness `(b−r)² + (r−g)² + (g−b)²`.
pub fn gamma(rgb: [f64; 3]) -> f64 {
    let [r, g, b] = rgb;
    (b - r).powi(2) + (r - g).powi(2) + (g - b).powi(2)
}

/// `γ` over a whole image, one value per pixel.
pub fn gamma_map(img: &ImageRgb) -> Vec<f64> {
    (0..img.dims().pixels()).map(|i| gamma(img.pixel(i))).collect()
}

/// Closed-form eigen-system of the pullback metric `G(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricEigenSystem {
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub f_sq: f64,
    /// Eigenvalues for the eigenvectors `(𝟙, α, β)` in that order.
    pub eigenvalues: [f64; 3],
}

impl MetricEigenSystem {
    pub fn eigenvectors(&self) -> [[f64; 3]; 3] {
        [[1.0; 3], self.alpha, self.beta]
    }

    /// `G(u) = (I + 9/f⁴ ααᵀ + 1/f² ββᵀ) / 3`.
    pub fn metric(&self) -> [[f64; 3]; 3] {
        let f2 = self.f_sq;
        let mut g = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                let id = if i == j { 1.0 } else { 0.0 };
                g[i][j] = (id
                    + 9.0 / (f2 * f2) * self.alpha[i] * self.alpha[j]
                    + self.beta[i] * self.beta[j] / f2)
                    / 3.0;
            }
        }
        g
    }

    /// `G(u) v` without forming `G`; keeps digits near the gray axis.
    pub fn apply_metric(&self, v: [f64; 3]) -> [f64; 3] {
        let f2 = self.f_sq;
        let a = 9.0 / (f2 * f2) * dot(self.alpha, v);
        let b = dot(self.beta, v) / f2;
        [0, 1, 2].map(|i| (v[i] + a * self.alpha[i] + b * self.beta[i]) / 3.0)
    }
}

/// Returned for inputs on the gray axis, where `f² = 0` and the metric
/// is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("metric is degenerate on the gray axis (f² = 0)")]
pub struct DegenerateMetric;

pub fn metric_eigensystem(rgb: [f64; 3]) -> Result<MetricEigenSystem, DegenerateMetric> {
    let [r, g, b] = rgb;
    let alpha = [b - g, r - b, g - r];
    let beta = [b + g - 2.0 * r, b + r - 2.0 * g, r + g - 2.0 * b];
    let f_sq = dot(alpha, alpha);
    if f_sq == 0.0 {
        return Err(DegenerateMetric);
    }
    Ok(MetricEigenSystem {
        alpha,
        beta,
        f_sq,
        eigenvalues: [1.0 / 3.0, 1.0 / 3.0 + 3.0 / f_sq, 4.0 / 3.0],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn gray_maps_to_lightness() {
        let c = 0.37;
        let o = opponent_forward([c, c, c]);
        assert!(close(o.o1, 3f64.sqrt() * c, 1e-15));
        assert!(o.o2.abs() < 1e-16 && o.o3.abs() < 1e-16);
        let back = opponent_inverse(OpponentTriple {
            o1: 3f64.sqrt() * c,
            o2: 0.0,
            o3: 0.0,
        });
        for v in back {
            assert!(close(v, c, 1e-15));
        }
    }

    #[test]
    fn red_in_opponent_space() {
        let o = opponent_forward([1.0, 0.0, 0.0]);
        assert!(close(o.o1, 0.57735, 1e-5));
        assert!(close(o.o2, 0.40825, 1e-5));
        assert!(close(o.o3, 0.70711, 1e-5));
    }

    #[test]
    fn inverse_matches_printed_matrix() {
        let s3 = 1.0 / 3f64.sqrt();
        let s6 = 1.0 / 6f64.sqrt();
        let s2 = 1.0 / 2f64.sqrt();
        let printed = [[s3, s6, s2], [s3, s6, -s2], [s3, -2.0 * s6, 0.0]];
        let inv = opponent_inverse_matrix();
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(inv[i][j], printed[i][j], 1e-14));
            }
        }
    }

    #[test]
    fn opponent_matrix_is_orthogonal() {
        let o = opponent_matrix();
        for i in 0..3 {
            for j in 0..3 {
                let v = dot(o[i], o[j]);
                let id = if i == j { 1.0 } else { 0.0 };
                assert!(close(v, id, 1e-14), "({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn lhs_examples() {
        let c = to_lhs(OpponentTriple {
            o1: 0.5,
            o2: 0.0,
            o3: 0.3,
        });
        assert_eq!((c.lightness, c.hue), (0.5, 0.0));
        assert!(close(c.saturation, 0.3, 1e-15));

        let gray = to_lhs(OpponentTriple {
            o1: 0.7,
            o2: 0.0,
            o3: 0.0,
        });
        assert_eq!((gray.lightness, gray.hue, gray.saturation), (0.7, 0.0, 0.0));

        let diag = to_lhs(OpponentTriple {
            o1: 0.0,
            o2: 0.3,
            o3: 0.3,
        });
        assert!(close(diag.hue, FRAC_PI_4, 1e-15));
        assert!(close(diag.saturation, 0.3 * 2f64.sqrt(), 1e-15));
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma([0.4, 0.4, 0.4]), 0.0);
        assert_eq!(gamma([1.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn red_eigensystem() {
        let e = metric_eigensystem([1.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.alpha, [0.0, 1.0, -1.0]);
        assert_eq!(e.beta, [-2.0, 1.0, 1.0]);
        assert_eq!(e.f_sq, 2.0);
        assert!(close(e.eigenvalues[0], 1.0 / 3.0, 1e-15));
        assert!(close(e.eigenvalues[1], 11.0 / 6.0, 1e-15));
        assert!(close(e.eigenvalues[2], 4.0 / 3.0, 1e-15));
    }

    #[test]
    fn red_beta_pairs_negatively_with_u() {
        let u = [1.0, 0.0, 0.0];
        let e = metric_eigensystem(u).unwrap();
        assert_eq!(dot(u, e.beta), -e.f_sq);
        assert_eq!(cross(e.alpha, e.beta), [2.0; 3]);
    }

    #[test]
    fn factored_metric_matches_matrix() {
        let e = metric_eigensystem([0.9, 0.2, 0.45]).unwrap();
        let v = [0.3, -1.0, 2.0];
        let g = e.metric();
        let fac = e.apply_metric(v);
        for i in 0..3 {
            assert!(close(dot(g[i], v), fac[i], 1e-12));
        }
    }

    #[test]
    fn gray_metric_is_degenerate() {
        assert_eq!(metric_eigensystem([0.3, 0.3, 0.3]), Err(DegenerateMetric));
    }

    #[test]
    fn secondary_colors_are_perpendicular_to_differences() {
        // yellow ⟂ (r − g), magenta ⟂ (b − r), cyan ⟂ (g − b)
        assert_eq!(dot([1.0, 1.0, 0.0], [1.0, -1.0, 0.0]), 0.0);
        assert_eq!(dot([1.0, 0.0, 1.0], [-1.0, 0.0, 1.0]), 0.0);
        assert_eq!(dot([0.0, 1.0, 1.0], [0.0, 1.0, -1.0]), 0.0);
    }

    #[test]
    fn gamma_routes_agree() {
        let u = [0.9, 0.2, 0.45];
        let via_p = dot(u, mat_vec(&COLORFULNESS_FORM, u));
        let c = mat_vec(&COUPLING, u);
        let via_c = dot(c, c);
        assert!(close(via_p, gamma(u), 1e-12));
        assert!(close(via_c, gamma(u), 1e-12));
    }
}
