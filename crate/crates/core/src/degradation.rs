//! Forward models used to produce test data: opponent-channel noise,
//! motion blur, overlay masks, and synthetic test images.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::color::{opponent_forward, opponent_inverse, OpponentTriple};
use crate::error::{Error, Result};
use crate::image::{Dims, ImageRgb};
use crate::operators::{Blur, BlurKernel, LinearMap, Mask};

/// What was done to an image, recorded next to degraded outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DegradationSpec {
    OpponentNoise { sigma_8bit: f64, seed: u64 },
    Blur { kernel: Vec<Vec<f64>>, anchor: (usize, usize) },
    Mask { key_color: [f64; 3], tol: f64, missing: usize },
}

impl DegradationSpec {
    pub fn blur(kernel: &BlurKernel) -> Self {
        DegradationSpec::Blur {
            kernel: (0..kernel.height()).map(|r| kernel.row(r).to_vec()).collect(),
            anchor: kernel.anchor(),
        }
    }

    /// `key = value` lines.
    pub fn to_sidecar(&self) -> String {
        match self {
            DegradationSpec::OpponentNoise { sigma_8bit, seed } => {
                format!("kind = opponent_noise\nsigma = {sigma_8bit}\nseed = {seed}\n")
            }
            DegradationSpec::Blur { kernel, anchor } => {
                let rows: Vec<String> = kernel
                    .iter()
                    .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" "))
                    .collect();
                format!(
                    "kind = blur\nkernel_size = {}x{}\nanchor = {},{}\nkernel = {}\n",
                    kernel.first().map_or(0, Vec::len),
                    kernel.len(),
                    anchor.0,
                    anchor.1,
                    rows.join(" ; ")
                )
            }
            DegradationSpec::Mask { key_color, tol, missing } => format!(
                "kind = mask\nkey_color = {},{},{}\ntol = {tol}\nmissing = {missing}\n",
                key_color[0], key_color[1], key_color[2]
            ),
        }
    }
}

/// Adds i.i.d. `N(0, (σ/255)²)` noise to `o₂` and `o₃` of every pixel,
/// leaving `o₁` untouched. The result is not clamped.
///
/// The stream is ChaCha8 seeded from `seed`; for each pixel in raster
/// order one normal draw perturbs `o₂`, the next `o₃`.
pub fn add_opponent_noise(img: &ImageRgb, sigma_8bit: f64, seed: u64) -> ImageRgb {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = sigma_8bit / 255.0;
    let mut out = img.clone();
    for i in 0..img.dims().pixels() {
        let n2: f64 = StandardNormal.sample(&mut rng);
        let n3: f64 = StandardNormal.sample(&mut rng);
        if scale == 0.0 {
            continue;
        }
        let o = opponent_forward(img.pixel(i));
        let noisy = OpponentTriple {
            o1: o.o1,
            o2: o.o2 + scale * n2,
            o3: o.o3 + scale * n3,
        };
        out.set_pixel(i, opponent_inverse(noisy));
    }
    out
}

/// RGB covariance of opponent noise with std `sigma` on `o₂`, `o₃`:
/// `O⁻¹ diag(0, σ², σ²) O⁻ᵀ`.
pub fn noise_covariance_rgb(sigma: f64) -> [[f64; 3]; 3] {
    let inv = crate::color::opponent_inverse_matrix();
    let diag = [0.0, sigma * sigma, sigma * sigma];
    let mut cov = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            cov[i][j] = (0..3).map(|k| inv[i][k] * diag[k] * inv[j][k]).sum();
        }
    }
    cov
}

/// Blurs with replicate boundaries.
pub fn apply_blur(img: &ImageRgb, kernel: &BlurKernel) -> Result<ImageRgb> {
    let op = Blur::new(img.dims(), kernel.clone())?;
    ImageRgb::from_planes(img.dims(), op.apply(img.as_slice()))
}

/// Unit vectors of the blue and green hues in the `(o₂, o₃)` plane.
fn blue_green_axes() -> ([f64; 2], [f64; 2]) {
    let unit = |rgb: [f64; 3]| {
        let o = opponent_forward(rgb);
        let n = o.o2.hypot(o.o3);
        [o.o2 / n, o.o3 / n]
    };
    (unit([0.0, 0.0, 1.0]), unit([0.0, 1.0, 0.0]))
}

/// Isoluminant test image: constant lightness, chroma piecewise affine
/// over four quadrants, hues between blue and green.
///
/// In each quadrant the chroma is `a·B + b·G` (`B`, `G` the blue and green
/// hue directions) with `a`, `b` affine in the normalized coordinates and
/// bounded in `[0, 0.5]`, so no pixel is gray and all values stay
/// inside `[0, 1]`.
pub fn make_synthetic_isoluminant(width: usize, height: usize) -> Result<ImageRgb> {
    if width < 8 || height < 8 {
        return Err(Error::ImageTooSmall(format!(
            "synthetic image needs at least 8x8 pixels, got {width}x{height}"
        )));
    }
    let (blue, green) = blue_green_axes();
    let lightness = 0.5 * 3f64.sqrt();
    // per quadrant: (a0, ax, ay), (b0, bx, by); x, y ∈ [0, 1] within the quadrant
    const RAMPS: [[[f64; 3]; 2]; 4] = [
        [[0.50, -0.40, -0.05], [0.05, 0.40, 0.05]],
        [[0.05, 0.20, 0.25], [0.50, -0.20, -0.25]],
        [[0.45, -0.05, -0.40], [0.05, 0.05, 0.40]],
        [[0.10, 0.35, 0.05], [0.40, -0.30, 0.05]],
    ];
    let (hw, hh) = (width / 2, height / 2);
    Ok(ImageRgb::from_fn(Dims::new(width, height), |row, col| {
        let (qx, x0, span_x) = if col < hw { (0, 0, hw) } else { (1, hw, width - hw) };
        let (qy, y0, span_y) = if row < hh { (0, 0, hh) } else { (1, hh, height - hh) };
        let x = (col - x0) as f64 / span_x as f64;
        let y = (row - y0) as f64 / span_y as f64;
        let [ra, rb] = RAMPS[qy * 2 + qx];
        let a = ra[0] + ra[1] * x + ra[2] * y;
        let b = rb[0] + rb[1] * x + rb[2] * y;
        opponent_inverse(OpponentTriple {
            o1: lightness,
            o2: a * blue[0] + b * green[0],
            o3: a * blue[1] + b * green[1],
        })
    }))
}

/// A sharp, colourful test scene: flat background, saturated rectangles,
/// a disc, thin stripes and a diagonal colour ramp.
pub fn make_test_pattern(width: usize, height: usize) -> ImageRgb {
    let (w, h) = (width as f64, height as f64);
    ImageRgb::from_fn(Dims::new(width, height), |row, col| {
        let (x, y) = (col as f64 / w, row as f64 / h);
        let mut px = [0.85, 0.82, 0.7];
        if (0.08..0.42).contains(&x) && (0.1..0.45).contains(&y) {
            px = [0.8, 0.15, 0.1];
        }
        if (0.55..0.92).contains(&x) && (0.08..0.35).contains(&y) {
            px = [0.1, 0.3 + 0.5 * (x - 0.55), 0.75];
        }
        let (dx, dy) = (x - 0.68, y - 0.68);
        if dx * dx + dy * dy < 0.04 {
            px = [0.2, 0.65, 0.25];
        }
        if (0.1..0.45).contains(&x) && (0.58..0.9).contains(&y) && (col / 3) % 2 == 0 {
            px = [0.1, 0.1, 0.15];
        }
        if (0.05..0.95).contains(&x) && (0.94..0.99).contains(&y) {
            px = [x, 0.5 * (1.0 - x), 1.0 - x];
        }
        px
    })
}

/// Draws a crude block-letter text band in `key_color` over `img`,
/// the kind of overlay [`make_inpaint_mask_from_overlay`] detects.
pub fn overlay_text(img: &ImageRgb, key_color: [f64; 3]) -> ImageRgb {
    // 5x5 glyphs for "OVTV"
    const GLYPHS: [[&str; 5]; 4] = [
        ["01110", "10001", "10001", "10001", "01110"],
        ["10001", "10001", "10001", "01010", "00100"],
        ["11111", "00100", "00100", "00100", "00100"],
        ["10001", "10001", "10001", "01010", "00100"],
    ];
    let mut out = img.clone();
    let d = img.dims();
    let scale = (d.width / 32).max(1);
    let top = d.height / 2 - (5 * scale) / 2;
    let mut left = d.width / 8;
    for glyph in GLYPHS {
        for (gr, line) in glyph.iter().enumerate() {
            for (gc, ch) in line.chars().enumerate() {
                if ch != '1' {
                    continue;
                }
                for dr in 0..scale {
                    for dc in 0..scale {
                        let (r, c) = (top + gr * scale + dr, left + gc * scale + dc);
                        if r < d.height && c < d.width {
                            out.set_pixel(d.index(r, c), key_color);
                        }
                    }
                }
            }
        }
        left += 6 * scale;
    }
    out
}

/// Pixels within `tol` (max-norm) of `key_color` are marked unobserved.
pub fn make_inpaint_mask_from_overlay(img: &ImageRgb, key_color: [f64; 3], tol: f64) -> Mask {
    let keep = (0..img.dims().pixels())
        .map(|i| {
            let px = img.pixel(i);
            let dist = (0..3).map(|c| (px[c] - key_color[c]).abs()).fold(0.0, f64::max);
            dist > tol
        })
        .collect();
    Mask::new(img.dims(), keep).expect("mask built from image dims")
}
