//! PSNR, SSIM and CIEDE2000.

use crate::error::{Error, Result};
use crate::image::ImageRgb;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MetricsReport {
    /// dB on the 8-bit scale; `+∞` for identical images.
    pub psnr: f64,
    pub ssim: f64,
    /// Mean ΔE₀₀ over pixels.
    pub ciede: f64,
}

impl MetricsReport {
    /// `PSNR/SSIM/CIEDE`, e.g. `23.3/0.71/8.27`.
    pub fn slash_format(&self) -> String {
        format!("{:.1}/{:.2}/{:.2}", self.psnr, self.ssim, self.ciede)
    }
}

fn same_dims(a: &ImageRgb, b: &ImageRgb) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Dimension {
            expected: a.dims().field_len(),
            actual: b.dims().field_len(),
        });
    }
    Ok(())
}

pub fn evaluate(reference: &ImageRgb, test: &ImageRgb) -> Result<MetricsReport> {
    Ok(MetricsReport {
        psnr: psnr(reference, test)?,
        ssim: ssim(reference, test)?,
        ciede: ciede2000(reference, test)?,
    })
}

/// `10 log₁₀(255² / MSE)` with the MSE taken over all values scaled by 255.
pub fn psnr(reference: &ImageRgb, test: &ImageRgb) -> Result<f64> {
    same_dims(reference, test)?;
    Ok(psnr_values(reference.as_slice(), test.as_slice()))
}

/// PSNR of two equally long value arrays in `[0, 1]` scale.
pub fn psnr_values(reference: &[f64], test: &[f64]) -> f64 {
    let mse = reference
        .iter()
        .zip(test)
        .map(|(a, b)| {
            let d = 255.0 * (a - b);
            d * d
        })
        .sum::<f64>()
        / reference.len() as f64;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0 * 255.0 / mse).log10()
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let mut w = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - c;
        *v = (-x * x / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable 'valid' Gaussian filtering of one plane.
fn filter_valid(plane: &[f64], width: usize, height: usize, w: &[f64; SSIM_WINDOW]) -> (Vec<f64>, usize, usize) {
    let ow = width - SSIM_WINDOW + 1;
    let oh = height - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; ow * height];
    for r in 0..height {
        for c in 0..ow {
            rows[r * ow + c] = (0..SSIM_WINDOW).map(|k| w[k] * plane[r * width + c + k]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for r in 0..oh {
        for c in 0..ow {
            out[r * ow + c] = (0..SSIM_WINDOW).map(|k| w[k] * rows[(r + k) * ow + c]).sum();
        }
    }
    (out, ow, oh)
}

fn ssim_plane(x: &[f64], y: &[f64], width: usize, height: usize) -> f64 {
    let w = gaussian_window();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).collect::<Vec<_>>();
    let (mx, _, _) = filter_valid(x, width, height, &w);
    let (my, _, _) = filter_valid(y, width, height, &w);
    let (sxx, _, _) = filter_valid(&prod(x, x), width, height, &w);
    let (syy, _, _) = filter_valid(&prod(y, y), width, height, &w);
    let (sxy, _, _) = filter_valid(&prod(x, y), width, height, &w);
    let c1 = (SSIM_K1 * 1.0f64).powi(2);
    let c2 = (SSIM_K2 * 1.0f64).powi(2);
    let n = mx.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cov = sxy[i] - ux * uy;
        acc += ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    acc / n as f64
}

/// Mean SSIM over the three channels: 11×11 Gaussian window (σ = 1.5),
/// K₁ = 0.01, K₂ = 0.03, dynamic range 1.
pub fn ssim(reference: &ImageRgb, test: &ImageRgb) -> Result<f64> {
    same_dims(reference, test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::ImageTooSmall(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
        )));
    }
    let total: f64 = (0..3)
        .map(|c| ssim_plane(reference.plane(c), test.plane(c), w, h))
        .sum();
    Ok(total / 3.0)
}

/// CIELAB coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

fn srgb_to_linear(v: f64) -> f64 {
    if v <= 0.04045 {
        v / 12.92
    } else {
        ((v + 0.055) / 1.055).powf(2.4)
    }
}

/// sRGB in `[0, 1]` → CIELAB, D65 white point.
pub fn srgb_to_lab(rgb: [f64; 3]) -> Lab {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
    let y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    let z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
    const WHITE: [f64; 3] = [0.95047, 1.0, 1.08883];
    const EPSILON: f64 = 216.0 / 24389.0;
    const KAPPA: f64 = 24389.0 / 27.0;
    let f = |t: f64| {
        if t > EPSILON {
            t.cbrt()
        } else {
            (KAPPA * t + 16.0) / 116.0
        }
    };
    let (fx, fy, fz) = (f(x / WHITE[0]), f(y / WHITE[1]), f(z / WHITE[2]));
    Lab {
        l: 116.0 * fy - 16.0,
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

/// CIEDE2000 colour difference with `k_L = k_C = k_H = 1`.
pub fn delta_e_2000(c1: Lab, c2: Lab) -> f64 {
    use std::f64::consts::PI;
    let deg = |r: f64| r * 180.0 / PI;
    let rad = |d: f64| d * PI / 180.0;

    let c1ab = c1.a.hypot(c1.b);
    let c2ab = c2.a.hypot(c2.b);
    let cbar = 0.5 * (c1ab + c2ab);
    let c7 = cbar.powi(7);
    let g = 0.5 * (1.0 - (c7 / (c7 + 25f64.powi(7))).sqrt());
    let a1p = (1.0 + g) * c1.a;
    let a2p = (1.0 + g) * c2.a;
    let c1p = a1p.hypot(c1.b);
    let c2p = a2p.hypot(c2.b);
    let hue = |b: f64, a: f64| {
        if b == 0.0 && a == 0.0 {
            0.0
        } else {
            let h = deg(b.atan2(a));
            if h < 0.0 {
                h + 360.0
            } else {
                h
            }
        }
    };
    let h1p = hue(c1.b, a1p);
    let h2p = hue(c2.b, a2p);

    let dl = c2.l - c1.l;
    let dc = c2p - c1p;
    let cprod = c1p * c2p;
    let dh = if cprod == 0.0 {
        0.0
    } else {
        let d = h2p - h1p;
        if d > 180.0 {
            d - 360.0
        } else if d < -180.0 {
            d + 360.0
        } else {
            d
        }
    };
    let dh_big = 2.0 * cprod.sqrt() * rad(dh / 2.0).sin();

    let lbar = 0.5 * (c1.l + c2.l);
    let cbar_p = 0.5 * (c1p + c2p);
    let hbar = if cprod == 0.0 {
        h1p + h2p
    } else if (h1p - h2p).abs() <= 180.0 {
        0.5 * (h1p + h2p)
    } else if h1p + h2p < 360.0 {
        0.5 * (h1p + h2p + 360.0)
    } else {
        0.5 * (h1p + h2p - 360.0)
    };
    let t = 1.0 - 0.17 * rad(hbar - 30.0).cos() + 0.24 * rad(2.0 * hbar).cos() + 0.32 * rad(3.0 * hbar + 6.0).cos()
        - 0.20 * rad(4.0 * hbar - 63.0).cos();
    let dtheta = 30.0 * (-((hbar - 275.0) / 25.0).powi(2)).exp();
    let cbar_p7 = cbar_p.powi(7);
    let rc = 2.0 * (cbar_p7 / (cbar_p7 + 25f64.powi(7))).sqrt();
    let l50 = (lbar - 50.0).powi(2);
    let sl = 1.0 + 0.015 * l50 / (20.0 + l50).sqrt();
    let sc = 1.0 + 0.045 * cbar_p;
    let sh = 1.0 + 0.015 * cbar_p * t;
    let rt = -rad(2.0 * dtheta).sin() * rc;

    let tl = dl / sl;
    let tc = dc / sc;
    let th = dh_big / sh;
    (tl * tl + tc * tc + th * th + rt * tc * th).sqrt()
}

/// Mean ΔE₀₀ over pixels, colours interpreted as sRGB (unquantized).
pub fn ciede2000(reference: &ImageRgb, test: &ImageRgb) -> Result<f64> {
    same_dims(reference, test)?;
    let n = reference.dims().pixels();
    let total: f64 = (0..n)
        .map(|i| delta_e_2000(srgb_to_lab(reference.pixel(i)), srgb_to_lab(test.pixel(i))))
        .sum();
    Ok(total / n as f64)
}

/// Published CIEDE2000 verification pairs: `(L₁, a₁, b₁, L₂, a₂, b₂, ΔE₀₀)`.
pub const CIEDE2000_REFERENCE_PAIRS: [[f64; 7]; 34] = [
    [50.0000, 2.6772, -79.7751, 50.0000, 0.0000, -82.7485, 2.0425],
    [50.0000, 3.1571, -77.2803, 50.0000, 0.0000, -82.7485, 2.8615],
    [50.0000, 2.8361, -74.0200, 50.0000, 0.0000, -82.7485, 3.4412],
    [50.0000, -1.3802, -84.2814, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -1.1848, -84.8006, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, -0.9009, -85.5211, 50.0000, 0.0000, -82.7485, 1.0000],
    [50.0000, 0.0000, 0.0000, 50.0000, -1.0000, 2.0000, 2.3669],
    [50.0000, -1.0000, 2.0000, 50.0000, 0.0000, 0.0000, 2.3669],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0009, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0010, 7.1792],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0011, 7.2195],
    [50.0000, 2.4900, -0.0010, 50.0000, -2.4900, 0.0012, 7.2195],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0009, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0010, -2.4900, 4.8045],
    [50.0000, -0.0010, 2.4900, 50.0000, 0.0011, -2.4900, 4.7461],
    [50.0000, 2.5000, 0.0000, 50.0000, 0.0000, -2.5000, 4.3065],
    [50.0000, 2.5000, 0.0000, 73.0000, 25.0000, -18.0000, 27.1492],
    [50.0000, 2.5000, 0.0000, 61.0000, -5.0000, 29.0000, 22.8977],
    [50.0000, 2.5000, 0.0000, 56.0000, -27.0000, -3.0000, 31.9030],
    [50.0000, 2.5000, 0.0000, 58.0000, 24.0000, 15.0000, 19.4535],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.1736, 0.5854, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2972, 0.0000, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 1.8634, 0.5757, 1.0000],
    [50.0000, 2.5000, 0.0000, 50.0000, 3.2592, 0.3350, 1.0000],
    [60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644],
    [63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];
