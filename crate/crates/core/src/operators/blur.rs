use crate::error::{Error, Result};
use crate::image::Dims;

use super::LinearMap;

/// A 2-D correlation stencil whose taps sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct BlurKernel {
    width: usize,
    height: usize,
    taps: Vec<f64>,
    anchor_row: usize,
    anchor_col: usize,
}

impl BlurKernel {
    /// Taps are row-major. The anchor is the tap aligned with the output pixel.
    pub fn new(
        width: usize,
        height: usize,
        taps: Vec<f64>,
        anchor_row: usize,
        anchor_col: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Kernel("empty kernel".into()));
        }
        Error::check_len(width * height, taps.len())?;
        if taps.iter().any(|t| !t.is_finite()) {
            return Err(Error::Kernel("non-finite tap".into()));
        }
        if anchor_row >= height || anchor_col >= width {
            return Err(Error::Kernel("anchor outside the stencil".into()));
        }
        let sum: f64 = taps.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Kernel(format!("taps sum to {sum}, expected 1")));
        }
        Ok(BlurKernel {
            width,
            height,
            taps,
            anchor_row,
            anchor_col,
        })
    }

    /// Builds a centered kernel from rows, rescaling the taps to sum to one.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        if height == 0 || width == 0 {
            return Err(Error::Kernel("empty kernel".into()));
        }
        if rows.iter().any(|r| r.len() != width) {
            return Err(Error::Kernel("rows have different lengths".into()));
        }
        let sum: f64 = rows.iter().flatten().sum();
        if !(sum.is_finite() && sum > 0.0) {
            return Err(Error::Kernel(format!("tap sum {sum} cannot be normalized")));
        }
        let taps = rows.iter().flatten().map(|t| t / sum).collect();
        BlurKernel::new(width, height, taps, height / 2, width / 2)
    }

    /// Parses whitespace-separated rows; blank lines and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<f64>().map_err(|e| Error::Parse {
                        what: format!("kernel line {}", lineno + 1),
                        detail: e.to_string(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        BlurKernel::from_rows(&rows)
    }

    /// Writes the kernel in the same plain-text layout [`BlurKernel::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in 0..self.height {
            let row: Vec<String> = self.row(r).iter().map(|t| format!("{t:.17e}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn identity() -> Self {
        BlurKernel {
            width: 1,
            height: 1,
            taps: vec![1.0],
            anchor_row: 0,
            anchor_col: 0,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn anchor(&self) -> (usize, usize) {
        (self.anchor_row, self.anchor_col)
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.taps[r * self.width..(r + 1) * self.width]
    }

    fn offsets(&self) -> impl Iterator<Item = (isize, isize, f64)> + '_ {
        let (ar, ac) = (self.anchor_row as isize, self.anchor_col as isize);
        self.taps.iter().enumerate().filter(|(_, t)| **t != 0.0).map(move |(i, t)| {
            let dr = (i / self.width) as isize - ar;
            let dc = (i % self.width) as isize - ac;
            (dr, dc, *t)
        })
    }
}

/// Linear motion blur: `length_px` unit-spaced samples along a segment
/// centered on the anchor, rotated counter-clockwise by `angle_deg`, each
/// splatted bilinearly onto the pixel grid.
pub fn motion_kernel(length_px: usize, angle_deg: f64) -> Result<BlurKernel> {
    if length_px == 0 {
        return Err(Error::Kernel("motion length must be at least 1".into()));
    }
    let half = (length_px as f64 - 1.0) / 2.0;
    let radius = half.ceil() as usize + 1;
    let side = 2 * radius + 1;
    let mut grid = vec![0.0; side * side];
    let (sin, cos) = angle_deg.to_radians().sin_cos();
    for k in 0..length_px {
        let t = k as f64 - half;
        // image rows grow downward, so a counter-clockwise angle moves up
        let x = radius as f64 + t * cos;
        let y = radius as f64 - t * sin;
        let (x0, y0) = (x.floor(), y.floor());
        let (fx, fy) = (x - x0, y - y0);
        let (x0, y0) = (x0 as usize, y0 as usize);
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                let w = wx * wy;
                if w > 1e-15 {
                    grid[(y0 + dy) * side + x0 + dx] += w;
                }
            }
        }
    }
    let total: f64 = grid.iter().sum();
    grid.iter_mut().for_each(|v| *v /= total);

    let nonzero_row = |r: usize| grid[r * side..(r + 1) * side].iter().any(|&v| v != 0.0);
    let nonzero_col = |c: usize| (0..side).any(|r| grid[r * side + c] != 0.0);
    let top = (0..side).find(|&r| nonzero_row(r)).unwrap_or(radius);
    let bottom = (0..side).rev().find(|&r| nonzero_row(r)).unwrap_or(radius);
    let left = (0..side).find(|&c| nonzero_col(c)).unwrap_or(radius);
    let right = (0..side).rev().find(|&c| nonzero_col(c)).unwrap_or(radius);
    let (top, bottom) = (top.min(radius), bottom.max(radius));
    let (left, right) = (left.min(radius), right.max(radius));
    let (w, h) = (right - left + 1, bottom - top + 1);
    let mut taps = Vec::with_capacity(w * h);
    for r in top..=bottom {
        taps.extend_from_slice(&grid[r * side + left..=r * side + right]);
    }
    Ok(BlurKernel {
        width: w,
        height: h,
        taps,
        anchor_row: radius - top,
        anchor_col: radius - left,
    })
}

/// Per-channel correlation with replicate boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Blur {
    dims: Dims,
    kernel: BlurKernel,
}

impl Blur {
    pub fn new(dims: Dims, kernel: BlurKernel) -> Result<Self> {
        if kernel.width > dims.width || kernel.height > dims.height {
            return Err(Error::KernelTooLarge {
                kernel_w: kernel.width,
                kernel_h: kernel.height,
                image_w: dims.width,
                image_h: dims.height,
            });
        }
        Ok(Blur { dims, kernel })
    }

    pub fn kernel(&self) -> &BlurKernel {
        &self.kernel
    }
}

#[inline]
fn clamp_index(v: isize, len: usize) -> usize {
    v.clamp(0, len as isize - 1) as usize
}

impl LinearMap for Blur {
    fn input_len(&self) -> usize {
        self.dims.field_len()
    }

    fn output_len(&self) -> usize {
        self.dims.field_len()
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dims;
        let n = d.pixels();
        let offsets: Vec<_> = self.kernel.offsets().collect();
        for c in 0..3 {
            let src = &x[c * n..(c + 1) * n];
            let dst = &mut out[c * n..(c + 1) * n];
            for r in 0..d.height {
                for col in 0..d.width {
                    let mut acc = 0.0;
                    for &(dr, dc, t) in &offsets {
                        let rr = clamp_index(r as isize + dr, d.height);
                        let cc = clamp_index(col as isize + dc, d.width);
                        acc += t * src[rr * d.width + cc];
                    }
                    dst[r * d.width + col] = acc;
                }
            }
        }
    }

    fn adjoint_into(&self, y: &[f64], out: &mut [f64]) {
        // exact transpose of the clamped gather: scatter into clamped indices
        let d = self.dims;
        let n = d.pixels();
        let offsets: Vec<_> = self.kernel.offsets().collect();
        out.iter_mut().for_each(|v| *v = 0.0);
        for c in 0..3 {
            let src = &y[c * n..(c + 1) * n];
            let dst = &mut out[c * n..(c + 1) * n];
            for r in 0..d.height {
                for col in 0..d.width {
                    let v = src[r * d.width + col];
                    for &(dr, dc, t) in &offsets {
                        let rr = clamp_index(r as isize + dr, d.height);
                        let cc = clamp_index(col as isize + dc, d.width);
                        dst[rr * d.width + cc] += t * v;
                    }
                }
            }
        }
    }
}

pub fn blur_apply(u: &[f64], dims: Dims, kernel: &BlurKernel) -> Result<Vec<f64>> {
    let op = Blur::new(dims, kernel.clone())?;
    Error::check_len(op.input_len(), u.len())?;
    Ok(op.apply(u))
}

pub fn blur_adjoint(u: &[f64], dims: Dims, kernel: &BlurKernel) -> Result<Vec<f64>> {
    let op = Blur::new(dims, kernel.clone())?;
    Error::check_len(op.output_len(), u.len())?;
    Ok(op.apply_adjoint(u))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::adjoint_defect;
    use crate::operators::test_util::{random_vec, rng};

    #[test]
    fn identity_kernel_is_identity() {
        let mut rg = rng(5);
        let dims = Dims::new(5, 4);
        let u = random_vec(&mut rg, dims.field_len());
        assert_eq!(blur_apply(&u, dims, &BlurKernel::identity()).unwrap(), u);
    }

    #[test]
    fn constant_image_unchanged() {
        let dims = Dims::new(12, 10);
        let k = motion_kernel(9, 10.0).unwrap();
        let u = vec![0.42; dims.field_len()];
        for v in blur_apply(&u, dims, &k).unwrap() {
            assert!((v - 0.42).abs() < 1e-14);
        }
    }

    #[test]
    fn motion_kernel_unit_length_is_identity() {
        for angle in [0.0, 10.0, 45.0, 133.0] {
            assert_eq!(motion_kernel(1, angle).unwrap(), BlurKernel::identity());
        }
    }

    #[test]
    fn horizontal_motion_kernel() {
        let k = motion_kernel(9, 0.0).unwrap();
        assert_eq!((k.width(), k.height()), (9, 1));
        assert_eq!(k.anchor(), (0, 4));
        for &t in k.taps() {
            assert!((t - 1.0 / 9.0).abs() < 1e-15);
        }
    }

    #[test]
    fn motion_kernel_taps_sum_to_one() {
        for len in 1..15 {
            for angle in [0.0, 10.0, 30.0, 45.0, 90.0, 170.0, -25.0] {
                let k = motion_kernel(len, angle).unwrap();
                let s: f64 = k.taps().iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn tilted_kernel_rises_to_the_right() {
        let k = motion_kernel(9, 10.0).unwrap();
        // the rightmost column carries mass above the anchor row
        let (ar, _) = k.anchor();
        let right = k.width() - 1;
        let above: f64 = (0..ar).map(|r| k.row(r)[right]).sum();
        assert!(above > 0.0);
    }

    #[test]
    fn adjoint_identity() {
        let mut rg = rng(6);
        let dims = Dims::new(13, 11);
        let kernels = [
            motion_kernel(9, 10.0).unwrap(),
            BlurKernel::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![0.5, 0.0]]).unwrap(),
        ];
        for k in kernels {
            let op = Blur::new(dims, k).unwrap();
            for _ in 0..100 {
                let x = random_vec(&mut rg, op.input_len());
                let y = random_vec(&mut rg, op.output_len());
                assert!(adjoint_defect(&op, &x, &y) <= 1e-10);
            }
        }
    }

    #[test]
    fn kernel_larger_than_image() {
        let k = motion_kernel(9, 0.0).unwrap();
        let err = Blur::new(Dims::new(5, 5), k).unwrap_err();
        assert!(matches!(err, Error::KernelTooLarge { .. }));
    }

    #[test]
    fn parse_round_trip() {
        let k = motion_kernel(5, 30.0).unwrap();
        let back = BlurKernel::parse(&k.to_text()).unwrap();
        assert_eq!(back.width(), k.width());
        for (a, b) in back.taps().iter().zip(k.taps()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(BlurKernel::parse("1 2\n3").is_err());
        assert!(BlurKernel::parse("0 0").is_err());
        let k = BlurKernel::parse("# box\n1 1 1\n").unwrap();
        assert_eq!(k.anchor(), (0, 1));
    }
}
