//! File formats: 8-bit PNG images and masks, a raw float dump, kernel
//! text files, `key = value` config files and JSON run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, Luma, Rgb, RgbImage};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::image::{Dims, ImageRgb};
use crate::operators::{BlurKernel, Mask};

const RAW_MAGIC: &[u8; 7] = b"OVTVF64";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn image_err(path: &Path) -> impl FnOnce(image::ImageError) -> Error + '_ {
    move |source| Error::Image {
        path: path.to_path_buf(),
        source,
    }
}

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn from_rgb8(img: &RgbImage) -> ImageRgb {
    let dims = Dims::new(img.width() as usize, img.height() as usize);
    ImageRgb::from_fn(dims, |row, col| {
        let Rgb(px) = *img.get_pixel(col as u32, row as u32);
        px.map(|v| v as f64 / 255.0)
    })
}

pub fn read_png(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    Ok(from_rgb8(&image::open(path).map_err(image_err(path))?.to_rgb8()))
}

fn encode(img: image::DynamicImage) -> Result<Vec<u8>> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(image_err(Path::new("<png>")))?;
    Ok(buf.into_inner())
}

/// PNG bytes of `img`, quantized to 8 bits (clamped, rounded).
pub fn encode_png(img: &ImageRgb) -> Result<Vec<u8>> {
    let d = img.dims();
    let out = RgbImage::from_fn(d.width as u32, d.height as u32, |x, y| {
        let px = img.pixel(d.index(y as usize, x as usize));
        Rgb(px.map(to_u8))
    });
    encode(out.into())
}

pub fn write_png(path: impl AsRef<Path>, img: &ImageRgb) -> Result<()> {
    write_bytes(path, &encode_png(img)?)
}

/// Grayscale PNG of a scalar field scaled by its maximum (an all-zero
/// field stays black).
pub fn encode_gray_png(dims: Dims, values: &[f64]) -> Result<Vec<u8>> {
    Error::check_len(dims.pixels(), values.len())?;
    let max = values.iter().cloned().fold(0.0, f64::max);
    let scale = if max > 0.0 { 1.0 / max } else { 0.0 };
    let out = GrayImage::from_fn(dims.width as u32, dims.height as u32, |x, y| {
        Luma([to_u8(values[dims.index(y as usize, x as usize)] * scale)])
    });
    encode(out.into())
}

pub fn write_gray_png(path: impl AsRef<Path>, dims: Dims, values: &[f64]) -> Result<()> {
    write_bytes(path, &encode_gray_png(dims, values)?)
}

/// Mask PNG: nonzero luminance = observed.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(image_err(path))?.to_luma8();
    let dims = Dims::new(img.width() as usize, img.height() as usize);
    let keep = img.pixels().map(|Luma([v])| *v != 0).collect();
    Mask::new(dims, keep)
}

pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let d = mask.dims();
    let out = GrayImage::from_fn(d.width as u32, d.height as u32, |x, y| {
        Luma([if mask.is_observed(d.index(y as usize, x as usize)) { 255 } else { 0 }])
    });
    encode(out.into())
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    write_bytes(path, &encode_mask_png(mask)?)
}

/// Lossless dump: `OVTVF64`, width and height as little-endian `u32`,
/// then the channel-stacked samples as little-endian `f64`.
pub fn encode_raw(img: &ImageRgb) -> Vec<u8> {
    let d = img.dims();
    let mut buf = Vec::with_capacity(15 + 8 * img.as_slice().len());
    buf.extend_from_slice(RAW_MAGIC);
    buf.extend_from_slice(&(d.width as u32).to_le_bytes());
    buf.extend_from_slice(&(d.height as u32).to_le_bytes());
    for v in img.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn write_raw(path: impl AsRef<Path>, img: &ImageRgb) -> Result<()> {
    write_bytes(path, &encode_raw(img))
}

pub fn read_raw(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    decode_raw(path, &fs::read(path).map_err(io_err(path))?)
}

fn decode_raw(path: &Path, bytes: &[u8]) -> Result<ImageRgb> {
    let bad = |detail: &str| Error::Parse {
        what: path.display().to_string(),
        detail: detail.to_string(),
    };
    if bytes.len() < 15 || &bytes[..7] != RAW_MAGIC {
        return Err(bad("not a raw float dump"));
    }
    let w = u32::from_le_bytes(bytes[7..11].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[11..15].try_into().unwrap()) as usize;
    let body = &bytes[15..];
    if body.len() != 3 * w * h * 8 {
        return Err(bad("payload length does not match header"));
    }
    let data = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    ImageRgb::from_planes(Dims::new(w, h), data)
}

/// Reads a PNG, or a raw float dump when the file starts with its magic.
pub fn read_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(io_err(path))?;
    if bytes.starts_with(RAW_MAGIC) {
        return decode_raw(path, &bytes);
    }
    Ok(from_rgb8(&image::load_from_memory(&bytes).map_err(image_err(path))?.to_rgb8()))
}

pub fn read_kernel(path: impl AsRef<Path>) -> Result<BlurKernel> {
    let path = path.as_ref();
    BlurKernel::parse(&fs::read_to_string(path).map_err(io_err(path))?)
}

pub fn write_kernel(path: impl AsRef<Path>, kernel: &BlurKernel) -> Result<()> {
    write_text(path, &kernel.to_text())
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    write_bytes(path, text.as_bytes())
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bytes).map_err(io_err(path))
}

/// Plain-text `key = value` pairs; `#` starts a comment. Later keys win.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Parse {
                what: "config".into(),
                detail: format!("line {}: expected key = value", n + 1),
            });
        };
        let key = k.trim().replace('-', "_");
        out.retain(|(existing, _)| *existing != key);
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_key_values(path: impl AsRef<Path>) -> Result<Vec<(String, String)>> {
    let path = path.as_ref();
    parse_key_values(&fs::read_to_string(path).map_err(io_err(path))?)
}

/// Everything needed to rerun a command and get the same bytes back.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub args: Vec<String>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            args,
            inputs: Vec::new(),
            outputs: Vec::new(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_text(path, &self.to_json())
    }
}
