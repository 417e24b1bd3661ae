//! Non-blind motion deblurring: a 9 px, 10° motion kernel applied to the
//! bundled test image and inverted with a strong data weight.
//!
//! `cargo run --release --example deblur [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::degradation::apply_blur;
use ovtv::operators::motion_kernel;
use ovtv::{bregman_solve, evaluate, io, Blur, ForwardModel, ImageRgb, SolverConfig};

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let clean = io::read_png(concat!(env!("CARGO_MANIFEST_DIR"), "/assets/test_pattern.png"))?;
    let dims = clean.dims();
    let kernel = motion_kernel(9, 10.0)?;
    println!("kernel {}x{}, anchor {:?}", kernel.width(), kernel.height(), kernel.anchor());
    let blurred = apply_blur(&clean, &kernel)?;
    let k = ForwardModel::Blur(Blur::new(dims, kernel)?);

    let cfg = SolverConfig::first_order(1000.0, 2.0, 2.0, 1.0);
    let sol = bregman_solve(blurred.as_slice(), &k, dims, &cfg, Some(clean.as_slice()))?;
    let restored = ImageRgb::from_planes(dims, sol.u)?.clamp01();
    println!("blurred  {}", evaluate(&clean, &blurred)?.slash_format());
    println!("restored {} ({} iterations)", evaluate(&clean, &restored)?.slash_format(), sol.trace.iterations());
    io::write_png(out.join("deblur_input.png"), &blurred)?;
    io::write_png(out.join("deblur_output.png"), &restored)?;
    Ok(())
}
