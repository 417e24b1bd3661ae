//! Removes a magenta text overlay: the key color defines the mask, and the
//! masked pixels are filled by the regularizer alone.
//!
//! `cargo run --release --example inpaint [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::degradation::{make_inpaint_mask_from_overlay, make_test_pattern, overlay_text};
use ovtv::{bregman_solve, evaluate, io, ForwardModel, ImageRgb, MaskOp, SolverConfig};

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let clean = make_test_pattern(96, 96);
    let key = [1.0, 0.0, 1.0];
    let damaged = overlay_text(&clean, key);
    let mask = make_inpaint_mask_from_overlay(&damaged, key, 0.02);
    println!("masked pixels: {} of {}", mask.missing(), clean.dims().pixels());

    let dims = clean.dims();
    let k = ForwardModel::Mask(MaskOp::new(mask));
    let mut cfg = SolverConfig::first_order(200.0, 2.0, 2.0, 1.0);
    cfg.max_outer = 1000;
    let sol = bregman_solve(damaged.as_slice(), &k, dims, &cfg, Some(clean.as_slice()))?;
    let restored = ImageRgb::from_planes(dims, sol.u)?.clamp01();
    println!("damaged  {}", evaluate(&clean, &damaged)?.slash_format());
    println!("restored {} ({} iterations)", evaluate(&clean, &restored)?.slash_format(), sol.trace.iterations());
    io::write_png(out.join("inpaint_input.png"), &damaged)?;
    io::write_png(out.join("inpaint_output.png"), &restored)?;
    Ok(())
}
