//! Builds the synthetic test images and the three degradations: opponent
//! noise, motion blur and a text overlay with its inpainting mask.
//!
//! `cargo run --example degrade [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::degradation::{
    add_opponent_noise, apply_blur, make_inpaint_mask_from_overlay, make_synthetic_isoluminant, make_test_pattern,
    overlay_text, DegradationSpec,
};
use ovtv::io;
use ovtv::operators::motion_kernel;

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let clean = make_test_pattern(128, 128);
    io::write_png(out.join("pattern.png"), &clean)?;
    io::write_png(out.join("isoluminant.png"), &make_synthetic_isoluminant(64, 64)?)?;

    let noisy = add_opponent_noise(&clean, 40.0, 1);
    io::write_png(out.join("pattern_noisy.png"), &noisy.clamp01())?;
    let spec = DegradationSpec::OpponentNoise { sigma_8bit: 40.0, seed: 1 };
    print!("{}", spec.to_sidecar());

    let kernel = motion_kernel(9, 10.0)?;
    let blurred = apply_blur(&clean, &kernel)?;
    io::write_png(out.join("pattern_blurred.png"), &blurred)?;
    io::write_kernel(out.join("motion.txt"), &kernel)?;
    print!("{}", DegradationSpec::blur(&kernel).to_sidecar());

    let key = [1.0, 0.0, 1.0];
    let overlaid = overlay_text(&clean, key);
    let mask = make_inpaint_mask_from_overlay(&overlaid, key, 0.02);
    io::write_png(out.join("pattern_text.png"), &overlaid)?;
    io::write_mask_png(out.join("pattern_text_mask.png"), &mask)?;
    println!("overlay hides {} of {} pixels", mask.missing(), clean.dims().pixels());
    println!("wrote images to {}", out.display());
    Ok(())
}
