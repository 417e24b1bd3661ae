//! Removes opponent-space noise from a test pattern with the split-Bregman
//! solver, first and second order, and reports PSNR/SSIM/CIEDE2000.
//!
//! `cargo run --release --example denoise [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::degradation::{add_opponent_noise, make_test_pattern};
use ovtv::{bregman_solve, evaluate, io, ForwardModel, ImageRgb, SolverConfig};

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let sigma = 40.0;
    let clean = make_test_pattern(128, 128);
    let noisy = add_opponent_noise(&clean, sigma, 3);
    let dims = clean.dims();
    let k = ForwardModel::identity(dims);
    println!("noisy     {}", evaluate(&clean, &noisy.clamp01())?.slash_format());

    let first = SolverConfig::first_order(40.0, 2.0, 2.0, 1.0);
    let second = first.clone().with_second_order(1.0, 1.0, 1.0);
    for (name, cfg) in [("M=1", first), ("M=2", second)] {
        let sol = bregman_solve(noisy.as_slice(), &k, dims, &cfg, Some(clean.as_slice()))?;
        let restored = ImageRgb::from_planes(dims, sol.u)?.clamp01();
        println!("{name:<9} {} after {} iterations", evaluate(&clean, &restored)?.slash_format(), sol.trace.iterations());
        let stem = format!("denoised_{}", &name[2..]);
        io::write_png(out.join(format!("{stem}.png")), &restored)?;
        io::write_text(out.join(format!("{stem}.trace.csv")), &sol.trace.to_csv())?;
    }
    Ok(())
}
