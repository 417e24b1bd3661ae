//! Quality metrics: PSNR, SSIM and mean CIEDE2000, plus a check of the
//! color difference against the published verification pairs.
//!
//! `cargo run --example metrics`

use ovtv::degradation::{add_opponent_noise, make_test_pattern};
use ovtv::metrics::{delta_e_2000, Lab, CIEDE2000_REFERENCE_PAIRS};
use ovtv::{evaluate, Dims, ImageRgb};

fn main() -> ovtv::Result<()> {
    let clean = make_test_pattern(64, 64);
    for sigma in [10.0, 20.0, 40.0, 80.0] {
        let noisy = add_opponent_noise(&clean, sigma, 1).clamp01();
        println!("σ = {sigma:>2}: PSNR/SSIM/CIEDE {}", evaluate(&clean, &noisy)?.slash_format());
    }

    let dims = Dims::new(16, 16);
    let shifted = evaluate(&ImageRgb::filled(dims, [0.2; 3]), &ImageRgb::filled(dims, [0.3; 3]))?;
    println!("uniform offset of 0.1: PSNR {} dB", shifted.psnr);

    let worst = CIEDE2000_REFERENCE_PAIRS
        .iter()
        .map(|r| (delta_e_2000(Lab { l: r[0], a: r[1], b: r[2] }, Lab { l: r[3], a: r[4], b: r[5] }) - r[6]).abs())
        .fold(0.0, f64::max);
    println!("CIEDE2000 reference pairs: worst deviation {worst:.2e}");
    Ok(())
}
