//! Colorfulness map γ(u) = uᵀPu of the test pattern, before and after noise.
//! Gray regions map to zero; opponent noise lights them up.
//!
//! `cargo run --example gamma_map [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::color::{gamma, gamma_map};
use ovtv::degradation::{add_opponent_noise, make_test_pattern};
use ovtv::io;

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let clean = make_test_pattern(128, 128);
    let noisy = add_opponent_noise(&clean, 40.0, 5);
    for (name, img) in [("clean", &clean), ("noisy", &noisy)] {
        let map = gamma_map(img);
        let mean = map.iter().sum::<f64>() / map.len() as f64;
        let max = map.iter().cloned().fold(0.0, f64::max);
        println!("{name}: mean γ {mean:.4}, max γ {max:.4}");
        io::write_gray_png(out.join(format!("gamma_{name}.png")), img.dims(), &map)?;
    }
    for rgb in [[0.4, 0.4, 0.4], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.2, 0.5, 0.9]] {
        println!("γ{rgb:?} = {:.4}", gamma(rgb));
    }
    Ok(())
}
