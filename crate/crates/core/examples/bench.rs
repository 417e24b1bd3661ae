//! Small benchmark through the CLI entry point: a two-image corpus, two
//! noise levels, M = 1 and 2. Writes a CSV with per-run rows and per-cell
//! mean/std summaries.
//!
//! `cargo run --release --example bench [OUT_DIR]`

#[path = "support/common.rs"]
mod common;

use ovtv::degradation::{make_synthetic_isoluminant, make_test_pattern};
use ovtv::io;

fn main() -> ovtv::Result<()> {
    let out = common::out_dir();
    let corpus = out.join("corpus");
    std::fs::create_dir_all(&corpus).map_err(|source| ovtv::Error::Io { path: corpus.clone(), source })?;
    io::write_png(corpus.join("pattern.png"), &make_test_pattern(48, 48))?;
    io::write_png(corpus.join("isoluminant.png"), &make_synthetic_isoluminant(48, 48)?)?;

    let csv = out.join("bench.csv");
    let args = [
        "ovtv", "bench", corpus.to_str().unwrap(), "-o", csv.to_str().unwrap(),
        "--sigma", "20,40", "--orders", "1,2", "--mu", "40",
    ];
    ovtv::cli::run(args, &mut std::io::stdout())?;
    print!("{}", std::fs::read_to_string(&csv).map_err(|source| ovtv::Error::Io { path: csv.clone(), source })?);
    Ok(())
}
