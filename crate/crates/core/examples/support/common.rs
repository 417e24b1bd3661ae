// Shared by the examples through `#[path]`; not an example itself.
use std::path::PathBuf;

/// Output directory: first CLI argument, else `ovtv-out`.
pub fn out_dir() -> PathBuf {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "ovtv-out".into()));
    std::fs::create_dir_all(&dir).expect("create output directory");
    dir
}
