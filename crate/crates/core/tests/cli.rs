use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use ovtv::degradation::{add_opponent_noise, make_test_pattern};
use ovtv::image::{Dims, ImageRgb};
use ovtv::io;
use ovtv::operators::Mask;

fn run(args: &[&str]) -> ovtv::Result<String> {
    let mut out = Vec::new();
    let argv = std::iter::once("ovtv").chain(args.iter().copied());
    ovtv::cli::run(argv, &mut out)?;
    Ok(String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        Fixture { dir: tempfile::tempdir().unwrap() }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn clean(&self) -> PathBuf {
        let path = self.path("clean.png");
        if !path.exists() {
            io::write_png(&path, &make_test_pattern(24, 20)).unwrap();
        }
        path
    }

    fn noisy(&self) -> PathBuf {
        let path = self.path("noisy.png");
        if !path.exists() {
            let clean = io::read_png(self.clean()).unwrap();
            io::write_png(&path, &add_opponent_noise(&clean, 30.0, 1)).unwrap();
        }
        path
    }
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn degrade_writes_image_and_sidecar() {
    let f = Fixture::new();
    let out = f.path("deg.png");
    let raw = f.path("deg.f64");
    run(&["degrade", p(&f.clean()), "-o", p(&out), "--sigma", "40", "--seed", "7", "--motion", "5,30", "--dump-raw", p(&raw)]).unwrap();
    let sidecar = fs::read_to_string(f.path("deg.txt")).unwrap();
    assert!(sidecar.contains("kind = blur"));
    assert!(sidecar.contains("kind = opponent_noise"));
    assert!(sidecar.contains("sigma = 40"));
    assert!(sidecar.contains("seed = 7"));
    assert!(sidecar.contains("kernel = "));
    let float = io::read_raw(&raw).unwrap();
    let png = io::read_png(&out).unwrap();
    assert_eq!(float.dims(), png.dims());
    assert!(f.path("deg.manifest.json").exists());

    let again = f.path("again.png");
    run(&["degrade", p(&f.clean()), "-o", p(&again), "--sigma", "40", "--seed", "7", "--motion", "5,30"]).unwrap();
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn degrade_needs_something_to_do() {
    let f = Fixture::new();
    let out = f.path("x.png");
    assert!(run(&["degrade", p(&f.clean()), "-o", p(&out)]).is_err());
    assert!(!out.exists());
}

#[test]
fn denoise_convex_bregman_with_reference() {
    let f = Fixture::new();
    let out = f.path("den.png");
    let csv = f.path("m.csv");
    let log = run(&[
        "denoise", p(&f.noisy()), "-o", p(&out), "--p", "1", "--q", "1", "--s", "2", "--solver", "bregman",
        "--ref", p(&f.clean()), "--metrics-csv", p(&csv),
    ])
    .unwrap();
    let line = log.lines().find(|l| l.starts_with("PSNR/SSIM/CIEDE: ")).unwrap();
    let parts: Vec<&str> = line.trim_start_matches("PSNR/SSIM/CIEDE: ").split('/').collect();
    assert_eq!(parts.len(), 3);
    assert_eq!(parts[0].split('.').nth(1).unwrap().len(), 1);
    assert_eq!(parts[1].split('.').nth(1).unwrap().len(), 2);
    let trace = fs::read_to_string(f.path("den.trace.csv")).unwrap();
    assert!(trace.starts_with("iter,phi,rel_step,psnr,res_d,res_e\n"));
    assert!(trace.lines().nth(1).unwrap().split(',').nth(3).unwrap().parse::<f64>().is_ok());
    assert!(fs::read_to_string(&csv).unwrap().starts_with("reference,test,psnr,ssim,ciede2000\n"));
    let m = manifest(&f.path("den.manifest.json"));
    assert_eq!(m["parameters"]["solver"], "bregman");
    assert_eq!(m["parameters"]["config"]["p"], serde_json::json!([1.0]));
}

#[test]
fn denoise_second_order_flags() {
    let f = Fixture::new();
    let out = f.path("den2.png");
    run(&["denoise", p(&f.noisy()), "-o", p(&out), "--M", "2", "--alpha", "2,1", "--beta", "2,1", "--mu", "80", "--max-outer", "5"]).unwrap();
    let m = manifest(&f.path("den2.manifest.json"));
    let cfg = &m["parameters"]["config"];
    assert_eq!(cfg["alpha"], serde_json::json!([2.0, 1.0]));
    assert_eq!(cfg["beta"], serde_json::json!([2.0, 1.0]));
    assert_eq!(cfg["mu"], serde_json::json!(80.0));
    assert!(run(&["denoise", p(&f.noisy()), "-o", p(&out), "--M", "2", "--alpha", "2"]).is_err());
    assert!(run(&["denoise", p(&f.noisy()), "-o", p(&out), "--M", "3"]).is_err());
}

#[test]
fn hqa_solver_and_data_exponent() {
    let f = Fixture::new();
    let out = f.path("h.png");
    run(&["denoise", p(&f.noisy()), "-o", p(&out), "--solver", "hqa", "--s", "1.5", "--p", "0.8", "--max-outer", "3"]).unwrap();
    assert!(out.exists());
    let err = run(&["denoise", p(&f.noisy()), "-o", p(&f.path("b.png")), "--solver", "bregman", "--s", "1.5"]).unwrap_err();
    assert!(err.to_string().contains("s = 2"));
}

#[test]
fn config_file_precedence() {
    let f = Fixture::new();
    let cfg = f.path("run.cfg");
    fs::write(&cfg, "# sweep\nmu = 10\nmax-outer = 4\np = 0.7\n").unwrap();
    let out = f.path("c.png");
    run(&["denoise", p(&f.noisy()), "-o", p(&out), "--config", p(&cfg)]).unwrap();
    let m = manifest(&f.path("c.manifest.json"));
    assert_eq!(m["parameters"]["config"]["mu"], serde_json::json!(10.0));
    assert_eq!(m["parameters"]["config"]["q"], serde_json::json!([0.7]));
    run(&["denoise", p(&f.noisy()), "-o", p(&out), "--config", p(&cfg), "--mu", "20"]).unwrap();
    let m = manifest(&f.path("c.manifest.json"));
    assert_eq!(m["parameters"]["config"]["mu"], serde_json::json!(20.0));
    assert_eq!(m["parameters"]["config"]["max_outer"], serde_json::json!(4));

    fs::write(&cfg, "lambda = 3\n").unwrap();
    assert!(run(&["denoise", p(&f.noisy()), "-o", p(&out), "--config", p(&cfg)]).is_err());
}

#[test]
fn unknown_flag_is_rejected() {
    let f = Fixture::new();
    let err = run(&["denoise", p(&f.noisy()), "-o", p(&f.path("u.png")), "--lambda", "3"]).unwrap_err();
    assert!(matches!(err, ovtv::Error::Usage(_)));
}

#[test]
fn missing_input_fails_without_outputs() {
    let f = Fixture::new();
    let out = f.path("never.png");
    let bin = env!("CARGO_BIN_EXE_ovtv");
    let status = Command::new(bin)
        .args(["denoise", p(&f.path("absent.png")), "-o", p(&out)])
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("absent.png"));
    assert!(!out.exists());
    assert!(!f.path("never.trace.csv").exists());
    assert!(!f.path("never.manifest.json").exists());

    let ok = Command::new(bin)
        .args(["metrics", p(&f.clean()), p(&f.noisy())])
        .output()
        .unwrap();
    assert!(ok.status.success());
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let f = Fixture::new();
    let out = f.path("partial.png");
    let trace = f.path("no/such/dir/trace.csv");
    assert!(run(&["denoise", p(&f.noisy()), "-o", p(&out), "--trace", p(&trace), "--max-outer", "2"]).is_err());
    assert!(!out.exists());
}

#[test]
fn all_true_mask_reduces_to_denoising() {
    let f = Fixture::new();
    let noisy = io::read_png(f.noisy()).unwrap();
    let mask = f.path("mask.png");
    io::write_mask_png(&mask, &Mask::all(noisy.dims(), true)).unwrap();
    let a = f.path("inp.png");
    let b = f.path("den.png");
    let log = run(&["inpaint", p(&f.noisy()), "-o", p(&a), "--mask", p(&mask), "--max-outer", "10"]).unwrap();
    assert!(log.contains("masked pixels: 0"));
    run(&["denoise", p(&f.noisy()), "-o", p(&b), "--max-outer", "10"]).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn masked_region_of_constant_image_is_filled() {
    let f = Fixture::new();
    let dims = Dims::new(20, 16);
    let color = [0.3, 0.55, 0.8];
    let img = ImageRgb::filled(dims, color);
    let input = f.path("const.f64");
    io::write_raw(&input, &img).unwrap();
    let keep = (0..dims.pixels()).map(|i| {
        let (r, c) = (i / dims.width, i % dims.width);
        !((5..11).contains(&r) && (6..14).contains(&c))
    });
    let mask = f.path("hole.png");
    io::write_mask_png(&mask, &Mask::new(dims, keep.collect()).unwrap()).unwrap();
    let raw = f.path("filled.f64");
    run(&["inpaint", p(&input), "-o", p(&f.path("filled.png")), "--mask", p(&mask), "--dump-raw", p(&raw)]).unwrap();
    let out = io::read_raw(&raw).unwrap();
    for i in 0..dims.pixels() {
        let px = out.pixel(i);
        for c in 0..3 {
            assert!((px[c] - color[c]).abs() <= 1e-3, "pixel {i}: {px:?}");
        }
    }
}

#[test]
fn inpaint_mask_dims_must_match() {
    let f = Fixture::new();
    let mask = f.path("small.png");
    io::write_mask_png(&mask, &Mask::all(Dims::new(5, 5), true)).unwrap();
    let out = f.path("o.png");
    assert!(run(&["inpaint", p(&f.noisy()), "-o", p(&out), "--mask", p(&mask)]).is_err());
    assert!(!out.exists());
}

#[test]
fn text_overlay_demo() {
    let f = Fixture::new();
    let big = f.path("big.png");
    io::write_png(&big, &make_test_pattern(64, 48)).unwrap();
    let stamped = f.path("stamped.png");
    let mask_out = f.path("stamp_mask.png");
    run(&["degrade", p(&big), "-o", p(&stamped), "--overlay-text", "--mask-out", p(&mask_out)]).unwrap();
    let expected = io::read_mask_png(&mask_out).unwrap().missing();
    assert!(expected > 0);
    let log = run(&["inpaint", p(&stamped), "-o", p(&f.path("r.png")), "--key-color", "1,0,1", "--max-outer", "20"]).unwrap();
    assert!(log.contains(&format!("masked pixels: {expected} of")), "{log}");
}

#[test]
fn deblur_identity_kernel_matches_denoise() {
    let f = Fixture::new();
    let kernel = f.path("id.txt");
    fs::write(&kernel, "1\n").unwrap();
    let a = f.path("db.png");
    let b = f.path("dn.png");
    let log = run(&["deblur", p(&f.noisy()), "-o", p(&a), "--kernel", p(&kernel), "--max-outer", "8"]).unwrap();
    assert!(log.contains("kernel 1x1"));
    run(&["denoise", p(&f.noisy()), "-o", p(&b), "--max-outer", "8"]).unwrap();
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn deblur_echoes_kernel_and_checks_size() {
    let f = Fixture::new();
    let log = run(&["deblur", p(&f.noisy()), "-o", p(&f.path("m.png")), "--motion", "9,10", "--max-outer", "3"]).unwrap();
    assert!(log.contains("kernel 9x"), "{log}");
    let m = manifest(&f.path("m.manifest.json"));
    assert!(m["parameters"]["details"]["kernel"]["kernel"].is_array());
    let out = f.path("big.png");
    assert!(run(&["deblur", p(&f.noisy()), "-o", p(&out), "--motion", "40,0"]).is_err());
    assert!(!out.exists());
}

#[test]
fn gamma_map_png() {
    let f = Fixture::new();
    let out = f.path("gamma.png");
    let csv = f.path("gamma.csv");
    run(&["gamma-map", p(&f.clean()), "-o", p(&out), "--csv", p(&csv)]).unwrap();
    let g = io::read_png(&out).unwrap();
    let max = g.as_slice().iter().cloned().fold(0.0, f64::max);
    assert_eq!(max, 1.0);
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 24 * 20 + 1);
}

#[test]
fn metrics_slash_format_and_csv() {
    let f = Fixture::new();
    let csv = f.path("m.csv");
    let log = run(&["metrics", p(&f.clean()), p(&f.clean()), "--csv", p(&csv)]).unwrap();
    assert_eq!(log.trim(), "inf/1.00/0.00");
    let body = fs::read_to_string(&csv).unwrap();
    assert_eq!(body.lines().count(), 2);
}

fn bench_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn bench_single_cell() {
    let f = Fixture::new();
    let corpus = f.path("corpus");
    fs::create_dir(&corpus).unwrap();
    io::write_png(corpus.join("a.png"), &make_test_pattern(16, 16)).unwrap();
    let out = f.path("bench.csv");
    run(&["bench", p(&corpus), "-o", p(&out), "--sigma", "20", "--max-outer", "5"]).unwrap();
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), ovtv::cli::BENCH_HEADER);
    let rows = bench_rows(&out);
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], "data");
    assert_eq!(rows[1][0], "summary");
}

#[test]
fn bench_summary_recomputes() {
    let f = Fixture::new();
    let corpus = f.path("corpus");
    fs::create_dir(&corpus).unwrap();
    io::write_png(corpus.join("a.png"), &make_test_pattern(16, 16)).unwrap();
    io::write_png(corpus.join("b.png"), &make_test_pattern(20, 12)).unwrap();
    io::write_png(corpus.join("c.png"), &ImageRgb::filled(Dims::new(12, 12), [0.2, 0.5, 0.4])).unwrap();
    let out = f.path("bench.csv");
    let png_dir = f.path("pngs");
    run(&[
        "bench", p(&corpus), "-o", p(&out), "--sigma", "20,60", "--grid-p", "0.8,1", "--orders", "1,2",
        "--max-outer", "4", "--threads", "2", "--png-dir", p(&png_dir),
    ])
    .unwrap();
    let rows = bench_rows(&out);
    let data: Vec<_> = rows.iter().filter(|r| r[0] == "data").collect();
    let summary: Vec<_> = rows.iter().filter(|r| r[0] == "summary").collect();
    assert_eq!(data.len(), 3 * 2 * 4);
    assert_eq!(summary.len(), 2 * 4);
    assert_eq!(fs::read_dir(&png_dir).unwrap().count(), 24);
    // header: kind,image,sigma,solver,M,mu,alpha,beta,p,q,psnr,ssim,ciede,iters,wall_time,n,...
    let key = |r: &Vec<String>| r[2..10].join(",");
    for s in &summary {
        let members: Vec<_> = data.iter().filter(|d| key(d) == key(s)).collect();
        assert_eq!(members.len(), 3);
        assert_eq!(s[15], "3");
        for (col, sd_col) in [(10, 16), (11, 17), (12, 18)] {
            let v: Vec<f64> = members.iter().map(|d| d[col].parse().unwrap()).collect();
            let (mean, sd) = ovtv::cli::mean_std(&v);
            let mean_by_hand = v.iter().sum::<f64>() / 3.0;
            let sd_by_hand = (v.iter().map(|x| (x - mean_by_hand).powi(2)).sum::<f64>() / 3.0).sqrt();
            let got_mean: f64 = s[col].parse().unwrap();
            let got_sd: f64 = s[sd_col].parse().unwrap();
            assert!((got_mean - mean_by_hand).abs() <= 1e-9 * mean.abs().max(1.0));
            assert!((got_sd - sd_by_hand).abs() <= 1e-9 * sd.max(1.0));
        }
    }
}

#[test]
fn bench_is_reproducible_and_rejects_empty_corpus() {
    let f = Fixture::new();
    let corpus = f.path("corpus");
    fs::create_dir(&corpus).unwrap();
    let out = f.path("bench.csv");
    assert!(run(&["bench", p(&corpus), "-o", p(&out)]).is_err());
    io::write_png(corpus.join("a.png"), &make_test_pattern(16, 16)).unwrap();
    let strip_time = |path: &Path| -> Vec<String> {
        bench_rows(path).into_iter().map(|mut r| {
            r[14].clear();
            r.join(",")
        }).collect()
    };
    run(&["bench", p(&corpus), "-o", p(&out), "--sigma", "40", "--max-outer", "5", "--seed", "3"]).unwrap();
    let first = strip_time(&out);
    run(&["bench", p(&corpus), "-o", p(&out), "--sigma", "40", "--max-outer", "5", "--seed", "3", "--threads", "1"]).unwrap();
    assert_eq!(first, strip_time(&out));
}
