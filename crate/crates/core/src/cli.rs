//! The `ovtv` command line: degrade, restore (denoise, inpaint, deblur),
//! analyze (gamma-map, metrics) and a parameter-sweep bench.
//!
//! Every command assembles all of its outputs in memory first and only
//! then writes them; if any write fails the files already written are
//! removed, so a failed run leaves nothing behind.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::bregman::bregman_solve;
use crate::color::gamma_map;
use crate::config::SolverConfig;
use crate::degradation::{
    add_opponent_noise, apply_blur, make_inpaint_mask_from_overlay, overlay_text, DegradationSpec,
};
use crate::error::{Error, Result};
use crate::hqa::{hqa_solve, Solution};
use crate::image::ImageRgb;
use crate::io;
use crate::metrics::{evaluate, MetricsReport};
use crate::operators::{motion_kernel, Blur, BlurKernel, ForwardModel, MaskOp};

#[derive(Parser, Debug)]
#[command(name = "ovtv", version, about = "Color image restoration with double-opponent vectorial TV")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Blur, add opponent-channel noise and/or stamp a text overlay.
    Degrade(DegradeArgs),
    /// Restore a noisy image (K = identity).
    Denoise(DenoiseArgs),
    /// Fill in masked pixels (K = mask).
    Inpaint(InpaintArgs),
    /// Non-blind deblurring with a known kernel (K = blur).
    Deblur(DeblurArgs),
    /// Export the colorfulness map γ as a grayscale PNG.
    GammaMap(GammaMapArgs),
    /// Print PSNR/SSIM/CIEDE between a reference and a test image.
    Metrics(MetricsArgs),
    /// Degrade and restore every image of a corpus over a parameter grid.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Hqa,
    Bregman,
}

/// Solver and energy parameters. Flags override the config file, which
/// overrides the defaults.
#[derive(Args, Debug, Clone, Default)]
pub struct SolverArgs {
    #[arg(long, value_enum)]
    pub solver: Option<SolverKind>,
    /// Data weight.
    #[arg(long)]
    pub mu: Option<f64>,
    /// Data exponent (split-Bregman needs 2).
    #[arg(long)]
    pub s: Option<f64>,
    /// Highest derivative order, 1 or 2.
    #[arg(long = "M", value_name = "M")]
    pub orders: Option<usize>,
    /// Per-order weights, comma separated.
    #[arg(long, value_name = "LIST")]
    pub alpha: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub beta: Option<String>,
    /// Per-order exponents; q defaults to p.
    #[arg(long, value_name = "LIST")]
    pub p: Option<String>,
    #[arg(long, value_name = "LIST")]
    pub q: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    #[arg(long)]
    pub cg_iters: Option<usize>,
    #[arg(long)]
    pub hqa_cg_max: Option<usize>,
    #[arg(long)]
    pub cg_tol: Option<f64>,
    /// Relative-step threshold used when no noise level is known.
    #[arg(long)]
    pub fallback_tol: Option<f64>,
    /// Plain-text `key = value` file with any of the options above.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
}

/// Files written by the restoration commands.
#[derive(Args, Debug, Clone)]
pub struct RestoreOutputs {
    /// Restored PNG.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Convergence trace CSV [default: <out>.trace.csv].
    #[arg(long, value_name = "CSV")]
    pub trace: Option<PathBuf>,
    /// Run manifest JSON [default: <out>.manifest.json].
    #[arg(long, value_name = "JSON")]
    pub manifest: Option<PathBuf>,
    /// Also write the unclamped float result as a raw dump.
    #[arg(long, value_name = "FILE")]
    pub dump_raw: Option<PathBuf>,
    /// Ground truth: adds PSNR to the trace and prints a metrics line.
    #[arg(long = "ref", value_name = "IMAGE")]
    pub reference: Option<PathBuf>,
    /// Write the metrics line as CSV (needs --ref).
    #[arg(long, value_name = "CSV", requires = "reference")]
    pub metrics_csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DegradeArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Opponent-channel noise std in 8-bit units.
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Motion blur as `LENGTH,ANGLE_DEG`.
    #[arg(long, value_name = "LEN,ANGLE")]
    pub motion: Option<String>,
    /// Blur kernel file.
    #[arg(long, conflicts_with = "motion")]
    pub kernel: Option<PathBuf>,
    /// Stamp a block-letter text band in --key-color.
    #[arg(long)]
    pub overlay_text: bool,
    #[arg(long, default_value = "1,0,1", value_name = "R,G,B")]
    pub key_color: String,
    /// Write the overlay mask (white = observed).
    #[arg(long, requires = "overlay_text")]
    pub mask_out: Option<PathBuf>,
    /// Write the blur kernel used.
    #[arg(long)]
    pub kernel_out: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    pub dump_raw: Option<PathBuf>,
    /// Degradation record [default: <out>.txt].
    #[arg(long)]
    pub sidecar: Option<PathBuf>,
    #[arg(long, value_name = "JSON")]
    pub manifest: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DenoiseArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub outputs: RestoreOutputs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Assumed noise std (8-bit units) for the stopping rule.
    #[arg(long)]
    pub sigma: Option<f64>,
}

#[derive(Args, Debug)]
pub struct InpaintArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub outputs: RestoreOutputs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Mask PNG, nonzero = observed.
    #[arg(long, required_unless_present = "key_color")]
    pub mask: Option<PathBuf>,
    /// Treat pixels of this color as missing.
    #[arg(long, value_name = "R,G,B", conflicts_with = "mask")]
    pub key_color: Option<String>,
    #[arg(long, default_value_t = 0.02)]
    pub key_tol: f64,
}

#[derive(Args, Debug)]
pub struct DeblurArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub outputs: RestoreOutputs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, required_unless_present = "motion")]
    pub kernel: Option<PathBuf>,
    /// Motion kernel as `LENGTH,ANGLE_DEG`.
    #[arg(long, value_name = "LEN,ANGLE", conflicts_with = "kernel")]
    pub motion: Option<String>,
}

#[derive(Args, Debug)]
pub struct GammaMapArgs {
    pub input: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Per-pixel values as `row,col,gamma`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    pub reference: PathBuf,
    pub test: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Directory of PNG images.
    pub corpus: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Noise levels (8-bit units).
    #[arg(long, default_value = "20,40,60,80", value_name = "LIST")]
    pub sigma: String,
    /// Derivative orders to sweep.
    #[arg(long = "orders", default_value = "1", value_name = "LIST")]
    pub sweep_orders: String,
    #[arg(long, value_name = "LIST")]
    pub grid_mu: Option<String>,
    /// Exponents to sweep, applied as p = q for every order.
    #[arg(long, value_name = "LIST")]
    pub grid_p: Option<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Stop each cell with the noise-aware rule for its σ.
    #[arg(long)]
    pub sigma_stop: bool,
    /// Write every restored image here.
    #[arg(long)]
    pub png_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long, value_name = "JSON")]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub solver: SolverArgs,
}

/// Parses `args` (program name first) and runs the command, printing
/// progress to `log`.
pub fn run<I, T>(args: I, log: &mut dyn Write) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = Cli::try_parse_from(&args).map_err(|e| Error::Usage(e.to_string()))?;
    let recorded: Vec<String> = args.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    execute(cli, recorded, log)
}

pub fn execute(cli: Cli, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Degrade(a) => cmd_degrade(a, args, log),
        Command::Denoise(a) => cmd_denoise(a, args, log),
        Command::Inpaint(a) => cmd_inpaint(a, args, log),
        Command::Deblur(a) => cmd_deblur(a, args, log),
        Command::GammaMap(a) => cmd_gamma_map(a, log),
        Command::Metrics(a) => cmd_metrics(a, log),
        Command::Bench(a) => cmd_bench(a, args, log),
    }
}

/// Outputs waiting to be written.
#[derive(Default)]
struct Pending(Vec<(PathBuf, Vec<u8>)>);

impl Pending {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.0.push((path.into(), bytes.into()));
    }

    fn paths(&self) -> Vec<PathBuf> {
        self.0.iter().map(|(p, _)| p.clone()).collect()
    }

    fn commit(self) -> Result<()> {
        let mut written = Vec::new();
        for (path, bytes) in &self.0 {
            if let Err(e) = io::write_bytes(path, bytes) {
                for p in written {
                    let _ = std::fs::remove_file(p);
                }
                return Err(e);
            }
            written.push(path);
        }
        Ok(())
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}{suffix}"))
}

fn parse_list(name: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim().parse::<f64>().map_err(|e| Error::Parse {
                what: name.to_string(),
                detail: format!("{t:?}: {e}"),
            })
        })
        .collect()
}

fn parse_value<T: std::str::FromStr>(name: &str, text: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    text.trim().parse().map_err(|e: T::Err| Error::Parse {
        what: name.to_string(),
        detail: format!("{text:?}: {e}"),
    })
}

fn parse_rgb(text: &str) -> Result<[f64; 3]> {
    let v = parse_list("color", text)?;
    match v.as_slice() {
        [r, g, b] => Ok([*r, *g, *b]),
        _ => Err(Error::Parse {
            what: "color".into(),
            detail: format!("expected R,G,B, got {text:?}"),
        }),
    }
}

fn parse_motion(text: &str) -> Result<BlurKernel> {
    let v = parse_list("motion", text)?;
    match v.as_slice() {
        [len, angle] if *len >= 1.0 && len.fract() == 0.0 => motion_kernel(*len as usize, *angle),
        _ => Err(Error::Parse {
            what: "motion".into(),
            detail: format!("expected LENGTH,ANGLE with integer LENGTH >= 1, got {text:?}"),
        }),
    }
}

/// Solver options after merging defaults, config file and flags.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedSolver {
    pub solver: SolverKind,
    pub config: SolverConfig,
}

#[derive(Default)]
struct Partial {
    solver: Option<SolverKind>,
    mu: Option<f64>,
    s: Option<f64>,
    orders: Option<usize>,
    alpha: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    p: Option<Vec<f64>>,
    q: Option<Vec<f64>>,
    eps: Option<f64>,
    max_outer: Option<usize>,
    cg_iters: Option<usize>,
    hqa_cg_max: Option<usize>,
    cg_tol: Option<f64>,
    fallback_tol: Option<f64>,
    sigma: Option<f64>,
}

impl Partial {
    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "solver" => {
                self.solver = Some(
                    SolverKind::from_str(value.trim(), true).map_err(|e| Error::Parse {
                        what: "solver".into(),
                        detail: e,
                    })?,
                )
            }
            "mu" => self.mu = Some(parse_value(key, value)?),
            "s" => self.s = Some(parse_value(key, value)?),
            "M" | "m" => self.orders = Some(parse_value(key, value)?),
            "alpha" => self.alpha = Some(parse_list(key, value)?),
            "beta" => self.beta = Some(parse_list(key, value)?),
            "p" => self.p = Some(parse_list(key, value)?),
            "q" => self.q = Some(parse_list(key, value)?),
            "eps" => self.eps = Some(parse_value(key, value)?),
            "max_outer" => self.max_outer = Some(parse_value(key, value)?),
            "cg_iters" => self.cg_iters = Some(parse_value(key, value)?),
            "hqa_cg_max" => self.hqa_cg_max = Some(parse_value(key, value)?),
            "cg_tol" => self.cg_tol = Some(parse_value(key, value)?),
            "fallback_tol" => self.fallback_tol = Some(parse_value(key, value)?),
            "sigma" => self.sigma = Some(parse_value(key, value)?),
            other => return Err(Error::config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    fn overlay(&mut self, args: &SolverArgs) -> Result<()> {
        macro_rules! take {
            ($($field:ident),*) => {
                $(if let Some(v) = args.$field { self.$field = Some(v); })*
            };
        }
        take!(solver, mu, s, orders, eps, max_outer, cg_iters, hqa_cg_max, cg_tol, fallback_tol);
        for (name, text, slot) in [
            ("alpha", &args.alpha, &mut self.alpha),
            ("beta", &args.beta, &mut self.beta),
            ("p", &args.p, &mut self.p),
            ("q", &args.q, &mut self.q),
        ] {
            if let Some(t) = text {
                *slot = Some(parse_list(name, t)?);
            }
        }
        Ok(())
    }

    fn build(self) -> Result<ResolvedSolver> {
        let d = SolverConfig::default();
        let m = self
            .orders
            .or(self.alpha.as_ref().map(Vec::len))
            .or(self.p.as_ref().map(Vec::len))
            .unwrap_or(1);
        if !(1..=2).contains(&m) {
            return Err(Error::UnsupportedOrder(m));
        }
        let per_order = [2.0, 1.0];
        let alpha = self.alpha.unwrap_or_else(|| per_order[..m].to_vec());
        let beta = self.beta.unwrap_or_else(|| per_order[..m].to_vec());
        let p = self.p.unwrap_or_else(|| vec![1.0; m]);
        let q = self.q.unwrap_or_else(|| p.clone());
        for (name, v) in [("alpha", &alpha), ("beta", &beta), ("p", &p), ("q", &q)] {
            if v.len() != m {
                return Err(Error::config(format!("{name} has {} entries but M = {m}", v.len())));
            }
        }
        let config = SolverConfig {
            mu: self.mu.unwrap_or(d.mu),
            s: self.s.unwrap_or(d.s),
            alpha,
            beta,
            p,
            q,
            eps: self.eps.unwrap_or(d.eps),
            max_outer: self.max_outer.unwrap_or(d.max_outer),
            cg_iters: self.cg_iters.unwrap_or(d.cg_iters),
            hqa_cg_max: self.hqa_cg_max.unwrap_or(d.hqa_cg_max),
            cg_tol: self.cg_tol.unwrap_or(d.cg_tol),
            sigma: self.sigma,
            fallback_tol: self.fallback_tol.unwrap_or(d.fallback_tol),
        };
        config.validate()?;
        let solver = self.solver.unwrap_or(SolverKind::Bregman);
        if solver == SolverKind::Bregman && config.s != 2.0 {
            return Err(Error::config(format!(
                "split-Bregman needs s = 2 (got {}); use --solver hqa",
                config.s
            )));
        }
        Ok(ResolvedSolver { solver, config })
    }
}

/// Merges defaults, the `--config` file and flags (in increasing priority).
pub fn resolve_solver(args: &SolverArgs, sigma: Option<f64>) -> Result<ResolvedSolver> {
    let mut partial = Partial::default();
    if let Some(path) = &args.config {
        for (k, v) in io::read_key_values(path)? {
            partial.set(&k, &v)?;
        }
    }
    partial.overlay(args)?;
    if sigma.is_some() {
        partial.sigma = sigma;
    }
    partial.build()
}

pub fn solve(
    solver: SolverKind,
    g: &ImageRgb,
    k: &ForwardModel,
    cfg: &SolverConfig,
    reference: Option<&ImageRgb>,
) -> Result<Solution> {
    let gt = reference.map(ImageRgb::as_slice);
    match solver {
        SolverKind::Hqa => hqa_solve(g.as_slice(), k, g.dims(), cfg, gt),
        SolverKind::Bregman => bregman_solve(g.as_slice(), k, g.dims(), cfg, gt),
    }
}

fn load_reference(path: Option<&PathBuf>, input: &ImageRgb) -> Result<Option<ImageRgb>> {
    let Some(path) = path else { return Ok(None) };
    let r = io::read_image(path)?;
    if r.dims() != input.dims() {
        return Err(Error::Dimension {
            expected: input.dims().pixels(),
            actual: r.dims().pixels(),
        });
    }
    Ok(Some(r))
}

fn metrics_csv_row(reference: &Path, test: &Path, m: &MetricsReport) -> String {
    format!(
        "reference,test,psnr,ssim,ciede2000\n{},{},{},{},{}\n",
        reference.display(),
        test.display(),
        m.psnr,
        m.ssim,
        m.ciede
    )
}

/// Shared tail of denoise / inpaint / deblur.
fn restore_and_write(
    command: &str,
    args: Vec<String>,
    input_path: &Path,
    input: &ImageRgb,
    k: &ForwardModel,
    resolved: &ResolvedSolver,
    outputs: &RestoreOutputs,
    extra: serde_json::Value,
    log: &mut dyn Write,
) -> Result<()> {
    let reference = load_reference(outputs.reference.as_ref(), input)?;
    let sol = solve(resolved.solver, input, k, &resolved.config, reference.as_ref())?;
    let restored = ImageRgb::from_planes(input.dims(), sol.u.clone())?;

    let mut pending = Pending::default();
    pending.add(&outputs.out, io::encode_png(&restored)?);
    let trace_path = outputs.trace.clone().unwrap_or_else(|| with_suffix(&outputs.out, ".trace.csv"));
    pending.add(&trace_path, sol.trace.to_csv());
    if let Some(p) = &outputs.dump_raw {
        pending.add(p, io::encode_raw(&restored));
    }
    let mut report = None;
    if let Some(r) = &reference {
        // scored on the 8-bit output that is actually written
        let m = evaluate(r, &restored.clamp01())?;
        if let Some(p) = &outputs.metrics_csv {
            pending.add(p, metrics_csv_row(outputs.reference.as_ref().unwrap(), &outputs.out, &m));
        }
        report = Some(m);
    }
    let manifest_path = outputs.manifest.clone().unwrap_or_else(|| with_suffix(&outputs.out, ".manifest.json"));
    let mut manifest = io::RunManifest::new(command, args);
    manifest.inputs.push(input_path.to_path_buf());
    manifest.inputs.extend(outputs.reference.clone());
    manifest.outputs = pending.paths();
    manifest.parameters = json!({
        "solver": resolved.solver,
        "config": resolved.config,
        "iterations": sol.trace.iterations(),
        "converged": sol.trace.converged,
        "stopping_threshold": sol.trace.threshold,
        "details": extra,
    });
    pending.add(&manifest_path, manifest.to_json());
    pending.commit()?;

    let _ = writeln!(
        log,
        "{}: {} iterations ({}), wrote {}",
        command,
        sol.trace.iterations(),
        if sol.trace.converged { "converged" } else { "iteration cap" },
        outputs.out.display()
    );
    if let Some(m) = report {
        let _ = writeln!(log, "PSNR/SSIM/CIEDE: {}", m.slash_format());
    }
    Ok(())
}

fn cmd_denoise(a: DenoiseArgs, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    let resolved = resolve_solver(&a.solver, a.sigma)?;
    let input = io::read_image(&a.input)?;
    let k = ForwardModel::identity(input.dims());
    restore_and_write("denoise", args, &a.input, &input, &k, &resolved, &a.outputs, json!({}), log)
}

fn cmd_inpaint(a: InpaintArgs, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    let resolved = resolve_solver(&a.solver, None)?;
    let input = io::read_image(&a.input)?;
    let mask = match (&a.mask, &a.key_color) {
        (Some(path), _) => io::read_mask_png(path)?,
        (None, Some(key)) => make_inpaint_mask_from_overlay(&input, parse_rgb(key)?, a.key_tol),
        (None, None) => return Err(Error::Usage("inpaint needs --mask or --key-color".into())),
    };
    if mask.dims() != input.dims() {
        return Err(Error::Dimension {
            expected: input.dims().pixels(),
            actual: mask.dims().pixels(),
        });
    }
    let missing = mask.missing();
    let _ = writeln!(log, "masked pixels: {missing} of {}", input.dims().pixels());
    let k = ForwardModel::Mask(MaskOp::new(mask));
    let extra = json!({ "mask": a.mask, "key_color": a.key_color, "key_tol": a.key_tol, "masked_pixels": missing });
    restore_and_write("inpaint", args, &a.input, &input, &k, &resolved, &a.outputs, extra, log)
}

fn cmd_deblur(a: DeblurArgs, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    let resolved = resolve_solver(&a.solver, None)?;
    let input = io::read_image(&a.input)?;
    let kernel = match (&a.kernel, &a.motion) {
        (Some(path), _) => io::read_kernel(path)?,
        (None, Some(m)) => parse_motion(m)?,
        (None, None) => return Err(Error::Usage("deblur needs --kernel or --motion".into())),
    };
    let _ = write!(log, "kernel {}x{}, anchor {:?}\n{}", kernel.width(), kernel.height(), kernel.anchor(), kernel.to_text());
    let extra = json!({ "kernel": DegradationSpec::blur(&kernel) });
    let k = ForwardModel::Blur(Blur::new(input.dims(), kernel)?);
    restore_and_write("deblur", args, &a.input, &input, &k, &resolved, &a.outputs, extra, log)
}

fn cmd_degrade(a: DegradeArgs, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    let kernel = match (&a.kernel, &a.motion) {
        (Some(path), _) => Some(io::read_kernel(path)?),
        (None, Some(m)) => Some(parse_motion(m)?),
        (None, None) => None,
    };
    if kernel.is_none() && a.sigma.is_none() && !a.overlay_text {
        return Err(Error::Usage(
            "nothing to do: give --sigma, --motion/--kernel or --overlay-text".into(),
        ));
    }
    if let Some(s) = a.sigma {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::config(format!("sigma must be >= 0, got {s}")));
        }
    }
    let key = parse_rgb(&a.key_color)?;
    let mut img = io::read_image(&a.input)?;
    let mut steps = Vec::new();
    let mut pending = Pending::default();
    if let Some(k) = &kernel {
        img = apply_blur(&img, k)?;
        steps.push(DegradationSpec::blur(k));
        if let Some(p) = &a.kernel_out {
            pending.add(p, k.to_text());
        }
    }
    if let Some(sigma) = a.sigma {
        img = add_opponent_noise(&img, sigma, a.seed);
        steps.push(DegradationSpec::OpponentNoise { sigma_8bit: sigma, seed: a.seed });
    }
    if a.overlay_text {
        img = overlay_text(&img, key);
        let mask = make_inpaint_mask_from_overlay(&img, key, 0.0);
        steps.push(DegradationSpec::Mask { key_color: key, tol: 0.0, missing: mask.missing() });
        if let Some(p) = &a.mask_out {
            pending.add(p, io::encode_mask_png(&mask)?);
        }
    }
    pending.add(&a.out, io::encode_png(&img)?);
    if let Some(p) = &a.dump_raw {
        pending.add(p, io::encode_raw(&img));
    }
    let sidecar: String = steps.iter().map(|s| s.to_sidecar() + "\n").collect();
    pending.add(a.sidecar.clone().unwrap_or_else(|| with_suffix(&a.out, ".txt")), sidecar);
    let manifest_path = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    let mut manifest = io::RunManifest::new("degrade", args);
    manifest.inputs.push(a.input.clone());
    manifest.outputs = pending.paths();
    manifest.parameters = json!({ "steps": steps });
    pending.add(manifest_path, manifest.to_json());
    pending.commit()?;
    let _ = writeln!(log, "degrade: {} step(s), wrote {}", steps.len(), a.out.display());
    Ok(())
}

fn cmd_gamma_map(a: GammaMapArgs, log: &mut dyn Write) -> Result<()> {
    let img = io::read_image(&a.input)?;
    let gamma = gamma_map(&img);
    let mut pending = Pending::default();
    pending.add(&a.out, io::encode_gray_png(img.dims(), &gamma)?);
    if let Some(p) = &a.csv {
        let d = img.dims();
        let mut text = String::from("row,col,gamma\n");
        for r in 0..d.height {
            for c in 0..d.width {
                text.push_str(&format!("{r},{c},{}\n", gamma[d.index(r, c)]));
            }
        }
        pending.add(p, text);
    }
    pending.commit()?;
    let max = gamma.iter().cloned().fold(0.0, f64::max);
    let _ = writeln!(log, "gamma-map: max {max:.4}, wrote {}", a.out.display());
    Ok(())
}

fn cmd_metrics(a: MetricsArgs, log: &mut dyn Write) -> Result<()> {
    let r = io::read_image(&a.reference)?;
    let t = io::read_image(&a.test)?;
    let m = evaluate(&r, &t)?;
    if let Some(p) = &a.csv {
        io::write_text(p, &metrics_csv_row(&a.reference, &a.test, &m))?;
    }
    let _ = writeln!(log, "{}", m.slash_format());
    Ok(())
}

/// One restored (image, σ, parameter) combination.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub image: String,
    pub sigma: f64,
    pub cell: usize,
    pub solver: SolverKind,
    pub config: SolverConfig,
    pub metrics: MetricsReport,
    pub iterations: usize,
    pub wall_time: f64,
}

pub const BENCH_HEADER: &str =
    "kind,image,sigma,solver,M,mu,alpha,beta,p,q,psnr,ssim,ciede,iters,wall_time,n,psnr_std,ssim_std,ciede_std";

fn join_semicolon(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

fn params_columns(solver: SolverKind, cfg: &SolverConfig) -> String {
    format!(
        "{},{},{},{},{},{},{}",
        match solver {
            SolverKind::Hqa => "hqa",
            SolverKind::Bregman => "bregman",
        },
        cfg.orders(),
        cfg.mu,
        join_semicolon(&cfg.alpha),
        join_semicolon(&cfg.beta),
        join_semicolon(&cfg.p),
        join_semicolon(&cfg.q)
    )
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Data rows followed by one summary row per (σ, parameter cell).
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = format!("{BENCH_HEADER}\n");
    for r in rows {
        out.push_str(&format!(
            "data,{},{},{},{},{},{},{},{},,,,\n",
            r.image,
            r.sigma,
            params_columns(r.solver, &r.config),
            r.metrics.psnr,
            r.metrics.ssim,
            r.metrics.ciede,
            r.iterations,
            r.wall_time
        ));
    }
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for r in rows {
        if !groups.contains(&(r.sigma, r.cell)) {
            groups.push((r.sigma, r.cell));
        }
    }
    for (sigma, cell) in groups {
        let members: Vec<&BenchRow> = rows.iter().filter(|r| r.sigma == sigma && r.cell == cell).collect();
        let col = |f: fn(&BenchRow) -> f64| mean_std(&members.iter().map(|r| f(r)).collect::<Vec<_>>());
        let (psnr, psnr_sd) = col(|r| r.metrics.psnr);
        let (ssim, ssim_sd) = col(|r| r.metrics.ssim);
        let (ciede, ciede_sd) = col(|r| r.metrics.ciede);
        let (iters, _) = col(|r| r.iterations as f64);
        let (time, _) = col(|r| r.wall_time);
        out.push_str(&format!(
            "summary,,{sigma},{},{psnr},{ssim},{ciede},{iters},{time},{},{psnr_sd},{ssim_sd},{ciede_sd}\n",
            params_columns(members[0].solver, &members[0].config),
            members.len()
        ));
    }
    out
}

/// Noise seed for one (image, σ) pair; every parameter cell of the pair
/// sees the same realization.
pub fn bench_seed(base: u64, image_idx: usize, sigma_idx: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((image_idx as u64) << 20)
        .wrapping_add(sigma_idx as u64)
}

fn corpus_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::config(format!("no PNG images in {}", dir.display())));
    }
    Ok(files)
}

fn cmd_bench(a: BenchArgs, args: Vec<String>, log: &mut dyn Write) -> Result<()> {
    let base = resolve_solver(&a.solver, None)?;
    let sigmas = parse_list("sigma", &a.sigma)?;
    let orders: Vec<usize> = a
        .sweep_orders
        .split(',')
        .map(|t| parse_value("orders", t))
        .collect::<Result<_>>()?;
    let mus = match &a.grid_mu {
        Some(t) => parse_list("grid-mu", t)?,
        None => vec![base.config.mu],
    };
    let ps = match &a.grid_p {
        Some(t) => Some(parse_list("grid-p", t)?),
        None => None,
    };
    let mut cells = Vec::new();
    for &m in &orders {
        if !(1..=2).contains(&m) {
            return Err(Error::UnsupportedOrder(m));
        }
        let extend = |v: &[f64]| -> Vec<f64> { (0..m).map(|i| v.get(i).copied().unwrap_or(1.0)).collect() };
        for &mu in &mus {
            let p_values: Vec<Option<f64>> = match &ps {
                Some(ps) => ps.iter().map(|p| Some(*p)).collect(),
                None => vec![None],
            };
            for p in p_values {
                let mut cfg = base.config.clone();
                cfg.mu = mu;
                cfg.alpha = extend(&base.config.alpha);
                cfg.beta = extend(&base.config.beta);
                cfg.p = p.map_or_else(|| extend(&base.config.p), |p| vec![p; m]);
                cfg.q = p.map_or_else(|| extend(&base.config.q), |p| vec![p; m]);
                cfg.validate()?;
                cells.push(cfg);
            }
        }
    }
    let images = corpus_images(&a.corpus)?;
    let loaded: Vec<(String, ImageRgb)> = images
        .iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            io::read_image(p).map(|img| (name, img))
        })
        .collect::<Result<_>>()?;

    let mut jobs = Vec::new();
    for (ii, _) in loaded.iter().enumerate() {
        for (si, &sigma) in sigmas.iter().enumerate() {
            for (ci, _) in cells.iter().enumerate() {
                jobs.push((ii, si, sigma, ci));
            }
        }
    }
    let run_job = |&(ii, si, sigma, ci): &(usize, usize, f64, usize)| -> Result<(BenchRow, ImageRgb)> {
        let (name, clean) = &loaded[ii];
        let noisy = add_opponent_noise(clean, sigma, bench_seed(a.seed, ii, si));
        let mut cfg = cells[ci].clone();
        cfg.sigma = a.sigma_stop.then_some(sigma);
        let start = Instant::now();
        let sol = solve(base.solver, &noisy, &ForwardModel::identity(clean.dims()), &cfg, None)?;
        let wall_time = start.elapsed().as_secs_f64();
        let restored = ImageRgb::from_planes(clean.dims(), sol.u)?.clamp01();
        Ok((
            BenchRow {
                image: name.clone(),
                sigma,
                cell: ci,
                solver: base.solver,
                config: cfg,
                metrics: evaluate(clean, &restored)?,
                iterations: sol.trace.iterations(),
                wall_time,
            },
            restored,
        ))
    };
    let results: Vec<Result<(BenchRow, ImageRgb)>> = match a.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::config(e.to_string()))?
            .install(|| jobs.par_iter().map(run_job).collect()),
        None => jobs.par_iter().map(run_job).collect(),
    };
    let mut rows = Vec::with_capacity(results.len());
    let mut pending = Pending::default();
    for r in results {
        let (row, restored) = r?;
        if let Some(dir) = &a.png_dir {
            let stem = Path::new(&row.image).file_stem().unwrap().to_string_lossy().into_owned();
            pending.add(dir.join(format!("{stem}_s{}_c{}.png", row.sigma, row.cell)), io::encode_png(&restored)?);
        }
        rows.push(row);
    }
    pending.add(&a.out, bench_csv(&rows));
    let manifest_path = a.manifest.clone().unwrap_or_else(|| with_suffix(&a.out, ".manifest.json"));
    let mut manifest = io::RunManifest::new("bench", args);
    manifest.inputs = images;
    manifest.outputs = pending.paths();
    manifest.parameters = json!({
        "solver": base.solver,
        "sigmas": sigmas,
        "cells": cells,
        "seed": a.seed,
        "sigma_stop": a.sigma_stop,
    });
    pending.add(manifest_path, manifest.to_json());
    if let Some(dir) = &a.png_dir {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.clone(), source })?;
    }
    pending.commit()?;
    let _ = writeln!(log, "bench: {} data rows, wrote {}", rows.len(), a.out.display());
    Ok(())
}
