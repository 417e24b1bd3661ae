//! Half-quadratic alternating minimization of the mollified energy
//!
//! ```text
//! Φ(u) = μ/s Σ(|Ku − g| + ε)^s
//!      + Σₘ αₘ/pₘ Σ(|D⁽ᵐ⁾u| + ε)^pₘ + βₘ/qₘ Σ(|D⁽ᵐ⁾Cu| + ε)^qₘ
//! ```
//!
//! Each outer step freezes the half-quadratic weights at the current
//! iterate and minimizes the resulting weighted least-squares problem.
//! This is a majorize-minimize scheme, so `Φ` never increases; the solver
//! is slow but serves as the reference for the split-Bregman solver.

use crate::cg::{conjugate_gradient, CgOutcome};
use crate::config::{SolverConfig, DEFAULT_EPS};
use crate::error::{Error, Result};
use crate::image::Dims;
use crate::metrics::psnr_values;
use crate::model::{axpy, relative_step, RegularizerOps};
use crate::operators::LinearMap;
use crate::trace::{ConvergenceTrace, TraceRow};

/// Closed-form minimizer of `v t² + 1/(ξ v^γ)` over `v > 0`.
///
/// Returns `(v*, min)` with `v* = (p/2)|t|^(p−2)` and `min = |t|^p`.
/// A zero `t` is replaced by the mollified `|t| + ε` with the default ε.
pub fn hqa_scalar_min(t: f64, p: f64) -> Result<(f64, f64)> {
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::config(format!("exponent p must lie in (0, 2), got {p}")));
    }
    let a = if t == 0.0 { DEFAULT_EPS } else { t.abs() };
    let v = 0.5 * p * a.powf(p - 2.0);
    Ok((v, hqa_objective(v, a, p)))
}

/// `v t² + 1/(ξ v^γ)` with `γ = p/(2−p)` and `ξ = 2^(2/(2−p)) / ((2−p) p^(p/(2−p)))`.
pub fn hqa_objective(v: f64, t: f64, p: f64) -> f64 {
    let gamma = p / (2.0 - p);
    let xi = 2f64.powf(2.0 / (2.0 - p)) / ((2.0 - p) * p.powf(gamma));
    v * t * t + 1.0 / (xi * v.powf(gamma))
}

/// Half-quadratic weights frozen at an iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct HqaWeights {
    /// Data weights, one per entry of `Ku − g`.
    pub z: Vec<f64>,
    /// Per order, one weight per entry of `D⁽ᵐ⁾u`.
    pub v: Vec<Vec<f64>>,
    /// Per order, one weight per entry of `D⁽ᵐ⁾Cu`.
    pub w: Vec<Vec<f64>>,
}

fn mollified_weight(x: f64, exponent: f64, eps: f64) -> f64 {
    0.5 * exponent * (x.abs() + eps).powf(exponent - 2.0)
}

fn residual(k: &dyn LinearMap, u: &[f64], g: &[f64]) -> Vec<f64> {
    let mut r = k.apply(u);
    r.iter_mut().zip(g).for_each(|(a, b)| *a -= b);
    r
}

fn check_problem(u: &[f64], g: &[f64], k: &dyn LinearMap, dims: Dims, cfg: &SolverConfig) -> Result<()> {
    cfg.validate()?;
    Error::check_len(dims.field_len(), u.len())?;
    Error::check_len(k.output_len(), g.len())?;
    Error::check_len(k.input_len(), u.len())
}

pub fn hqa_weights(
    u: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
) -> Result<HqaWeights> {
    check_problem(u, g, k, dims, cfg)?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    Ok(weights_with(&ops, u, g, k, cfg))
}

fn weights_with(ops: &RegularizerOps, u: &[f64], g: &[f64], k: &dyn LinearMap, cfg: &SolverConfig) -> HqaWeights {
    let eps = cfg.eps;
    let z = residual(k, u, g).iter().map(|&r| mollified_weight(r, cfg.s, eps)).collect();
    let mut v = Vec::with_capacity(cfg.orders());
    let mut w = Vec::with_capacity(cfg.orders());
    for m in 0..cfg.orders() {
        let (p, q) = (cfg.p[m], cfg.q[m]);
        v.push(ops.grad(m, u).iter().map(|&x| mollified_weight(x, p, eps)).collect());
        w.push(ops.grad_coupled(m, u).iter().map(|&x| mollified_weight(x, q, eps)).collect());
    }
    HqaWeights { z, v, w }
}

/// Value of `Φ` split into its data and per-order regularizer parts.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTerms {
    pub data: f64,
    /// `αₘ/pₘ Σ(|D⁽ᵐ⁾u| + ε)^pₘ` per order.
    pub gradient: Vec<f64>,
    /// `βₘ/qₘ Σ(|D⁽ᵐ⁾Cu| + ε)^qₘ` per order.
    pub coupled: Vec<f64>,
}

impl EnergyTerms {
    pub fn regularizer(&self) -> f64 {
        self.gradient.iter().sum::<f64>() + self.coupled.iter().sum::<f64>()
    }

    pub fn total(&self) -> f64 {
        self.data + self.regularizer()
    }
}

fn power_sum(x: &[f64], exponent: f64, eps: f64) -> f64 {
    x.iter().map(|v| (v.abs() + eps).powf(exponent)).sum()
}

pub fn energy_terms(
    u: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
) -> Result<EnergyTerms> {
    check_problem(u, g, k, dims, cfg)?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    Ok(terms_with(&ops, u, g, k, cfg))
}

fn terms_with(ops: &RegularizerOps, u: &[f64], g: &[f64], k: &dyn LinearMap, cfg: &SolverConfig) -> EnergyTerms {
    let eps = cfg.eps;
    let data = cfg.mu / cfg.s * power_sum(&residual(k, u, g), cfg.s, eps);
    let mut gradient = Vec::new();
    let mut coupled = Vec::new();
    for m in 0..cfg.orders() {
        gradient.push(cfg.alpha[m] / cfg.p[m] * power_sum(&ops.grad(m, u), cfg.p[m], eps));
        coupled.push(cfg.beta[m] / cfg.q[m] * power_sum(&ops.grad_coupled(m, u), cfg.q[m], eps));
    }
    EnergyTerms { data, gradient, coupled }
}

/// `Φ(u)`, the mollified energy.
pub fn energy_phi(u: &[f64], g: &[f64], k: &dyn LinearMap, dims: Dims, cfg: &SolverConfig) -> Result<f64> {
    energy_terms(u, g, k, dims, cfg).map(|t| t.total())
}

/// `Σ c·[wᵢ(|xᵢ| + ε)² + (2−η)/2 (|xᵏᵢ| + ε)^η]` for one term of the majorizer.
fn majorizer_term(x: &[f64], xk: &[f64], weights: &[f64], exponent: f64, eps: f64) -> f64 {
    x.iter()
        .zip(xk)
        .zip(weights)
        .map(|((x, xk), w)| {
            let a = x.abs() + eps;
            w * a * a + 0.5 * (2.0 - exponent) * (xk.abs() + eps).powf(exponent)
        })
        .sum()
}

/// The half-quadratic majorizer `F(u, uᵏ)`: weights frozen at `u_k`,
/// evaluated at `u`. Satisfies `F(u, uᵏ) ≥ Φ(u)` with equality at `u = uᵏ`.
pub fn majorizer_f(
    u: &[f64],
    u_k: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
) -> Result<f64> {
    check_problem(u, g, k, dims, cfg)?;
    Error::check_len(u.len(), u_k.len())?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    let wts = weights_with(&ops, u_k, g, k, cfg);
    Ok(majorizer_with(&ops, &wts, u, u_k, g, k, cfg))
}

fn majorizer_with(
    ops: &RegularizerOps,
    wts: &HqaWeights,
    u: &[f64],
    u_k: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    cfg: &SolverConfig,
) -> f64 {
    let eps = cfg.eps;
    let mut f = cfg.mu / cfg.s * majorizer_term(&residual(k, u, g), &residual(k, u_k, g), &wts.z, cfg.s, eps);
    for m in 0..cfg.orders() {
        f += cfg.alpha[m] / cfg.p[m]
            * majorizer_term(&ops.grad(m, u), &ops.grad(m, u_k), &wts.v[m], cfg.p[m], eps);
        f += cfg.beta[m] / cfg.q[m]
            * majorizer_term(&ops.grad_coupled(m, u), &ops.grad_coupled(m, u_k), &wts.w[m], cfg.q[m], eps);
    }
    f
}

/// `∇ᵤF(u, uᵏ)`. At `u = uᵏ` this equals `∇Φ(uᵏ)`.
pub fn majorizer_gradient(
    u: &[f64],
    u_k: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
) -> Result<Vec<f64>> {
    check_problem(u, g, k, dims, cfg)?;
    Error::check_len(u.len(), u_k.len())?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    let wts = weights_with(&ops, u_k, g, k, cfg);
    let eps = cfg.eps;
    // d/dx w(|x| + ε)² = 2w(|x| + ε) sign(x)
    let inner = |x: Vec<f64>, w: &[f64]| -> Vec<f64> {
        x.iter()
            .zip(w)
            .map(|(x, w)| if *x == 0.0 { 0.0 } else { 2.0 * w * (x.abs() + eps) * x.signum() })
            .collect()
    };
    let mut grad = k.apply_adjoint(&inner(residual(k, u, g), &wts.z));
    grad.iter_mut().for_each(|v| *v *= cfg.mu / cfg.s);
    for m in 0..cfg.orders() {
        let gv = ops.grad_adj(m, &inner(ops.grad(m, u), &wts.v[m]));
        axpy(&mut grad, cfg.alpha[m] / cfg.p[m], &gv);
        let gw = ops.grad_coupled_adj(m, &inner(ops.grad_coupled(m, u), &wts.w[m]));
        axpy(&mut grad, cfg.beta[m] / cfg.q[m], &gw);
    }
    Ok(grad)
}

/// Applies the normal operator of the weighted least-squares subproblem:
/// `(μ/s)KᵀZK + Σₘ (αₘ/pₘ)D⁽ᵐ⁾ᵀVD⁽ᵐ⁾ + (βₘ/qₘ)(D⁽ᵐ⁾C)ᵀW(D⁽ᵐ⁾C)`.
fn normal_apply(
    ops: &RegularizerOps,
    wts: &HqaWeights,
    k: &dyn LinearMap,
    cfg: &SolverConfig,
    x: &[f64],
    out: &mut [f64],
) {
    let mut kx = k.apply(x);
    kx.iter_mut().zip(&wts.z).for_each(|(a, z)| *a *= z);
    k.adjoint_into(&kx, out);
    out.iter_mut().for_each(|v| *v *= cfg.mu / cfg.s);
    for m in 0..cfg.orders() {
        if cfg.alpha[m] > 0.0 {
            let mut dx = ops.grad(m, x);
            dx.iter_mut().zip(&wts.v[m]).for_each(|(a, v)| *a *= v);
            axpy(out, cfg.alpha[m] / cfg.p[m], &ops.grad_adj(m, &dx));
        }
        if cfg.beta[m] > 0.0 {
            let mut dcx = ops.grad_coupled(m, x);
            dcx.iter_mut().zip(&wts.w[m]).for_each(|(a, w)| *a *= w);
            axpy(out, cfg.beta[m] / cfg.q[m], &ops.grad_coupled_adj(m, &dcx));
        }
    }
}

/// Minimizes the weighted quadratic for frozen weights by CG, warm-started
/// at `start`, to `cfg.cg_tol` or `cfg.hqa_cg_max` steps.
pub fn hqa_u_step(
    weights: &HqaWeights,
    start: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, CgOutcome)> {
    check_problem(start, g, k, dims, cfg)?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    Error::check_len(g.len(), weights.z.len())?;
    for m in 0..cfg.orders() {
        Error::check_len(ops.len(m), weights.v[m].len())?;
        Error::check_len(ops.len(m), weights.w[m].len())?;
    }
    u_step_with(&ops, weights, start, g, k, cfg)
}

fn u_step_with(
    ops: &RegularizerOps,
    wts: &HqaWeights,
    start: &[f64],
    g: &[f64],
    k: &dyn LinearMap,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, CgOutcome)> {
    let zg: Vec<f64> = g.iter().zip(&wts.z).map(|(g, z)| g * z).collect();
    let mut rhs = k.apply_adjoint(&zg);
    rhs.iter_mut().for_each(|v| *v *= cfg.mu / cfg.s);
    let mut u = start.to_vec();
    let outcome = conjugate_gradient(
        |x, out| normal_apply(ops, wts, k, cfg, x, out),
        &rhs,
        &mut u,
        cfg.cg_tol,
        cfg.hqa_cg_max,
    )?;
    Ok((u, outcome))
}

/// Output of a solver run.
#[derive(Debug, Clone)]
pub struct Solution {
    pub u: Vec<f64>,
    pub trace: ConvergenceTrace,
}

/// Alternates weight updates and weighted least-squares solves from
/// `K.initial_guess(g)` until the relative step drops below
/// [`SolverConfig::stopping_threshold`] or `max_outer` is reached.
pub fn hqa_solve(
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
    ground_truth: Option<&[f64]>,
) -> Result<Solution> {
    let mut u = k.initial_guess(g);
    check_problem(&u, g, k, dims, cfg)?;
    if let Some(gt) = ground_truth {
        Error::check_len(u.len(), gt.len())?;
    }
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    let threshold = cfg.stopping_threshold(dims.pixels());
    let mut trace = ConvergenceTrace {
        initial_phi: terms_with(&ops, &u, g, k, cfg).total(),
        initial_psnr: ground_truth.map(|gt| psnr_values(gt, &u)),
        threshold,
        ..Default::default()
    };
    for iter in 1..=cfg.max_outer {
        let wts = weights_with(&ops, &u, g, k, cfg);
        let (next, _) = match u_step_with(&ops, &wts, &u, g, k, cfg) {
            Ok(v) => v,
            Err(e) => return Err(Error::numerical(e.to_string(), Some(trace))),
        };
        let phi = terms_with(&ops, &next, g, k, cfg).total();
        if !phi.is_finite() {
            return Err(Error::numerical(format!("energy became {phi} at iteration {iter}"), Some(trace)));
        }
        let majorizer = majorizer_with(&ops, &wts, &next, &u, g, k, cfg);
        let rel_step = relative_step(&u, &next);
        trace.rows.push(TraceRow {
            iter,
            phi,
            rel_step,
            psnr: ground_truth.map(|gt| psnr_values(gt, &next)),
            res_d: None,
            res_e: None,
            majorizer: Some(majorizer),
        });
        u = next;
        if rel_step < threshold {
            trace.converged = true;
            break;
        }
    }
    Ok(Solution { u, trace })
}
