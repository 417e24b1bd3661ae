//! Split-Bregman solver for the quadratic-data (`s = 2`) energy.
//!
//! Auxiliaries `dₘ ≈ D⁽ᵐ⁾u` and `eₘ ≈ D⁽ᵐ⁾Cu` carry the regularizers;
//! `αₘ` and `βₘ` are the quadratic penalty weights tying them to `u`.
//! One iteration is
//!
//! 1. `u`: a few warm-started CG steps on
//!    `(μKᵀK + Σ αDᵀD + β(DC)ᵀDC) u = μKᵀg + Σ αDᵀ(d − b₁) + β(DC)ᵀ(e − b₂)`,
//! 2. `d, e`: soft-thresholding at `1/α` (`p = 1`) or the half-quadratic
//!    closed form `(Du + b₁) / (1 + 2v/α)` with `v` taken from the previous `d`,
//! 3. `b₁ += Du − d`, `b₂ += DCu − e`.
//!
//! The fixed point minimizes `μ/2‖Ku − g‖² + Σₘ ‖D⁽ᵐ⁾u‖ₚᵖ + ‖D⁽ᵐ⁾Cu‖_q^q`
//! (see [`split_objective`]).

use crate::cg::{conjugate_gradient, CgOutcome};
use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::hqa::Solution;
use crate::image::Dims;
use crate::metrics::psnr_values;
use crate::model::{axpy, diff_norm_sq, relative_step, RegularizerOps};
use crate::operators::LinearMap;
use crate::trace::{ConvergenceTrace, TraceRow};

/// Soft threshold `sign(x)·max(|x| − τ, 0)`.
pub fn shrink(x: &[f64], tau: f64) -> Vec<f64> {
    x.iter().map(|&v| shrink_scalar(v, tau)).collect()
}

#[inline]
pub fn shrink_scalar(x: f64, tau: f64) -> f64 {
    if tau.is_infinite() {
        return 0.0;
    }
    x.signum() * (x.abs() - tau).max(0.0)
}

/// Minimizer of `|d|^p + (α/2)(d − x)²` approximated by one half-quadratic
/// step with weight `v` frozen at `d_old`.
fn auxiliary_update(x: &[f64], d_old: &[f64], penalty: f64, exponent: f64, eps: f64) -> Vec<f64> {
    if exponent == 1.0 {
        return shrink(x, 1.0 / penalty);
    }
    x.iter()
        .zip(d_old)
        .map(|(&x, &d)| {
            let v = 0.5 * exponent * (d.abs() + eps).powf(exponent - 2.0);
            x / (1.0 + 2.0 * v / penalty)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BregmanState {
    pub u: Vec<f64>,
    /// Per order, `≈ D⁽ᵐ⁾u`.
    pub d: Vec<Vec<f64>>,
    /// Per order, `≈ D⁽ᵐ⁾Cu`.
    pub e: Vec<Vec<f64>>,
    pub b1: Vec<Vec<f64>>,
    pub b2: Vec<Vec<f64>>,
}

/// A split-Bregman run over one problem instance.
pub struct SplitBregman<'a> {
    ops: RegularizerOps,
    cfg: &'a SolverConfig,
    k: &'a dyn LinearMap,
    g: &'a [f64],
    pub state: BregmanState,
}

impl<'a> SplitBregman<'a> {
    /// Starts at `u⁰ = K.initial_guess(g)`, `b = 0`, and `(d, e)` obtained
    /// by one auxiliary update of `(Du⁰, DCu⁰)`.
    pub fn new(g: &'a [f64], k: &'a dyn LinearMap, dims: Dims, cfg: &'a SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if cfg.s != 2.0 {
            return Err(Error::config(format!(
                "the split-Bregman solver needs s = 2 (got s = {}); use the half-quadratic solver",
                cfg.s
            )));
        }
        Error::check_len(dims.field_len(), k.input_len())?;
        Error::check_len(k.output_len(), g.len())?;
        let ops = RegularizerOps::new(dims, cfg.orders())?;
        let u = k.initial_guess(g);
        let m = cfg.orders();
        let du: Vec<_> = (0..m).map(|i| ops.grad(i, &u)).collect();
        let dcu: Vec<_> = (0..m).map(|i| ops.grad_coupled(i, &u)).collect();
        let state = BregmanState {
            b1: du.iter().map(|x| vec![0.0; x.len()]).collect(),
            b2: dcu.iter().map(|x| vec![0.0; x.len()]).collect(),
            d: du,
            e: dcu,
            u,
        };
        let mut solver = SplitBregman {
            ops,
            cfg,
            k,
            g,
            state,
        };
        let u0 = solver.state.u.clone();
        let (d, e) = solver.de_update(&u0);
        solver.state.d = d;
        solver.state.e = e;
        Ok(solver)
    }

    pub fn ops(&self) -> &RegularizerOps {
        &self.ops
    }

    fn normal_apply(&self, x: &[f64], out: &mut [f64]) {
        let cfg = self.cfg;
        self.k.adjoint_into(&self.k.apply(x), out);
        out.iter_mut().for_each(|v| *v *= cfg.mu);
        for m in 0..cfg.orders() {
            if cfg.alpha[m] > 0.0 {
                let dtd = self.ops.grad_adj(m, &self.ops.grad(m, x));
                axpy(out, cfg.alpha[m], &dtd);
            }
            if cfg.beta[m] > 0.0 {
                let ctc = self.ops.grad_coupled_adj(m, &self.ops.grad_coupled(m, x));
                axpy(out, cfg.beta[m], &ctc);
            }
        }
    }

    fn u_rhs(&self) -> Vec<f64> {
        let cfg = self.cfg;
        let st = &self.state;
        let mut rhs = self.k.apply_adjoint(self.g);
        rhs.iter_mut().for_each(|v| *v *= cfg.mu);
        for m in 0..cfg.orders() {
            if cfg.alpha[m] > 0.0 {
                let t: Vec<f64> = st.d[m].iter().zip(&st.b1[m]).map(|(d, b)| d - b).collect();
                axpy(&mut rhs, cfg.alpha[m], &self.ops.grad_adj(m, &t));
            }
            if cfg.beta[m] > 0.0 {
                let t: Vec<f64> = st.e[m].iter().zip(&st.b2[m]).map(|(e, b)| e - b).collect();
                axpy(&mut rhs, cfg.beta[m], &self.ops.grad_coupled_adj(m, &t));
            }
        }
        rhs
    }

    /// `cfg.cg_iters` CG steps on the u-subproblem, warm-started at the
    /// current `u`.
    pub fn u_update(&self) -> Result<(Vec<f64>, CgOutcome)> {
        self.u_update_with(self.cfg.cg_iters)
    }

    pub fn u_update_with(&self, cg_iters: usize) -> Result<(Vec<f64>, CgOutcome)> {
        let rhs = self.u_rhs();
        let mut u = self.state.u.clone();
        let out = conjugate_gradient(|x, o| self.normal_apply(x, o), &rhs, &mut u, self.cfg.cg_tol, cg_iters)?;
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("non-finite iterate in the u-step", None));
        }
        Ok((u, out))
    }

    /// New auxiliaries from `u_new` and the current Bregman variables.
    pub fn de_update(&self, u_new: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let cfg = self.cfg;
        let st = &self.state;
        let mut d = Vec::with_capacity(cfg.orders());
        let mut e = Vec::with_capacity(cfg.orders());
        for m in 0..cfg.orders() {
            let mut x = self.ops.grad(m, u_new);
            axpy(&mut x, 1.0, &st.b1[m]);
            d.push(auxiliary_update(&x, &st.d[m], cfg.alpha[m], cfg.p[m], cfg.eps));
            let mut y = self.ops.grad_coupled(m, u_new);
            axpy(&mut y, 1.0, &st.b2[m]);
            e.push(auxiliary_update(&y, &st.e[m], cfg.beta[m], cfg.q[m], cfg.eps));
        }
        (d, e)
    }

    /// `b₁ + Du − d`, `b₂ + DCu − e`.
    pub fn bregman_update(
        &self,
        u_new: &[f64],
        d_new: &[Vec<f64>],
        e_new: &[Vec<f64>],
    ) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let st = &self.state;
        let mut b1 = st.b1.clone();
        let mut b2 = st.b2.clone();
        for m in 0..self.cfg.orders() {
            let du = self.ops.grad(m, u_new);
            for ((b, x), d) in b1[m].iter_mut().zip(&du).zip(&d_new[m]) {
                *b += x - d;
            }
            let dcu = self.ops.grad_coupled(m, u_new);
            for ((b, x), e) in b2[m].iter_mut().zip(&dcu).zip(&e_new[m]) {
                *b += x - e;
            }
        }
        (b1, b2)
    }

    /// Constraint residuals `(Σₘ‖dₘ − D⁽ᵐ⁾u‖, Σₘ‖eₘ − D⁽ᵐ⁾Cu‖)` of the current state.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        let st = &self.state;
        let mut rd = 0.0;
        let mut re = 0.0;
        for m in 0..self.cfg.orders() {
            rd += diff_norm_sq(&st.d[m], &self.ops.grad(m, &st.u)).sqrt();
            re += diff_norm_sq(&st.e[m], &self.ops.grad_coupled(m, &st.u)).sqrt();
        }
        (rd, re)
    }

    /// One full iteration; returns the relative step of `u`.
    pub fn step(&mut self) -> Result<f64> {
        let (u_new, _) = self.u_update()?;
        let (d, e) = self.de_update(&u_new);
        let (b1, b2) = self.bregman_update(&u_new, &d, &e);
        let rel = relative_step(&self.state.u, &u_new);
        self.state = BregmanState { u: u_new, d, e, b1, b2 };
        Ok(rel)
    }

    pub fn objective(&self, u: &[f64]) -> f64 {
        objective_with(&self.ops, u, self.g, self.k, self.cfg)
    }
}

fn objective_with(ops: &RegularizerOps, u: &[f64], g: &[f64], k: &dyn LinearMap, cfg: &SolverConfig) -> f64 {
    let ku = k.apply(u);
    let mut e = 0.5 * cfg.mu * diff_norm_sq(&ku, g);
    for m in 0..cfg.orders() {
        let (p, q) = (cfg.p[m], cfg.q[m]);
        e += ops.grad(m, u).iter().map(|x| x.abs().powf(p)).sum::<f64>();
        e += ops.grad_coupled(m, u).iter().map(|x| x.abs().powf(q)).sum::<f64>();
    }
    e
}

/// `μ/2‖Ku − g‖² + Σₘ Σ|D⁽ᵐ⁾u|^pₘ + Σ|D⁽ᵐ⁾Cu|^qₘ`, the energy whose
/// minimizer the split-Bregman iteration targets.
pub fn split_objective(u: &[f64], g: &[f64], k: &dyn LinearMap, dims: Dims, cfg: &SolverConfig) -> Result<f64> {
    cfg.validate()?;
    Error::check_len(dims.field_len(), u.len())?;
    let ops = RegularizerOps::new(dims, cfg.orders())?;
    Ok(objective_with(&ops, u, g, k, cfg))
}

/// First-order vectorial TV energy with explicit weights:
/// `μ/2‖Ku − g‖² + α Σ|D⁽¹⁾u| + β Σ|D⁽¹⁾Cu|` (componentwise absolute values).
pub fn vtv_energy(u: &[f64], g: &[f64], k: &dyn LinearMap, dims: Dims, mu: f64, alpha: f64, beta: f64) -> Result<f64> {
    Error::check_len(dims.field_len(), u.len())?;
    Error::check_len(k.output_len(), g.len())?;
    let ops = RegularizerOps::new(dims, 1)?;
    let data = 0.5 * mu * diff_norm_sq(&k.apply(u), g);
    let tv: f64 = ops.grad(0, u).iter().map(|x| x.abs()).sum();
    let opp: f64 = ops.grad_coupled(0, u).iter().map(|x| x.abs()).sum();
    Ok(data + alpha * tv + beta * opp)
}

/// Runs split-Bregman iterations until the relative step of `u` drops
/// below [`SolverConfig::stopping_threshold`] or `max_outer` is reached.
/// The returned `u` is unclamped.
pub fn bregman_solve(
    g: &[f64],
    k: &dyn LinearMap,
    dims: Dims,
    cfg: &SolverConfig,
    ground_truth: Option<&[f64]>,
) -> Result<Solution> {
    let mut solver = SplitBregman::new(g, k, dims, cfg)?;
    if let Some(gt) = ground_truth {
        Error::check_len(dims.field_len(), gt.len())?;
    }
    let threshold = cfg.stopping_threshold(dims.pixels());
    let mut trace = ConvergenceTrace {
        initial_phi: solver.objective(&solver.state.u),
        initial_psnr: ground_truth.map(|gt| psnr_values(gt, &solver.state.u)),
        threshold,
        ..Default::default()
    };
    for iter in 1..=cfg.max_outer {
        let rel_step = match solver.step() {
            Ok(r) => r,
            Err(e) => return Err(Error::numerical(e.to_string(), Some(trace))),
        };
        let phi = solver.objective(&solver.state.u);
        if !phi.is_finite() {
            return Err(Error::numerical(format!("objective became {phi} at iteration {iter}"), Some(trace)));
        }
        let (res_d, res_e) = solver.constraint_residuals();
        trace.rows.push(TraceRow {
            iter,
            phi,
            rel_step,
            psnr: ground_truth.map(|gt| psnr_values(gt, &solver.state.u)),
            res_d: Some(res_d),
            res_e: Some(res_e),
            majorizer: None,
        });
        if rel_step < threshold {
            trace.converged = true;
            break;
        }
    }
    Ok(Solution {
        u: solver.state.u,
        trace,
    })
}


#[cfg(test)]
mod solver_tests {
    use super::*;
    use crate::degradation::{add_opponent_noise, make_test_pattern};
    use crate::image::ImageRgb;
    use crate::operators::test_util::{dense, random_vec, rng, solve_dense};
    use crate::operators::{ForwardModel, Identity};

    fn noisy(w: usize, h: usize, sigma: f64) -> (Dims, Vec<f64>, Vec<f64>) {
        let clean = make_test_pattern(w, h);
        let n = add_opponent_noise(&clean, sigma, 9);
        (clean.dims(), clean.as_slice().to_vec(), n.as_slice().to_vec())
    }

    #[test]
    fn u_update_matches_dense_solve() {
        let (dims, _, g) = noisy(8, 8, 20.0);
        let k = Identity::for_dims(dims);
        let mut cfg = SolverConfig::first_order(10.0, 2.0, 1.5, 1.0).with_second_order(1.0, 0.5, 0.7);
        cfg.cg_tol = 1e-14;
        let mut solver = SplitBregman::new(&g, &k, dims, &cfg).unwrap();
        let mut r = rng(4);
        for b in solver.state.b1.iter_mut().chain(solver.state.b2.iter_mut()) {
            *b = random_vec(&mut r, b.len());
        }
        let (got, outcome) = solver.u_update_with(500).unwrap();
        for w in outcome.residual_norms.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let a = dense(g.len(), |x| {
            let mut out = vec![0.0; x.len()];
            solver.normal_apply(x, &mut out);
            out
        });
        let want = solve_dense(a, solver.u_rhs());
        let err = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-8, "max error {err}");
    }

    #[test]
    fn bregman_update_examples() {
        let dims = Dims::new(3, 3);
        let g = vec![0.0; dims.field_len()];
        let k = Identity::for_dims(dims);
        let cfg = SolverConfig::first_order(1.0, 1.0, 1.0, 1.0);
        let mut solver = SplitBregman::new(&g, &k, dims, &cfg).unwrap();
        let u = vec![0.0; g.len()];
        let exact_d = vec![solver.ops().grad(0, &u)];
        let exact_e = vec![solver.ops().grad_coupled(0, &u)];
        let (b1, b2) = solver.bregman_update(&u, &exact_d, &exact_e);
        assert_eq!((b1, b2), (solver.state.b1.clone(), solver.state.b2.clone()));
        let ones_d = vec![vec![1.0; exact_d[0].len()]];
        let (b1, _) = solver.bregman_update(&u, &ones_d, &exact_e);
        assert!(b1[0].iter().all(|v| *v == -1.0));
        solver.state.u = u;
    }

    #[test]
    fn gray_input_stays_gray_without_coupling() {
        let dims = Dims::new(12, 10);
        let gray = ImageRgb::from_fn(dims, |r, c| {
            let v = 0.2 + 0.05 * ((r * 7 + c * 3) % 11) as f64;
            [v, v, v]
        });
        let k = ForwardModel::identity(dims);
        let mut cfg = SolverConfig::first_order(5.0, 2.0, 0.0, 1.0);
        cfg.max_outer = 30;
        let sol = bregman_solve(gray.as_slice(), &k, dims, &cfg, None).unwrap();
        let n = dims.pixels();
        for i in 0..n {
            let px = [sol.u[i], sol.u[n + i], sol.u[2 * n + i]];
            let spread = px.iter().cloned().fold(f64::MIN, f64::max) - px.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 1e-12, "pixel {i}: {px:?}");
        }
    }

    #[test]
    fn shift_covariance() {
        let (dims, _, g) = noisy(10, 10, 30.0);
        let k = ForwardModel::identity(dims);
        let mut cfg = SolverConfig::first_order(8.0, 2.0, 2.0, 1.0);
        cfg.max_outer = 15;
        cfg.fallback_tol = 0.0;
        let c = 0.25;
        let shifted: Vec<f64> = g.iter().map(|v| v + c).collect();
        let a = bregman_solve(&g, &k, dims, &cfg, None).unwrap();
        let b = bregman_solve(&shifted, &k, dims, &cfg, None).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((y - x - c).abs() <= 1e-8);
        }
    }

    #[test]
    fn halts_at_first_iteration_below_threshold() {
        let (dims, clean, g) = noisy(16, 16, 20.0);
        let k = ForwardModel::identity(dims);
        let mut cfg = SolverConfig::first_order(80.0, 2.0, 2.0, 1.0);
        cfg.fallback_tol = 1e-5;
        let sol = bregman_solve(&g, &k, dims, &cfg, Some(&clean)).unwrap();
        let rows = &sol.trace.rows;
        assert!(sol.trace.converged);
        let (last, rest) = rows.split_last().unwrap();
        assert!(last.rel_step < 1e-5);
        assert!(rest.iter().all(|r| r.rel_step >= 1e-5));
    }

    #[test]
    fn zero_weights_return_input() {
        let (dims, _, g) = noisy(8, 8, 40.0);
        let k = ForwardModel::identity(dims);
        for p in [1.0, 0.6] {
            let mut cfg = SolverConfig::first_order(3.0, 0.0, 0.0, p);
            cfg.cg_tol = 1e-14;
            cfg.cg_iters = 50;
            let sol = bregman_solve(&g, &k, dims, &cfg, None).unwrap();
            for (a, b) in sol.u.iter().zip(&g) {
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn convex_energy_decreases() {
        let (dims, _, g) = noisy(16, 16, 30.0);
        let k = ForwardModel::identity(dims);
        let cfg = SolverConfig::first_order(20.0, 2.0, 2.0, 1.0);
        let sol = bregman_solve(&g, &k, dims, &cfg, None).unwrap();
        let e0 = vtv_energy(&g, &g, &k, dims, cfg.mu, 1.0, 1.0).unwrap();
        let e1 = vtv_energy(&sol.u, &g, &k, dims, cfg.mu, 1.0, 1.0).unwrap();
        assert!(e1 < e0);
        assert!(sol.trace.final_phi() < sol.trace.initial_phi);
    }

    #[test]
    fn non_convex_surrogate_is_minimized() {
        // the closed form minimizes v d² + (α/2)(d − x)² for the frozen v
        let x = [0.4, -0.9, 1e-3];
        let d_old = [0.3, -1.0, 0.2];
        let (alpha, p) = (2.0, 0.6);
        let got = auxiliary_update(&x, &d_old, alpha, p, 1e-20);
        for i in 0..3 {
            let v = 0.5 * p * (d_old[i].abs() + 1e-20).powf(p - 2.0);
            let f = |d: f64| v * d * d + 0.5 * alpha * (d - x[i]).powi(2);
            for h in [1e-4, -1e-4] {
                assert!(f(got[i]) <= f(got[i] + h));
            }
        }
    }

    #[test]
    fn requires_quadratic_data_term() {
        let dims = Dims::new(4, 4);
        let g = vec![0.0; dims.field_len()];
        let k = Identity::for_dims(dims);
        let mut cfg = SolverConfig::default();
        cfg.s = 1.0;
        let err = bregman_solve(&g, &k, dims, &cfg, None).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }
}
