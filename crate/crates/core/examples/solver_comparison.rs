//! The half-quadratic and split-Bregman solvers on the same convex problem
//! (p = q = 1, s = 2, unit weights) land on the same minimizer.
//!
//! `cargo run --release --example solver_comparison`

use ovtv::bregman::vtv_energy;
use ovtv::degradation::{add_opponent_noise, make_test_pattern};
use ovtv::{bregman_solve, hqa_solve, ForwardModel, SolverConfig};

fn main() -> ovtv::Result<()> {
    let clean = make_test_pattern(32, 32);
    let noisy = add_opponent_noise(&clean, 20.0, 2);
    let dims = clean.dims();
    let k = ForwardModel::identity(dims);
    let mu = 20.0;

    let mut cfg = SolverConfig::first_order(mu, 1.0, 1.0, 1.0);
    cfg.fallback_tol = 1e-12;
    let h = hqa_solve(noisy.as_slice(), &k, dims, &cfg, None)?;
    cfg.max_outer = 3000;
    cfg.fallback_tol = 1e-14;
    let b = bregman_solve(noisy.as_slice(), &k, dims, &cfg, None)?;

    let eh = vtv_energy(&h.u, noisy.as_slice(), &k, dims, mu, 1.0, 1.0)?;
    let eb = vtv_energy(&b.u, noisy.as_slice(), &k, dims, mu, 1.0, 1.0)?;
    let rms = (h.u.iter().zip(&b.u).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / h.u.len() as f64).sqrt();
    println!("half-quadratic: energy {eh:.4} after {} iterations", h.trace.iterations());
    println!("split-Bregman:  energy {eb:.4} after {} iterations", b.trace.iterations());
    println!("relative energy gap {:.2e}, solution RMS {rms:.2e}", (eh - eb).abs() / eh);
    Ok(())
}
