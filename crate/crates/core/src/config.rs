use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_EPS: f64 = 1e-20;

/// Energy and solver parameters shared by both solvers.
///
/// The per-order vectors `alpha`, `beta`, `p`, `q` all have one entry per
/// derivative order, so their common length is the highest order `M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Data weight μ.
    pub mu: f64,
    /// Data exponent, in `(0, 2]`.
    pub s: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Mollifier added inside every absolute value.
    pub eps: f64,
    pub max_outer: usize,
    /// Inner CG steps per split-Bregman iteration.
    pub cg_iters: usize,
    /// Inner CG cap for the half-quadratic reference solver.
    pub hqa_cg_max: usize,
    pub cg_tol: f64,
    /// Noise standard deviation in 8-bit units, if known.
    pub sigma: Option<f64>,
    /// Relative-step threshold used when `sigma` is unknown.
    pub fallback_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            mu: 80.0,
            s: 2.0,
            alpha: vec![2.0],
            beta: vec![2.0],
            p: vec![1.0],
            q: vec![1.0],
            eps: DEFAULT_EPS,
            max_outer: 500,
            cg_iters: 5,
            hqa_cg_max: 500,
            cg_tol: 1e-10,
            sigma: None,
            fallback_tol: 1e-6,
        }
    }
}

impl SolverConfig {
    /// First-order configuration with `q = p`.
    pub fn first_order(mu: f64, alpha: f64, beta: f64, p: f64) -> Self {
        SolverConfig {
            mu,
            alpha: vec![alpha],
            beta: vec![beta],
            p: vec![p],
            q: vec![p],
            ..SolverConfig::default()
        }
    }

    /// Appends a second-order term with `q = p`.
    pub fn with_second_order(mut self, alpha: f64, beta: f64, p: f64) -> Self {
        self.alpha.push(alpha);
        self.beta.push(beta);
        self.p.push(p);
        self.q.push(p);
        self
    }

    pub fn with_sigma(mut self, sigma: Option<f64>) -> Self {
        self.sigma = sigma;
        self
    }

    /// Highest derivative order `M`.
    pub fn orders(&self) -> usize {
        self.alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.alpha.len();
        if !(1..=2).contains(&m) {
            return Err(Error::config(format!(
                "highest derivative order must be 1 or 2, got {m}"
            )));
        }
        for (name, v) in [("beta", &self.beta), ("p", &self.p), ("q", &self.q)] {
            if v.len() != m {
                return Err(Error::config(format!(
                    "{name} has {} entries but alpha has {m}",
                    v.len()
                )));
            }
        }
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::config(format!("mu must be positive, got {}", self.mu)));
        }
        if !(self.s > 0.0 && self.s <= 2.0) {
            return Err(Error::config(format!("s must lie in (0, 2], got {}", self.s)));
        }
        for (name, v) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if let Some(x) = v.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
                return Err(Error::config(format!("{name} entries must be >= 0, got {x}")));
            }
        }
        for (name, v) in [("p", &self.p), ("q", &self.q)] {
            if let Some(x) = v.iter().find(|x| !(**x > 0.0 && **x < 2.0)) {
                return Err(Error::config(format!("{name} entries must lie in (0, 2), got {x}")));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::config(format!("eps must be positive, got {}", self.eps)));
        }
        if self.max_outer == 0 {
            return Err(Error::config("max_outer must be at least 1"));
        }
        if !(self.cg_tol >= 0.0) {
            return Err(Error::config("cg_tol must be >= 0"));
        }
        if let Some(sigma) = self.sigma {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return Err(Error::config(format!("sigma must be >= 0, got {sigma}")));
            }
        }
        Ok(())
    }

    /// Relative-step threshold `‖uᵏ − uᵏ⁺¹‖² / ‖uᵏ⁺¹‖²` for an image of
    /// `pixels` pixels.
    pub fn stopping_threshold(&self, pixels: usize) -> f64 {
        match self.sigma {
            Some(sigma) => noise_stopping_threshold(pixels, sigma),
            None => self.fallback_tol,
        }
    }
}

/// `0.9 · √(3Nσ²) / 255²`, σ in 8-bit units.
pub fn noise_stopping_threshold(pixels: usize, sigma: f64) -> f64 {
    0.9 * (3.0 * pixels as f64 * sigma * sigma).sqrt() / (255.0 * 255.0)
}
