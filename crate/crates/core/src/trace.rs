use std::fmt::Write as _;

/// One outer iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub phi: f64,
    /// `‖uᵏ − uᵏ⁺¹‖² / ‖uᵏ⁺¹‖²`.
    pub rel_step: f64,
    pub psnr: Option<f64>,
    /// `‖d − Du‖` summed over orders (split-Bregman only).
    pub res_d: Option<f64>,
    /// `‖e − DCu‖` summed over orders (split-Bregman only).
    pub res_e: Option<f64>,
    /// Majorizer value `F(uᵏ⁺¹, uᵏ)` (half-quadratic solver only).
    pub majorizer: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConvergenceTrace {
    /// Objective at the starting point.
    pub initial_phi: f64,
    pub initial_psnr: Option<f64>,
    pub rows: Vec<TraceRow>,
    pub threshold: f64,
    /// Whether the relative-step rule fired before the iteration cap.
    pub converged: bool,
}

impl ConvergenceTrace {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn phis(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.initial_phi).chain(self.rows.iter().map(|r| r.phi))
    }

    pub fn final_phi(&self) -> f64 {
        self.rows.last().map_or(self.initial_phi, |r| r.phi)
    }

    /// CSV with columns `iter,phi,rel_step,psnr` and, when constraint
    /// residuals were recorded, `res_d,res_e`. Missing values are blank.
    pub fn to_csv(&self) -> String {
        let with_res = self.rows.iter().any(|r| r.res_d.is_some());
        let mut out = String::from("iter,phi,rel_step,psnr");
        if with_res {
            out.push_str(",res_d,res_e");
        }
        out.push('\n');
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let _ = write!(out, "{},{},{},{}", r.iter, r.phi, r.rel_step, opt(r.psnr));
            if with_res {
                let _ = write!(out, ",{},{}", opt(r.res_d), opt(r.res_e));
            }
            out.push('\n');
        }
        out
    }
}
