//! Projected-gradient solver for the relaxed pilot design problem
//!
//! ```text
//! minimise   Tr(A (B + X)⁻¹)
//! subject to Tr X ≤ budget,  X ⪰ 0
//! ```
//!
//! The feasible set is projected onto by an eigendecomposition and a simplex
//! projection of the spectrum. Each iteration tries a Barzilai-Borwein step
//! and backtracks until the Armijo condition holds, so accepted objective
//! values never increase. Optimality is certified by [`kkt_residual`].

use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, HermitianEigen};
use crate::snr::DesignObjective;

/// Feasibility slack used when checking solver output.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// Consecutive sub-tolerance objective changes that end the run.
const STALL_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub kkt_tol: f64,
    pub initial_step: f64,
    pub backtrack_factor: f64,
    pub armijo_c: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            rel_obj_tol: 1e-9,
            kkt_tol: 1e-6,
            initial_step: 1.0,
            backtrack_factor: 0.5,
            armijo_c: 1e-4,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters", "must be positive"));
        }
        let positive = [
            ("rel_obj_tol", self.rel_obj_tol),
            ("kkt_tol", self.kkt_tol),
            ("initial_step", self.initial_step),
            ("backtrack_factor", self.backtrack_factor),
            ("armijo_c", self.armijo_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        if self.backtrack_factor >= 1.0 {
            return Err(Error::invalid("backtrack_factor", "must be below 1"));
        }
        if self.armijo_c >= 1.0 {
            return Err(Error::invalid("armijo_c", "must be below 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SolverResult {
    pub x: CMatrix,
    pub objective: f64,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub converged: bool,
    /// Objective at the starting point followed by every accepted iterate.
    pub objective_trace: Vec<f64>,
}

/// Frobenius-nearest point of `{X ⪰ 0, Tr X ≤ budget}`.
pub fn project_feasible(x: &CMatrix, budget: f64) -> CMatrix {
    let herm = linalg::hermitian_part(x);
    let eig = HermitianEigen::new(&herm);
    if eig.min() >= 0.0 && linalg::trace_re(&herm) <= budget {
        return herm;
    }
    let clipped: Vec<f64> = eig.values.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    let shift = if total > budget {
        simplex_shift(&clipped, budget)
    } else {
        0.0
    };
    eig.reassemble(|v| (v - shift).max(0.0))
}

/// Threshold `θ` with `Σ max(v_i − θ, 0) = budget` for non-negative `values`
/// sorted in descending order whose sum exceeds `budget`.
fn simplex_shift(values: &[f64], budget: f64) -> f64 {
    let mut prefix = 0.0;
    let mut shift = 0.0;
    for (k, &v) in values.iter().enumerate() {
        prefix += v;
        let candidate = (prefix - budget) / (k + 1) as f64;
        if v - candidate > 0.0 {
            shift = candidate;
        } else {
            break;
        }
    }
    shift
}

fn check_feasible(x: &CMatrix, budget: f64) -> Result<HermitianEigen> {
    if !linalg::is_finite(x) {
        return Err(Error::NonFinite("X"));
    }
    let eig = HermitianEigen::new(x);
    let tr = linalg::trace_re(x);
    if tr > budget * (1.0 + FEASIBILITY_TOL) {
        return Err(Error::Infeasible(format!("trace {tr} exceeds budget {budget}")));
    }
    if eig.min() < -FEASIBILITY_TOL * eig.max().max(0.0) {
        return Err(Error::Infeasible(format!("min eigenvalue {:e}", eig.min())));
    }
    Ok(eig)
}

/// First-order optimality residual of a feasible `X`.
///
/// With `G = (B+X)⁻¹ A (B+X)⁻¹` the KKT system reads `G ⪯ μI`,
/// `(μI − G) X = 0`, `μ (Tr X − budget) = 0`. The multiplier is estimated as
/// `Tr(GX) / Tr X` on the range of `X` (or `λ_max(G)` when `X = 0`) and the
/// residual is the largest normalised violation of the three conditions.
pub fn kkt_residual(obj: &DesignObjective, x: &CMatrix) -> Result<f64> {
    check_feasible(x, obj.budget())?;
    let g = obj.descent_direction(x)?;
    Ok(kkt_from_gradient(obj.budget(), x, &g))
}

fn kkt_from_gradient(budget: f64, x: &CMatrix, g: &CMatrix) -> f64 {
    let n = x.nrows();
    let g_max = linalg::max_eigenvalue(g);
    let tr = linalg::trace_re(x);
    let mu = if tr <= 1e-14 * budget {
        g_max
    } else {
        linalg::inner_re(g, x) / tr
    };
    let g_norm = linalg::frobenius(g);
    let stationarity = linalg::frobenius(&((g - linalg::identity(n) * c(mu)) * x)) / (1.0 + g_norm);
    let dual = (g_max - mu).max(0.0) / (1.0 + g_max);
    let slackness = (mu * (tr - budget)).abs() / (1.0 + budget);
    stationarity.max(dual).max(slackness)
}

pub fn solve_trace_inverse_sdp(obj: &DesignObjective, cfg: &SolverConfig) -> Result<SolverResult> {
    cfg.validate()?;
    let n = obj.dim();
    let budget = obj.budget();
    let mut x = linalg::identity(n) * c(budget / n as f64);
    let mut f = obj.objective_value(&x);
    // the negated gradient
    let mut g = obj.descent_direction(&x)?;
    let mut kkt = kkt_from_gradient(budget, &x, &g);
    let mut trace = vec![f];
    let mut previous: Option<(CMatrix, CMatrix)> = None;
    let mut step = cfg.initial_step;
    let mut stall = 0;
    let mut iterations = 0;

    while iterations < cfg.max_iters && kkt > cfg.kkt_tol {
        if let Some((x_prev, g_prev)) = &previous {
            let s = &x - x_prev;
            // y = ∇f_k − ∇f_{k−1} = −(g − g_prev)
            let y = g_prev - &g;
            let sy = linalg::inner_re(&s, &y);
            if sy > 0.0 {
                step = (linalg::inner_re(&s, &s) / sy).clamp(1e-12, 1e12);
            }
        }
        let mut t = step;
        let accepted = loop {
            let candidate = project_feasible(&(&x + &g * c(t)), budget);
            let d = &candidate - &x;
            if linalg::frobenius(&d) <= 1e-15 * (1.0 + linalg::frobenius(&x)) {
                break None;
            }
            // ⟨∇f, d⟩ = −⟨g, d⟩
            let slope = -linalg::inner_re(&g, &d);
            let f_new = obj.objective_value(&candidate);
            if f_new <= f + cfg.armijo_c * slope && f_new <= f {
                break Some((candidate, f_new));
            }
            t *= cfg.backtrack_factor;
            if t < 1e-30 {
                break None;
            }
        };
        let Some((x_new, f_new)) = accepted else {
            break;
        };
        iterations += 1;
        let g_new = obj.descent_direction(&x_new)?;
        previous = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut g, g_new)));
        let rel = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        assert!(f_new <= f, "objective increased: {f} -> {f_new}");
        f = f_new;
        trace.push(f);
        kkt = kkt_from_gradient(budget, &x, &g);
        if rel < cfg.rel_obj_tol {
            stall += 1;
            if stall >= STALL_LIMIT {
                break;
            }
        } else {
            stall = 0;
        }
    }

    Ok(SolverResult {
        objective: f,
        iterations,
        kkt_residual: kkt,
        converged: kkt <= cfg.kkt_tol,
        objective_trace: trace,
        x,
    })
}
