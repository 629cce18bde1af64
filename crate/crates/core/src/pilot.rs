//! Pilot matrices `S̃_l` (reduced domain, `R_c × T_t`).
//!
//! Designs provided:
//! - [`design_sdr`]: received-SNR design. It solves the relaxed problem and
//!   extracts a rank-`T_t` pilot from the relaxed optimum.
//! - [`design_mse_min`]: the same pipeline applied to the estimation-MSE
//!   objective `Tr(P_{l|l})`.
//! - [`design_block_iid`]: closed-form water-filling on the `T_t` dominant
//!   eigen-directions for the block i.i.d. channel.
//! - [`design_orthogonal_baseline`] and [`design_random_baseline`].
//!
//! Optimisation happens in noise-normalised units `X = S̃S̃ᴴ / σ²` with budget
//! `ρ T_t / σ²`; emitted pilots are in physical units with `Tr(S̃S̃ᴴ) = ρ T_t`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::kalman::KalmanBelief;
use crate::linalg::{self, c, CMatrix, HermitianEigen};
use crate::sdp::{self, SolverConfig, SolverResult};
use crate::snr::{self, DesignObjective};

/// Relative power slack accepted by [`PilotMatrix::new`].
pub const POWER_TOL: f64 = 1e-9;

/// Relative eigenvalue threshold used to count the rank of a relaxed optimum.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct PilotMatrix {
    s: CMatrix,
    power_budget: f64,
}

impl PilotMatrix {
    pub fn new(s: CMatrix, power_budget: f64) -> Result<Self> {
        if s.ncols() > s.nrows() {
            return Err(Error::invalid(
                "train_len",
                format!("{} training symbols exceed channel rank {}", s.ncols(), s.nrows()),
            ));
        }
        if !linalg::is_finite(&s) {
            return Err(Error::NonFinite("pilot"));
        }
        let power = s.iter().map(|z| z.norm_sqr()).sum::<f64>();
        if power > power_budget * (1.0 + POWER_TOL) {
            return Err(Error::invalid(
                "pilot",
                format!("power {power} exceeds budget {power_budget}"),
            ));
        }
        Ok(Self { s, power_budget })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s
    }

    pub fn power_budget(&self) -> f64 {
        self.power_budget
    }

    /// `Tr(S̃S̃ᴴ)`.
    pub fn power(&self) -> f64 {
        self.s.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn train_len(&self) -> usize {
        self.s.ncols()
    }

    pub fn rank_dim(&self) -> usize {
        self.s.nrows()
    }

    /// `S̃S̃ᴴ / σ²`, the design variable this pilot realises.
    pub fn normalized_gram(&self, noise_var: f64) -> CMatrix {
        linalg::hermitian_part(&(&self.s * self.s.adjoint())) * c(1.0 / noise_var)
    }
}

/// Per-block design inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    /// Data SNR `γ = σ_d² / σ²` (linear).
    pub gamma: f64,
    /// Average power per pilot symbol `ρ`.
    pub rho: f64,
    pub noise_var: f64,
    pub train_len: usize,
}

impl DesignParams {
    pub fn validate(&self, rank: usize) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("rho", self.rho), ("noise_var", self.noise_var)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, "must be positive and finite"));
            }
        }
        if self.train_len == 0 || self.train_len > rank {
            return Err(Error::invalid(
                "train_len",
                format!("{} not in 1..={rank}", self.train_len),
            ));
        }
        Ok(())
    }

    /// `ρ T_t`.
    pub fn power_budget(&self) -> f64 {
        self.rho * self.train_len as f64
    }

    /// `ρ T_t / σ²`.
    pub fn normalized_budget(&self) -> f64 {
        self.power_budget() / self.noise_var
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomizationConfig {
    /// Number of `CN(0, X*)` candidate draws when the relaxed optimum has rank
    /// above `T_t`.
    pub candidates: usize,
    /// Polish the selected candidate by projected gradient on the
    /// rank-constrained problem.
    pub refine: bool,
    pub refine_iters: usize,
}

impl Default for RandomizationConfig {
    fn default() -> Self {
        Self {
            candidates: 50,
            refine: true,
            refine_iters: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionPath {
    /// Relaxed optimum is zero; the pilot is zero.
    Zero,
    /// `rank(X*) ≤ T_t`: exact factor `V diag(√λ)`.
    Exact { rank: usize },
    /// Best of the truncated eigen factor and `candidates` random draws.
    Randomized { candidates: usize },
}

#[derive(Debug, Clone)]
pub struct Extraction {
    /// Normalised-unit pilot, `R_c × T_t`.
    pub s: CMatrix,
    pub path: ExtractionPath,
}

/// Recover an `R_c × T_t` factor from a relaxed optimum.
///
/// When the numerical rank of `X` is at most `T_t` the eigen factor is exact
/// and the trailing columns are zero. Otherwise every candidate (the top-`T_t`
/// eigen factor plus `candidates` draws of `T_t` i.i.d. `CN(0, X)` columns) is
/// rescaled to `Tr = obj.budget()` and the one with the smallest objective,
/// i.e. the largest expected SNR, is returned.
pub fn factorize_or_randomize<R: Rng + ?Sized>(
    x: &CMatrix,
    train_len: usize,
    candidates: usize,
    obj: &DesignObjective,
    rng: &mut R,
) -> Result<Extraction> {
    let n = x.nrows();
    if train_len == 0 || train_len > n {
        return Err(Error::invalid("train_len", format!("{train_len} not in 1..={n}")));
    }
    let eig = HermitianEigen::new(x);
    let top = eig.max();
    if !(top > 0.0) {
        return Ok(Extraction {
            s: CMatrix::zeros(n, train_len),
            path: ExtractionPath::Zero,
        });
    }
    let rank = eig.values.iter().filter(|&&v| v > RANK_TOL * top).count();
    let mut factor = CMatrix::zeros(n, train_len);
    for j in 0..rank.min(train_len) {
        factor.set_column(j, &(eig.vectors.column(j) * c(eig.values[j].sqrt())));
    }
    if rank <= train_len {
        return Ok(Extraction {
            s: factor,
            path: ExtractionPath::Exact { rank },
        });
    }

    let budget = obj.budget();
    let score = |s: &CMatrix| obj.objective_value(&(s * s.adjoint()));
    let mut best = rescale(factor, budget);
    let mut best_score = score(&best);
    let root = eig.reassemble(|v| v.max(0.0).sqrt());
    for _ in 0..candidates {
        let mut cand = CMatrix::zeros(n, train_len);
        for j in 0..train_len {
            cand.set_column(j, &linalg::sample_cn(&root, rng));
        }
        let cand = rescale(cand, budget);
        let value = score(&cand);
        if value < best_score {
            best = cand;
            best_score = value;
        }
    }
    Ok(Extraction {
        s: best,
        path: ExtractionPath::Randomized { candidates },
    })
}

fn rescale(s: CMatrix, budget: f64) -> CMatrix {
    let power: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    if power > 0.0 {
        s * c((budget / power).sqrt())
    } else {
        s
    }
}

/// Gradient descent on `min Tr(A (B + SSᴴ)⁻¹)` over the sphere
/// `‖S‖_F² = budget`, started from `s`. The objective is strictly decreasing
/// in `SSᴴ`, so the power constraint is active at every optimum; steps move
/// along the tangent space and are pulled back by rescaling. Accepted steps
/// never increase the objective.
pub fn refine_rank_constrained(obj: &DesignObjective, s: CMatrix, max_iters: usize) -> Result<CMatrix> {
    let budget = obj.budget();
    if linalg::frobenius(&s) == 0.0 {
        return Ok(s);
    }
    let value = |m: &CMatrix| obj.objective_value(&(m * m.adjoint()));
    // tangent part of the descent direction 2 G S
    let direction = |m: &CMatrix| -> Result<CMatrix> {
        let d = obj.descent_direction(&(m * m.adjoint()))? * m * c(2.0);
        let radial = linalg::inner_re(m, &d) / linalg::inner_re(m, m);
        Ok(&d - m * c(radial))
    };
    let mut s = rescale(s, budget);
    let mut f = value(&s);
    let mut d = direction(&s)?;
    let scale = linalg::frobenius(&d).max(f64::MIN_POSITIVE);
    let mut step = budget.sqrt() / scale * 0.1;
    let mut previous: Option<(CMatrix, CMatrix)> = None;
    let mut stall = 0;
    for _ in 0..max_iters {
        if linalg::frobenius(&d) <= 1e-10 * scale {
            break;
        }
        if let Some((s_prev, d_prev)) = &previous {
            let ds = &s - s_prev;
            let dy = d_prev - &d;
            let sy = linalg::inner_re(&ds, &dy);
            if sy > 0.0 {
                step = (linalg::inner_re(&ds, &ds) / sy).clamp(1e-12, 1e12);
            }
        }
        let slope = linalg::inner_re(&d, &d);
        let mut t = step;
        let accepted = loop {
            let cand = rescale(&s + &d * c(t), budget);
            let f_new = value(&cand);
            if f_new <= f - 1e-4 * t * slope && f_new <= f {
                break Some((cand, f_new));
            }
            t *= 0.5;
            if t * linalg::frobenius(&d) <= 1e-15 * budget.sqrt() {
                break None;
            }
        };
        let Some((s_new, f_new)) = accepted else {
            break;
        };
        let d_new = direction(&s_new)?;
        previous = Some((std::mem::replace(&mut s, s_new), std::mem::replace(&mut d, d_new)));
        let rel = (f - f_new) / f.abs().max(f64::MIN_POSITIVE);
        f = f_new;
        if rel < 1e-13 {
            stall += 1;
            if stall >= 5 {
                break;
            }
        } else {
            stall = 0;
        }
    }
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct SdrDesign {
    pub pilot: PilotMatrix,
    pub solver: SolverResult,
    pub path: ExtractionPath,
    /// Set when the solver did not certify its solution.
    pub solver_warning: bool,
}

/// Received-SNR pilot for the next block.
pub fn design_sdr<R: Rng + ?Sized>(
    belief: &KalmanBelief,
    params: &DesignParams,
    solver_cfg: &SolverConfig,
    rand_cfg: &RandomizationConfig,
    rng: &mut R,
) -> Result<SdrDesign> {
    params.validate(belief.dim())?;
    let obj = snr::build_objective(belief, params.gamma, params.normalized_budget())?;
    design_from_objective(&obj, params, solver_cfg, rand_cfg, rng)
}

/// Pilot minimising `Tr(P_{l|l})` through the same relaxation pipeline.
pub fn design_mse_min<R: Rng + ?Sized>(
    belief: &KalmanBelief,
    params: &DesignParams,
    solver_cfg: &SolverConfig,
    rand_cfg: &RandomizationConfig,
    rng: &mut R,
) -> Result<SdrDesign> {
    params.validate(belief.dim())?;
    let obj = snr::mse_objective(belief, params.normalized_budget())?;
    design_from_objective(&obj, params, solver_cfg, rand_cfg, rng)
}

pub fn design_from_objective<R: Rng + ?Sized>(
    obj: &DesignObjective,
    params: &DesignParams,
    solver_cfg: &SolverConfig,
    rand_cfg: &RandomizationConfig,
    rng: &mut R,
) -> Result<SdrDesign> {
    let solver = sdp::solve_trace_inverse_sdp(obj, solver_cfg)?;
    let extraction = factorize_or_randomize(&solver.x, params.train_len, rand_cfg.candidates, obj, rng)?;
    let mut s = extraction.s;
    if rand_cfg.refine && matches!(extraction.path, ExtractionPath::Randomized { .. }) {
        s = refine_rank_constrained(obj, s, rand_cfg.refine_iters)?;
    }
    let s = rescale(s, obj.budget()) * c(params.noise_var.sqrt());
    Ok(SdrDesign {
        pilot: PilotMatrix::new(s, params.power_budget())?,
        solver_warning: !solver.converged,
        path: extraction.path,
        solver,
    })
}

/// Closed-form block i.i.d. design: selected eigen-directions and their
/// (noise-normalised) power levels `x_i = δ_i²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    /// Zero-based eigen-direction index of each pilot column.
    pub indices: Vec<usize>,
    pub levels: Vec<f64>,
    pub nu: f64,
}

impl WaterfillSolution {
    /// `Π D`, scaled to physical units.
    pub fn to_pilot(&self, rank: usize, params: &DesignParams) -> Result<PilotMatrix> {
        let mut s = CMatrix::zeros(rank, self.indices.len());
        for (col, (&idx, &x)) in self.indices.iter().zip(&self.levels).enumerate() {
            s[(idx, col)] = c((x * params.noise_var).sqrt());
        }
        PilotMatrix::new(s, params.power_budget())
    }

    /// The design variable `X = diag(x)` on the full `R_c` space.
    pub fn gram(&self, rank: usize) -> CMatrix {
        let mut x = CMatrix::zeros(rank, rank);
        for (&idx, &v) in self.indices.iter().zip(&self.levels) {
            x[(idx, idx)] = c(v);
        }
        x
    }
}

fn waterfill_level(b: f64, gamma: f64, nu: f64) -> f64 {
    (-b + (b / (nu * (b - gamma))).sqrt()).max(0.0)
}

/// Lagrange multiplier `ν` and levels `x_i = max(−b_i + √(b_i / (ν (b_i − γ))), 0)`
/// with `Σ x_i = budget`, found by bisection.
///
/// `γ = 0` gives the classical MSE water-filling `x_i = max(1/√ν − b_i, 0)`.
pub fn waterfill_nu(b_diag: &[f64], gamma: f64, budget: f64) -> Result<(f64, Vec<f64>)> {
    if b_diag.is_empty() {
        return Err(Error::invalid("b_diag", "empty"));
    }
    if !(gamma >= 0.0) || !(budget > 0.0) || !budget.is_finite() {
        return Err(Error::invalid("waterfill", "need gamma ≥ 0 and positive budget"));
    }
    if b_diag.iter().any(|&b| !(b > gamma) || !b.is_finite()) {
        return Err(Error::invalid("b_diag", "entries must exceed gamma"));
    }
    let power = |nu: f64| b_diag.iter().map(|&b| waterfill_level(b, gamma, nu)).sum::<f64>();

    let mut hi = 1.0;
    while power(hi) > budget {
        hi *= 2.0;
    }
    let mut lo = 1.0;
    while power(lo) < budget {
        lo *= 0.5;
    }
    if hi > 1.0 {
        lo = lo.max(hi * 0.5);
    }
    if lo < 1.0 {
        hi = hi.min(lo * 2.0);
    }
    let mut nu = 0.5 * (lo + hi);
    for _ in 0..200 {
        nu = 0.5 * (lo + hi);
        let p = power(nu);
        if (p - budget).abs() <= 1e-9 * budget {
            break;
        }
        if p > budget {
            lo = nu;
        } else {
            hi = nu;
        }
    }
    let levels = b_diag.iter().map(|&b| waterfill_level(b, gamma, nu)).collect();
    Ok((nu, levels))
}

/// Closed-form design for `ĝ = 0`, `P = Λ`: the `T_t` directions with the
/// largest `λ_i` (smallest `B(i,i) = γ + 1/λ_i`), water-filled.
pub fn design_block_iid(lambda: &[f64], params: &DesignParams) -> Result<WaterfillSolution> {
    params.validate(lambda.len())?;
    if lambda.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("lambda", "must be positive"));
    }
    let mut order: Vec<usize> = (0..lambda.len()).collect();
    order.sort_by(|&i, &j| lambda[j].total_cmp(&lambda[i]));
    let indices: Vec<usize> = order[..params.train_len].to_vec();
    let b: Vec<f64> = indices.iter().map(|&i| params.gamma + 1.0 / lambda[i]).collect();
    let (nu, levels) = waterfill_nu(&b, params.gamma, params.normalized_budget())?;
    Ok(WaterfillSolution { indices, levels, nu })
}

/// `T_t` consecutive eigen-directions starting at `(l·T_t) mod R_c`, each with
/// power `ρ`.
pub fn design_orthogonal_baseline(rank: usize, params: &DesignParams, block_index: usize) -> Result<PilotMatrix> {
    params.validate(rank)?;
    let tt = params.train_len;
    let start = (block_index % rank) * tt % rank;
    let mut s = CMatrix::zeros(rank, tt);
    for col in 0..tt {
        s[((start + col) % rank, col)] = c(params.rho.sqrt());
    }
    PilotMatrix::new(s, params.power_budget())
}

/// `T_t` isotropic complex Gaussian columns, each rescaled to `‖s‖² = ρ`.
pub fn design_random_baseline<R: Rng + ?Sized>(rank: usize, params: &DesignParams, rng: &mut R) -> Result<PilotMatrix> {
    params.validate(rank)?;
    let mut s = CMatrix::zeros(rank, params.train_len);
    for col in 0..params.train_len {
        let v = loop {
            let v = linalg::standard_cn(rank, rng);
            if v.norm() > 0.0 {
                break v;
            }
        };
        s.set_column(col, &(&v * c(params.rho.sqrt() / v.norm())));
    }
    PilotMatrix::new(s, params.power_budget())
}
