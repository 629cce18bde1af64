//! Training-based received SNR and its reduction to a pilot design objective.
//!
//! With the estimate `ĝ` and error covariance `P` after the measurement
//! update, the received SNR of a reduced beamformer `w̃` is
//!
//! ```text
//! SNR(w̃) = |w̃ᴴ ĝ|² / w̃ᴴ (P + γ⁻¹ I) w̃
//! ```
//!
//! Averaged over the not-yet-observed `y_l`, the optimal SNR depends on the
//! pilot only through `X = S̃S̃ᴴ / σ²`:
//!
//! ```text
//! E{SNR*} = γ Tr(ĝĝᴴ + P_pred) − γ Tr(A (B + X)⁻¹)
//! A = γ ĝĝᴴ + γ P_pred + I,   B = γ I + P_pred⁻¹
//! ```
//!
//! so maximising expected SNR is minimising `Tr(A (B + X)⁻¹)`.
//!
//! Note on the constant: it is `γ Tr(ĝĝᴴ + P_pred)`, with the covariance and
//! not its inverse. Only this form reproduces the no-training SNR at `X = 0`
//! and the Monte Carlo mean of the optimal SNR (both are covered by tests).
//! The constant does not depend on `X`, so the argmin is unaffected.

use crate::error::{Error, Result};
use crate::kalman::{KalmanBelief, KalmanPosterior};
use crate::linalg::{self, c, CMatrix, CVector, HermitianEigen};

/// Relative eigenvalue floor applied to `P_pred` before inverting it.
pub const COVARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Criterion {
    /// Expected received SNR; `const_term = γ Tr(ĝĝᴴ + P_pred)`.
    ReceivedSnr { gamma: f64, const_term: f64 },
    /// Estimation MSE `Tr(P_{l|l})`, i.e. `A = I`, `B = P_pred⁻¹`.
    EstimationMse,
}

/// `min Tr(A (B + X)⁻¹)` subject to `Tr X ≤ budget`, `X ⪰ 0`.
///
/// `X` is measured in units of `S̃S̃ᴴ / σ²`, so `budget = ρ T_t / σ²`.
#[derive(Debug, Clone)]
pub struct DesignObjective {
    a: CMatrix,
    b: CMatrix,
    budget: f64,
    criterion: Criterion,
}

impl DesignObjective {
    /// Builds an objective from explicit Hermitian positive definite `A`, `B`.
    pub fn from_parts(a: CMatrix, b: CMatrix, budget: f64, criterion: Criterion) -> Result<Self> {
        if a.shape() != b.shape() || a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                context: "objective A vs B",
                expected: a.nrows(),
                found: b.nrows(),
            });
        }
        if !(budget > 0.0) || !budget.is_finite() {
            return Err(Error::invalid("budget", "must be positive"));
        }
        if !linalg::is_finite(&a) || !linalg::is_finite(&b) {
            return Err(Error::NonFinite("objective"));
        }
        let a = linalg::hermitian_part(&a);
        let b = linalg::hermitian_part(&b);
        if !linalg::is_positive_definite(&a) {
            return Err(Error::NotPositiveDefinite("A"));
        }
        if !linalg::is_positive_definite(&b) {
            return Err(Error::NotPositiveDefinite("B"));
        }
        Ok(Self {
            a,
            b,
            budget,
            criterion,
        })
    }

    pub fn a(&self) -> &CMatrix {
        &self.a
    }

    pub fn b(&self) -> &CMatrix {
        &self.b
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn criterion(&self) -> Criterion {
        self.criterion
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    /// `Tr(A (B + X)⁻¹)`.
    pub fn objective_value(&self, x: &CMatrix) -> f64 {
        let m = &self.b + linalg::hermitian_part(x);
        match linalg::solve_pd(&m, &self.a, "B + X") {
            Ok(z) => linalg::trace_re(&z),
            Err(_) => f64::INFINITY,
        }
    }

    /// `const_term − γ Tr(A (B + X)⁻¹)`; `None` for the MSE criterion.
    pub fn expected_snr_analytic(&self, x: &CMatrix) -> Option<f64> {
        match self.criterion {
            Criterion::ReceivedSnr { gamma, const_term } => {
                Some(const_term - gamma * self.objective_value(x))
            }
            Criterion::EstimationMse => None,
        }
    }

    /// Hermitian part of `(B + X)⁻¹ A (B + X)⁻¹`, the negated gradient.
    pub fn descent_direction(&self, x: &CMatrix) -> Result<CMatrix> {
        let m = &self.b + linalg::hermitian_part(x);
        let inv = linalg::inverse_pd(&m, "B + X")?;
        Ok(linalg::hermitian_part(&(&inv * &self.a * &inv)))
    }
}

fn regularized_inverse(p: &CMatrix) -> Result<CMatrix> {
    if !linalg::is_finite(p) {
        return Err(Error::NonFinite("predicted covariance"));
    }
    let eig = HermitianEigen::new(p);
    let top = eig.max();
    if !(top > 0.0) {
        return Err(Error::NotPositiveDefinite("predicted covariance"));
    }
    let floor = COVARIANCE_FLOOR * top;
    Ok(eig.reassemble(|v| 1.0 / v.max(floor)))
}

/// Received-SNR objective for the next block given the predicted belief.
pub fn build_objective(belief: &KalmanBelief, gamma: f64, budget: f64) -> Result<DesignObjective> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma", "must be positive"));
    }
    let n = belief.dim();
    let ggh = &belief.mean * belief.mean.adjoint();
    let p = linalg::hermitian_part(&belief.covariance);
    let a = &ggh * c(gamma) + &p * c(gamma) + linalg::identity(n);
    let b = linalg::identity(n) * c(gamma) + regularized_inverse(&p)?;
    let const_term = gamma * (linalg::trace_re(&ggh) + linalg::trace_re(&p));
    DesignObjective::from_parts(a, b, budget, Criterion::ReceivedSnr { gamma, const_term })
}

/// Estimation-MSE objective `Tr((P_pred⁻¹ + X)⁻¹) = Tr(P_{l|l})`.
pub fn mse_objective(belief: &KalmanBelief, budget: f64) -> Result<DesignObjective> {
    let n = belief.dim();
    let b = regularized_inverse(&linalg::hermitian_part(&belief.covariance))?;
    DesignObjective::from_parts(linalg::identity(n), b, budget, Criterion::EstimationMse)
}

/// Reduced-domain beamforming vector `w̃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer(pub CVector);

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma", "must be positive and finite"));
    }
    Ok(())
}

fn loaded_covariance(post: &KalmanPosterior, gamma: f64) -> CMatrix {
    let n = post.mean.len();
    linalg::hermitian_part(&post.covariance) + linalg::identity(n) * c(1.0 / gamma)
}

/// `w̃* = (P + γ⁻¹ I)⁻¹ ĝ`; the zero vector when `ĝ = 0`.
pub fn optimal_beamformer(post: &KalmanPosterior, gamma: f64) -> Result<Beamformer> {
    check_gamma(gamma)?;
    if !linalg::is_finite_vec(&post.mean) || !linalg::is_finite(&post.covariance) {
        return Err(Error::NonFinite("posterior"));
    }
    let n = post.mean.len();
    if post.mean.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(Beamformer(CVector::zeros(n)));
    }
    let rhs = CMatrix::from_column_slice(n, 1, post.mean.as_slice());
    let w = linalg::solve_pd(&loaded_covariance(post, gamma), &rhs, "P + I/γ")?;
    Ok(Beamformer(w.column(0).into_owned()))
}

/// Ratio of known-signal power to error-plus-noise power; 0 for `w̃ = 0`.
pub fn received_snr(w: &Beamformer, post: &KalmanPosterior, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !linalg::is_finite_vec(&w.0) {
        return Err(Error::NonFinite("beamformer"));
    }
    if w.0.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(0.0);
    }
    let signal = w.0.dotc(&post.mean).norm_sqr();
    let noise = w.0.dotc(&(loaded_covariance(post, gamma) * &w.0)).re;
    Ok(signal / noise)
}

/// `ĝᴴ (P + γ⁻¹ I)⁻¹ ĝ`.
pub fn optimal_snr(post: &KalmanPosterior, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let n = post.mean.len();
    if post.mean.iter().all(|z| z.norm_sqr() == 0.0) {
        return Ok(0.0);
    }
    let rhs = CMatrix::from_column_slice(n, 1, post.mean.as_slice());
    let z = linalg::solve_pd(&loaded_covariance(post, gamma), &rhs, "P + I/γ")?;
    Ok(post.mean.dotc(&z.column(0).into_owned()).re.max(0.0))
}
