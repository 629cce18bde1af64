//! Kalman MMSE tracking of the reduced channel `g_l` from pilot observations
//! `y_l = S̃_lᴴ g_l + n_l`.

use rand::Rng;

use crate::channel::{ChannelState, ChannelSubspace};
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::pilot::PilotMatrix;

/// Predicted estimate `ĝ_{l|l−1}` and its error covariance `P_{l|l−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanBelief {
    pub mean: CVector,
    pub covariance: CMatrix,
}

impl KalmanBelief {
    /// Prior before any training: `ĝ_{0|−1} = 0`, `P_{0|−1} = Λ`.
    pub fn initial(sub: &ChannelSubspace) -> Self {
        Self {
            mean: CVector::zeros(sub.rank()),
            covariance: sub.lambda(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Filtered estimate `ĝ_{l|l}` and its error covariance `P_{l|l}`.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanPosterior {
    pub mean: CVector,
    pub covariance: CMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub y: CVector,
    pub noise_var: f64,
}

/// `y = Sᴴ g + σ·z` for a given standard circular draw `z`.
///
/// Split out from [`simulate_observation`] so that several pilot designs can
/// be driven by the same noise realisation.
pub fn observe(
    state: &ChannelState,
    pilot: &PilotMatrix,
    noise_var: f64,
    standard_noise: &CVector,
) -> Result<Observation> {
    let s = pilot.matrix();
    if s.nrows() != state.g.len() {
        return Err(Error::DimensionMismatch {
            context: "observation: pilot rows vs channel",
            expected: state.g.len(),
            found: s.nrows(),
        });
    }
    if standard_noise.len() != s.ncols() {
        return Err(Error::DimensionMismatch {
            context: "observation: noise length vs training length",
            expected: s.ncols(),
            found: standard_noise.len(),
        });
    }
    if !(noise_var > 0.0) {
        return Err(Error::invalid("noise_var", "must be positive"));
    }
    let y = s.adjoint() * &state.g + standard_noise * c(noise_var.sqrt());
    Ok(Observation { y, noise_var })
}

pub fn simulate_observation<R: Rng + ?Sized>(
    state: &ChannelState,
    pilot: &PilotMatrix,
    noise_var: f64,
    rng: &mut R,
) -> Result<Observation> {
    let z = linalg::standard_cn(pilot.train_len(), rng);
    observe(state, pilot, noise_var, &z)
}

/// Measurement update.
///
/// The gain is formed through a Cholesky solve of the `T_t × T_t` innovation
/// matrix `σ²I + Sᴴ P S`; the output covariance is re-symmetrised.
pub fn update(belief: &KalmanBelief, pilot: &PilotMatrix, obs: &Observation) -> Result<KalmanPosterior> {
    let s = pilot.matrix();
    let n = belief.dim();
    if s.nrows() != n {
        return Err(Error::DimensionMismatch {
            context: "update: pilot rows vs state",
            expected: n,
            found: s.nrows(),
        });
    }
    if obs.y.len() != s.ncols() {
        return Err(Error::DimensionMismatch {
            context: "update: observation length vs training length",
            expected: s.ncols(),
            found: obs.y.len(),
        });
    }
    if !linalg::is_finite(&belief.covariance)
        || !linalg::is_finite_vec(&belief.mean)
        || !linalg::is_finite(s)
        || !linalg::is_finite_vec(&obs.y)
        || !obs.noise_var.is_finite()
    {
        return Err(Error::NonFinite("Kalman update input"));
    }
    let p = &belief.covariance;
    let ps = p * s;
    let innovation_cov = s.adjoint() * &ps + linalg::identity(s.ncols()) * c(obs.noise_var);
    // K = P S (σ²I + Sᴴ P S)⁻¹, computed as (innovation⁻¹ (P S)ᴴ)ᴴ
    let gain_t = linalg::solve_pd(&innovation_cov, &ps.adjoint(), "innovation covariance")?;
    let gain = gain_t.adjoint();
    let residual = &obs.y - s.adjoint() * &belief.mean;
    let mean = &belief.mean + &gain * residual;
    let covariance = linalg::hermitian_part(&(p - &gain * ps.adjoint()));
    Ok(KalmanPosterior { mean, covariance })
}

/// Time update: `ĝ = a ĝ_{l|l}`, `P = a² P_{l|l} + (1 − a²) Λ`.
pub fn predict(post: &KalmanPosterior, sub: &ChannelSubspace) -> KalmanBelief {
    let a = sub.fading();
    let mean = post.mean.map(|z| z * a);
    let covariance =
        linalg::hermitian_part(&(post.covariance.map(|z| z * (a * a)) + sub.lambda() * c(1.0 - a * a)));
    KalmanBelief { mean, covariance }
}

/// `‖g − ĝ‖² / ‖g‖²`.
pub fn nmse(truth: &ChannelState, post: &KalmanPosterior) -> Result<f64> {
    if truth.g.len() != post.mean.len() {
        return Err(Error::DimensionMismatch {
            context: "nmse",
            expected: truth.g.len(),
            found: post.mean.len(),
        });
    }
    let energy = truth.g.norm_squared();
    if energy == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok((&truth.g - &post.mean).norm_squared() / energy)
}

/// Conditional mean and covariance of `g_l` given `y_0, …, y_l`, formed from
/// the full joint Gaussian covariance instead of the recursion.
///
/// Only meant for verification at small sizes: the observation covariance is
/// `(l+1)T_t` square and is solved by LU.
pub fn batch_mmse_oracle(
    pilots: &[PilotMatrix],
    observations: &[Observation],
    sub: &ChannelSubspace,
    block: usize,
) -> Result<(CVector, CMatrix)> {
    if pilots.len() != block + 1 || observations.len() != block + 1 {
        return Err(Error::HistoryMismatch {
            pilots: pilots.len(),
            observations: observations.len(),
            block,
        });
    }
    let a = sub.fading();
    let lambda = sub.lambda();
    let n = sub.rank();
    let offsets: Vec<usize> = pilots
        .iter()
        .scan(0, |acc, p| {
            let o = *acc;
            *acc += p.train_len();
            Some(o)
        })
        .collect();
    let total: usize = pilots.iter().map(PilotMatrix::train_len).sum();

    // E{g_i g_jᴴ} = a^{|i−j|} Λ for the stationary chain.
    let lag = |i: usize, j: usize| a.powi(i.abs_diff(j) as i32);

    let mut cyy = CMatrix::zeros(total, total);
    let mut cgy = CMatrix::zeros(n, total);
    let mut y = CVector::zeros(total);
    for (i, (pi, oi)) in pilots.iter().zip(observations).enumerate() {
        if oi.y.len() != pi.train_len() || pi.matrix().nrows() != n {
            return Err(Error::DimensionMismatch {
                context: "batch oracle history",
                expected: pi.train_len(),
                found: oi.y.len(),
            });
        }
        y.rows_mut(offsets[i], pi.train_len()).copy_from(&oi.y);
        let block_gy = &lambda * pi.matrix() * c(lag(block, i));
        cgy.columns_mut(offsets[i], pi.train_len()).copy_from(&block_gy);
        for (j, pj) in pilots.iter().enumerate() {
            let mut blk = pi.matrix().adjoint() * &lambda * pj.matrix() * c(lag(i, j));
            if i == j {
                blk += linalg::identity(pi.train_len()) * c(oi.noise_var);
            }
            cyy.view_mut((offsets[i], offsets[j]), (pi.train_len(), pj.train_len()))
                .copy_from(&blk);
        }
    }
    let lu = cyy.lu();
    let weights_y = lu
        .solve(&y)
        .ok_or(Error::NotPositiveDefinite("observation covariance"))?;
    let weights_c = lu
        .solve(&cgy.adjoint())
        .ok_or(Error::NotPositiveDefinite("observation covariance"))?;
    let mean = &cgy * weights_y;
    let cov = linalg::hermitian_part(&(lambda - &cgy * weights_c));
    Ok((mean, cov))
}
