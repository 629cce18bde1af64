//! Self-checks behind `mimo-pilot validate`. Each one compares a production
//! code path with an independent computation of the same quantity.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{ChannelState, ChannelSubspace};
use crate::error::Result;
use crate::kalman::{self, KalmanBelief, KalmanPosterior};
use crate::linalg::{self, c, CMatrix, CVector};
use crate::pilot::{self, DesignParams, PilotMatrix};
use crate::sdp::{self, SolverConfig};
use crate::snr;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Quick,
    Full,
}

pub fn run_suite(suite: Suite, seed: u64) -> Result<Vec<Check>> {
    let (kalman_n, sdp_n, mc_n, mc_samples) = match suite {
        Suite::Quick => (10, 10, 1, 20_000),
        Suite::Full => (50, 100, 5, 100_000),
    };
    Ok(vec![
        kalman_vs_batch(kalman_n, seed)?,
        sdp_vs_waterfill(sdp_n, seed)?,
        monte_carlo_snr(mc_n, mc_samples, seed)?,
    ])
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

fn random_pd(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let g = random_matrix(n, n, rng);
    linalg::hermitian_part(&(&g * g.adjoint())) + linalg::identity(n) * c(0.1)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Relative agreement of the recursive filter with the batch estimator on
/// random small instances.
pub fn kalman_vs_batch(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4b41_4c4d);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let rank = rng.random_range(2..=5);
        let tt = rng.random_range(1..=rank);
        let a = rng.random_range(0.0..0.999);
        let blocks = rng.random_range(1..=6);
        let mut eig: Vec<f64> = (0..rank).map(|_| rng.random_range(0.1..3.0)).collect();
        eig.sort_by(|x, y| y.total_cmp(x));
        let sub = ChannelSubspace::from_eigenvalues(eig, a)?;
        let params = DesignParams {
            gamma: 1.0,
            rho: rng.random_range(0.5..10.0),
            noise_var: rng.random_range(0.2..2.0),
            train_len: tt,
        };
        let mut state = sub.sample_initial(&mut rng);
        let mut belief = KalmanBelief::initial(&sub);
        let (mut pilots, mut obs) = (Vec::new(), Vec::new());
        let mut post = None;
        for l in 0..blocks {
            let p = pilot::design_random_baseline(rank, &params, &mut rng)?;
            let o = kalman::simulate_observation(&state, &p, params.noise_var, &mut rng)?;
            let filtered = kalman::update(&belief, &p, &o)?;
            belief = kalman::predict(&filtered, &sub);
            pilots.push(p);
            obs.push(o);
            post = Some(filtered);
            if l + 1 < blocks {
                state = sub.evolve(&state, &mut rng);
            }
        }
        let post = post.expect("at least one block");
        let (mean, cov) = kalman::batch_mmse_oracle(&pilots, &obs, &sub, blocks - 1)?;
        let dm = (&post.mean - &mean).norm() / mean.norm().max(1.0);
        let dc = max_abs(&(&post.covariance - &cov)) / max_abs(&cov).max(1.0);
        worst = worst.max(dm).max(dc);
    }
    Ok(Check {
        name: "kalman_vs_batch",
        passed: worst <= 1e-8,
        detail: format!("{instances} instances, worst relative error {worst:.3e} (limit 1e-8)"),
    })
}

/// Diagonal instances (`ĝ = 0`, diagonal `P`): the solver must match
/// water-filling over all directions and return a diagonal optimum.
pub fn sdp_vs_waterfill(instances: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5344_5031);
    let cfg = SolverConfig::default();
    let (mut worst_obj, mut worst_kkt, mut worst_off): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..instances {
        let n = rng.random_range(2..=8);
        let gamma = rng.random_range(0.5..20.0);
        let budget = rng.random_range(0.5..30.0);
        let lambda: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..5.0)).collect();
        let belief = KalmanBelief {
            mean: CVector::zeros(n),
            covariance: linalg::diagonal(&lambda),
        };
        let obj = snr::build_objective(&belief, gamma, budget)?;
        let res = sdp::solve_trace_inverse_sdp(&obj, &cfg)?;

        let b: Vec<f64> = lambda.iter().map(|&l| gamma + 1.0 / l).collect();
        let (_, levels) = pilot::waterfill_nu(&b, gamma, budget)?;
        let closed: f64 = lambda
            .iter()
            .zip(&b)
            .zip(&levels)
            .map(|((&l, &bi), &x)| (gamma * l + 1.0) / (bi + x))
            .sum();
        worst_obj = worst_obj.max((res.objective - closed).abs() / closed.abs());
        worst_kkt = worst_kkt.max(res.kkt_residual);
        let mut off = res.x.clone();
        off.fill_diagonal(c(0.0));
        worst_off = worst_off.max(max_abs(&off));
    }
    Ok(Check {
        name: "sdp_vs_waterfill",
        passed: worst_obj <= 1e-4 && worst_kkt <= 1e-6 && worst_off <= 1e-6,
        detail: format!(
            "{instances} instances, objective rel err {worst_obj:.3e}, KKT {worst_kkt:.3e}, off-diagonal {worst_off:.3e}"
        ),
    })
}

/// Sample mean of the optimal SNR after one measurement update versus the
/// closed-form expectation, within three standard errors.
pub fn monte_carlo_snr(instances: usize, samples: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x4d43_534e);
    let mut worst_z: f64 = 0.0;
    for _ in 0..instances {
        let n = rng.random_range(2..=4);
        let tt = rng.random_range(1..=n);
        let gamma = rng.random_range(1.0..10.0);
        let noise_var = rng.random_range(0.5..2.0);
        let params = DesignParams { gamma, rho: 2.0, noise_var, train_len: tt };
        let belief = KalmanBelief {
            mean: random_matrix(n, 1, &mut rng).column(0).into_owned() * c(0.5),
            covariance: random_pd(n, &mut rng) * c(0.3),
        };
        let p = pilot::design_random_baseline(n, &params, &mut rng)?;
        let obj = snr::build_objective(&belief, gamma, params.normalized_budget())?;
        let analytic = obj
            .expected_snr_analytic(&p.normalized_gram(noise_var))
            .expect("received SNR criterion");

        let (mean, se) = sample_mean_snr(&belief, &p, gamma, noise_var, samples, &mut rng)?;
        worst_z = worst_z.max((mean - analytic).abs() / se);
    }
    Ok(Check {
        name: "monte_carlo_snr",
        passed: worst_z <= 3.0,
        detail: format!("{instances} instances x {samples} samples, worst deviation {worst_z:.2} standard errors (limit 3)"),
    })
}

/// Mean and standard error of `ĝᴴ(P + γ⁻¹I)⁻¹ĝ` over `g ~ CN(ĝ_pred, P_pred)`
/// and fresh noise.
pub fn sample_mean_snr(
    belief: &KalmanBelief,
    p: &PilotMatrix,
    gamma: f64,
    noise_var: f64,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let root = linalg::psd_sqrt(&belief.covariance);
    // the posterior covariance does not depend on y
    let cov = kalman::update(
        belief,
        p,
        &kalman::Observation { y: CVector::zeros(p.train_len()), noise_var },
    )?
    .covariance;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        let g = &belief.mean + linalg::sample_cn(&root, rng);
        let state = ChannelState { g, block_index: 0 };
        let obs = kalman::simulate_observation(&state, p, noise_var, rng)?;
        let mean = kalman::update(belief, p, &obs)?.mean;
        let v = snr::optimal_snr(&KalmanPosterior { mean, covariance: cov.clone() }, gamma)?;
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum_sq / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quick_suite_passes() {
        for check in run_suite(Suite::Quick, 1).unwrap() {
            assert!(check.passed, "{}: {}", check.name, check.detail);
        }
    }
}
