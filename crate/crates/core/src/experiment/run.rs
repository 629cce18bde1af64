use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::ChannelState;
use crate::error::Result;
use crate::kalman::{self, KalmanBelief};
use crate::linalg::{self, CVector};
use crate::pilot::{self, PilotMatrix};
use crate::snr;

use super::config::{ExperimentConfig, Method, ResolvedConfig};

const ROLE_CHANNEL: u64 = 1;
const ROLE_NOISE: u64 = 2;
const ROLE_DESIGN: u64 = 16;

/// Relative slack before a competing design counts as beating `sdr_snr`.
pub const DOMINANCE_TOL: f64 = 1e-6;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent generator for one `(seed, trial, block, role)` cell, so results
/// do not depend on thread scheduling or on which methods are enabled.
pub fn stream(seed: u64, trial: u64, block: u64, role: u64) -> ChaCha8Rng {
    let mut key = splitmix64(seed);
    for part in [trial, block, role] {
        key = splitmix64(key ^ part);
    }
    ChaCha8Rng::seed_from_u64(key)
}

fn design_role(method: Method) -> u64 {
    ROLE_DESIGN + Method::ALL.iter().position(|&m| m == method).unwrap_or(0) as u64
}

/// Averaged curves for one method at one block.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub method: Method,
    pub block: usize,
    pub nmse_mean: f64,
    pub snr_mean_linear: f64,
    pub snr_mean_db: f64,
    pub n_trials: usize,
    /// `γ|w̃ᴴg|²/‖w̃‖²` on the true channel, when requested.
    pub genie_snr_mean_linear: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockRecord {
    pub nmse: f64,
    pub snr: f64,
    pub genie_snr: f64,
}

/// Per-trial, per-block records in config method order.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub per_method: Vec<Vec<BlockRecord>>,
    pub solver_warnings: usize,
    pub dominance_checks: usize,
    pub dominance_violations: usize,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub points: Vec<CurvePoint>,
    pub trials: Vec<TrialRecord>,
    pub solver_warnings: usize,
    pub dominance_checks: usize,
    pub dominance_violations: usize,
}

fn channel_trajectory(rc: &ResolvedConfig, trial: u64) -> Vec<ChannelState> {
    let mut rng = stream(rc.config.seed, trial, 0, ROLE_CHANNEL);
    let mut states = Vec::with_capacity(rc.config.n_blocks);
    let mut state = rc.subspace.sample_initial(&mut rng);
    for _ in 0..rc.config.n_blocks {
        let next = rc.subspace.evolve(&state, &mut rng);
        states.push(std::mem::replace(&mut state, next));
    }
    states
}

struct Designed {
    pilot: PilotMatrix,
    solver_warning: bool,
}

fn design(
    rc: &ResolvedConfig,
    method: Method,
    belief: &KalmanBelief,
    block: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Designed> {
    let rank = rc.subspace.rank();
    let p = &rc.params;
    Ok(match method {
        Method::SdrSnr => {
            let d = pilot::design_sdr(belief, p, &rc.solver, &rc.randomization, rng)?;
            Designed { pilot: d.pilot, solver_warning: d.solver_warning }
        }
        Method::MseMin => {
            let d = pilot::design_mse_min(belief, p, &rc.solver, &rc.randomization, rng)?;
            Designed { pilot: d.pilot, solver_warning: d.solver_warning }
        }
        Method::Orthogonal => Designed {
            pilot: pilot::design_orthogonal_baseline(rank, p, block)?,
            solver_warning: false,
        },
        Method::Random => Designed {
            pilot: pilot::design_random_baseline(rank, p, rng)?,
            solver_warning: false,
        },
        Method::BlockiidSnr => Designed {
            pilot: pilot::design_block_iid(rc.subspace.eigenvalues(), p)?.to_pilot(rank, p)?,
            solver_warning: false,
        },
    })
}

/// Expected received SNR of a pilot under the current belief.
fn expected_snr(rc: &ResolvedConfig, belief: &KalmanBelief, pilot: &PilotMatrix) -> Result<Option<f64>> {
    let obj = snr::build_objective(belief, rc.params.gamma, rc.params.normalized_budget())?;
    Ok(obj.expected_snr_analytic(&pilot.normalized_gram(rc.params.noise_var)))
}

fn run_trial(rc: &ResolvedConfig, trial: u64) -> Result<TrialRecord> {
    let cfg = &rc.config;
    let states = channel_trajectory(rc, trial);
    let noise: Vec<CVector> = (0..cfg.n_blocks)
        .map(|l| linalg::standard_cn(cfg.train_len, &mut stream(cfg.seed, trial, l as u64, ROLE_NOISE)))
        .collect();

    let mut record = TrialRecord {
        per_method: Vec::with_capacity(cfg.methods.len()),
        solver_warnings: 0,
        dominance_checks: 0,
        dominance_violations: 0,
    };
    for &method in &cfg.methods {
        let mut belief = KalmanBelief::initial(&rc.subspace);
        let mut blocks = Vec::with_capacity(cfg.n_blocks);
        for (l, (state, z)) in states.iter().zip(&noise).enumerate() {
            let mut rng = stream(cfg.seed, trial, l as u64, design_role(method));
            let designed = design(rc, method, &belief, l, &mut rng)?;
            record.solver_warnings += designed.solver_warning as usize;

            if cfg.check_dominance && method == Method::SdrSnr {
                let own = expected_snr(rc, &belief, &designed.pilot)?.unwrap_or(f64::NEG_INFINITY);
                for other in [Method::MseMin, Method::Orthogonal, Method::Random] {
                    let mut rng = stream(cfg.seed, trial, l as u64, design_role(other));
                    let alt = design(rc, other, &belief, l, &mut rng)?;
                    let value = expected_snr(rc, &belief, &alt.pilot)?.unwrap_or(f64::NEG_INFINITY);
                    record.dominance_checks += 1;
                    if own < value - DOMINANCE_TOL * value.abs().max(1.0) {
                        record.dominance_violations += 1;
                    }
                }
            }

            let obs = kalman::observe(state, &designed.pilot, rc.params.noise_var, z)?;
            let post = kalman::update(&belief, &designed.pilot, &obs)?;
            let nmse = kalman::nmse(state, &post)?;
            let snr_value = snr::optimal_snr(&post, rc.params.gamma)?;
            let genie_snr = if cfg.genie_snr {
                let w = snr::optimal_beamformer(&post, rc.params.gamma)?.0;
                let norm = w.norm_squared();
                if norm > 0.0 {
                    rc.params.gamma * w.dotc(&state.g).norm_sqr() / norm
                } else {
                    0.0
                }
            } else {
                f64::NAN
            };
            blocks.push(BlockRecord { nmse, snr: snr_value, genie_snr });
            belief = kalman::predict(&post, &rc.subspace);
        }
        record.per_method.push(blocks);
    }
    Ok(record)
}

fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Monte Carlo over `n_trials` independent trajectories, trials in parallel.
///
/// All methods in a trial see the same channel trajectory and the same
/// standard noise draws; aggregation runs in trial order, so the output is
/// reproducible for a given seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let rc = cfg.resolve()?;
    let trials: Vec<TrialRecord> = (0..cfg.n_trials as u64)
        .into_par_iter()
        .map(|t| run_trial(&rc, t))
        .collect::<Result<_>>()?;

    let n = cfg.n_trials as f64;
    let mut points = Vec::with_capacity(cfg.methods.len() * cfg.n_blocks);
    for (mi, &method) in cfg.methods.iter().enumerate() {
        for block in 0..cfg.n_blocks {
            let mut nmse = 0.0;
            let mut snr_sum = 0.0;
            let mut genie = 0.0;
            for t in &trials {
                let r = t.per_method[mi][block];
                nmse += r.nmse;
                snr_sum += r.snr;
                genie += r.genie_snr;
            }
            let snr_mean_linear = snr_sum / n;
            points.push(CurvePoint {
                method,
                block,
                nmse_mean: nmse / n,
                snr_mean_linear,
                snr_mean_db: to_db(snr_mean_linear),
                n_trials: cfg.n_trials,
                genie_snr_mean_linear: cfg.genie_snr.then_some(genie / n),
            });
        }
    }
    points.sort_by(|a, b| (a.method.as_str(), a.block).cmp(&(b.method.as_str(), b.block)));

    Ok(ExperimentOutput {
        solver_warnings: trials.iter().map(|t| t.solver_warnings).sum(),
        dominance_checks: trials.iter().map(|t| t.dominance_checks).sum(),
        dominance_violations: trials.iter().map(|t| t.dominance_violations).sum(),
        points,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            n_antennas: 6,
            train_len: 2,
            n_blocks: 4,
            n_trials: 3,
            seed: 9,
            ..Default::default()
        }
    }

    #[test]
    fn streams_are_distinct_and_repeatable() {
        let draw = |s, t, b, r| stream(s, t, b, r).random::<u64>();
        assert_eq!(draw(1, 2, 3, 4), draw(1, 2, 3, 4));
        assert_ne!(draw(1, 2, 3, 4), draw(1, 2, 4, 3));
        assert_ne!(draw(1, 2, 3, 4), draw(1, 3, 2, 4));
        assert_ne!(draw(0, 0, 0, 0), draw(1, 0, 0, 0));
    }

    #[test]
    fn shape_and_order() {
        let out = run_experiment(&small()).unwrap();
        assert_eq!(out.points.len(), 5 * 4);
        let keys: Vec<_> = out.points.iter().map(|p| (p.method.as_str(), p.block)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        for p in &out.points {
            assert!(p.nmse_mean > 0.0 && p.nmse_mean.is_finite());
            assert!(p.snr_mean_linear >= 0.0);
            assert_eq!(p.n_trials, 3);
            assert!(p.genie_snr_mean_linear.is_none());
        }
    }

    #[test]
    fn method_subset_does_not_change_shared_results() {
        let full = run_experiment(&small()).unwrap();
        let only = run_experiment(&ExperimentConfig {
            methods: vec![Method::Orthogonal],
            ..small()
        })
        .unwrap();
        let from_full: Vec<_> = full.points.iter().filter(|p| p.method == Method::Orthogonal).collect();
        for (a, b) in from_full.iter().zip(&only.points) {
            assert_eq!(*a, b);
        }
    }

    #[test]
    fn dominance_holds_on_small_run() {
        let out = run_experiment(&ExperimentConfig {
            check_dominance: true,
            genie_snr: true,
            ..small()
        })
        .unwrap();
        assert_eq!(out.dominance_checks, 3 * 4 * 3);
        assert_eq!(out.dominance_violations, 0);
        assert!(out.points.iter().all(|p| p.genie_snr_mean_linear.unwrap() >= 0.0));
    }
}
