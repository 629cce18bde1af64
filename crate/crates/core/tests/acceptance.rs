//! Acceptance criteria 1 to 8. Runs as a plain binary (no libtest harness) so
//! that every criterion prints its PASS/FAIL line even when others fail.

use std::panic::{self, AssertUnwindSafe};
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use mimo_pilot::channel::{self, ChannelSubspace, JakesParams};
use mimo_pilot::experiment::{self, ExperimentConfig, Method};
use mimo_pilot::kalman::{self, KalmanBelief};
use mimo_pilot::pilot::{self, DesignParams, PilotMatrix};
use mimo_pilot::sdp::{self, SolverConfig};
use mimo_pilot::snr;

type M = DMatrix<Complex64>;

fn cz(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> M {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    M::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal) * s, rng.sample::<f64, _>(StandardNormal) * s)
    })
}

fn max_abs(m: &M) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn inverse(m: &M) -> M {
    m.clone().try_inverse().expect("invertible")
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn random_pilot(rank: usize, tt: usize, budget: f64, rng: &mut ChaCha8Rng) -> PilotMatrix {
    let s = gaussian(rank, tt, rng);
    let p: f64 = s.iter().map(|z| z.norm_sqr()).sum();
    PilotMatrix::new(s * cz((budget / p).sqrt() * 0.999_999), budget).unwrap()
}

fn criterion_1() -> Result<String, String> {
    let a = channel::jakes_coefficient(&JakesParams::from_kmh(2e9, 100e-6, 10, 3.0)).map_err(|e| e.to_string())?;
    let detail = format!("a(3 km/h) = {a:.6}, target 0.9997 +/- 5e-5");
    if (a - 0.9997).abs() <= 5e-5 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Posterior of the last block state from the joint prior `Σ` of all states
/// and the stacked observation `y = H g + n`:
/// `Σ − ΣHᴴ(HΣHᴴ + σ²I)⁻¹HΣ`. The prior itself is never inverted, since at
/// `a` close to 1 it is nearly singular.
fn joint_posterior_last(lambda: &[f64], a: f64, pilots: &[PilotMatrix], ys: &[M], noise_var: f64) -> (M, M) {
    let n = lambda.len();
    let blocks = pilots.len();
    let dim = n * blocks;
    let mut sigma = M::zeros(dim, dim);
    for i in 0..blocks {
        for j in 0..blocks {
            let lag = a.powi(i.abs_diff(j) as i32);
            for k in 0..n {
                sigma[(i * n + k, j * n + k)] = cz(lag * lambda[k]);
            }
        }
    }
    let rows: usize = pilots.iter().map(|p| p.train_len()).sum();
    let mut h = M::zeros(rows, dim);
    let mut y = M::zeros(rows, 1);
    let mut r = 0;
    for (i, (p, yi)) in pilots.iter().zip(ys).enumerate() {
        let tt = p.train_len();
        h.view_mut((r, i * n), (tt, n)).copy_from(&p.matrix().adjoint());
        y.view_mut((r, 0), (tt, 1)).copy_from(yi);
        r += tt;
    }
    let cross = &sigma * h.adjoint();
    let gain = &cross * inverse(&(&h * &cross + M::identity(rows, rows) * cz(noise_var)));
    let cov = &sigma - &gain * cross.adjoint();
    let mean = gain * y;
    let last = (blocks - 1) * n;
    (
        mean.view((last, 0), (n, 1)).into_owned(),
        cov.view((last, last), (n, n)).into_owned(),
    )
}

fn criterion_2() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let fadings = [0.0, 0.5, 0.9997];
    let mut worst: f64 = 0.0;
    for inst in 0..50 {
        let rank = rng.random_range(1..=4);
        let tt = rng.random_range(1..=rank);
        let a = fadings[inst % 3];
        let blocks = rng.random_range(1..=7);
        let mut lambda: Vec<f64> = (0..rank).map(|_| rng.random_range(0.2..4.0)).collect();
        lambda.sort_by(|x, y| y.total_cmp(x));
        let noise_var = rng.random_range(0.3..2.0);
        let sub = ChannelSubspace::from_eigenvalues(lambda.clone(), a).map_err(|e| e.to_string())?;

        let mut state = sub.sample_initial(&mut rng);
        let mut belief = KalmanBelief::initial(&sub);
        let (mut pilots, mut ys) = (Vec::new(), Vec::new());
        let mut post = None;
        for l in 0..blocks {
            if l > 0 {
                state = sub.evolve(&state, &mut rng);
            }
            let budget = rng.random_range(0.5..20.0);
            let p = random_pilot(rank, tt, budget, &mut rng);
            let obs = kalman::simulate_observation(&state, &p, noise_var, &mut rng).map_err(|e| e.to_string())?;
            let filtered = kalman::update(&belief, &p, &obs).map_err(|e| e.to_string())?;
            belief = kalman::predict(&filtered, &sub);
            ys.push(M::from_column_slice(tt, 1, obs.y.as_slice()));
            pilots.push(p);
            post = Some(filtered);
        }
        let post = post.unwrap();
        let (mean, cov) = joint_posterior_last(&lambda, a, &pilots, &ys, noise_var);
        let got_mean = M::from_column_slice(rank, 1, post.mean.as_slice());
        let dm = max_abs(&(&got_mean - &mean)) / max_abs(&mean).max(1e-3);
        let dc = max_abs(&(&post.covariance - &cov)) / max_abs(&cov);
        worst = worst.max(dm).max(dc);
    }
    let detail = format!("50 instances, worst relative deviation {worst:.2e} (limit 1e-8)");
    if worst <= 1e-8 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_3() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let samples = 100_000;
    let mut worst: f64 = 0.0;
    let mut parts = Vec::new();
    for _ in 0..5 {
        let n = rng.random_range(2..=4);
        let tt = rng.random_range(1..=n);
        let gamma = 10f64.powf(rng.random_range(0.0..1.5));
        let noise_var = rng.random_range(0.5..2.0);
        let g = gaussian(n, n, &mut rng);
        let p_pred = &g * g.adjoint() * cz(0.3) + M::identity(n, n) * cz(0.05);
        let g_pred = gaussian(n, 1, &mut rng) * cz(0.8);
        let pilot = random_pilot(n, tt, rng.random_range(1.0..10.0), &mut rng);
        let s = pilot.matrix().clone();

        let belief = KalmanBelief {
            mean: g_pred.column(0).into_owned(),
            covariance: p_pred.clone(),
        };
        let obj = snr::build_objective(&belief, gamma, 1.0).map_err(|e| e.to_string())?;
        let analytic = obj
            .expected_snr_analytic(&pilot.normalized_gram(noise_var))
            .ok_or("no analytic SNR")?;

        // measurement update written out directly
        let innov = M::identity(tt, tt) * cz(noise_var) + s.adjoint() * &p_pred * &s;
        let gain = &p_pred * &s * inverse(&innov);
        let p_post = &p_pred - &gain * s.adjoint() * &p_pred;
        let loaded_inv = inverse(&(&p_post + M::identity(n, n) * cz(1.0 / gamma)));
        let root = p_pred.clone().cholesky().ok_or("prior covariance not PD")?.l();

        let (mut sum, mut sum_sq) = (0.0, 0.0);
        for _ in 0..samples {
            let h = &g_pred + &root * gaussian(n, 1, &mut rng);
            let y = s.adjoint() * &h + gaussian(tt, 1, &mut rng) * cz(noise_var.sqrt());
            let est = &g_pred + &gain * (y - s.adjoint() * &g_pred);
            let v = (est.adjoint() * &loaded_inv * &est)[(0, 0)].re;
            sum += v;
            sum_sq += v * v;
        }
        let m = samples as f64;
        let mean = sum / m;
        let se = ((sum_sq / m - mean * mean) * m / (m - 1.0) / m).sqrt();
        let z = (mean - analytic).abs() / se;
        worst = worst.max(z);
        parts.push(format!("{z:.2}"));
    }
    let detail = format!("5 instances x 1e5 samples, |MC - analytic| / SE = [{}] (limit 3)", parts.join(", "));
    if worst <= 3.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// `x_i = max(−γ − 1/λ_i + √((γλ_i + 1)/ν), 0)` over all indices, `ν` by
/// bisection in log space.
fn waterfill_all(lambda: &[f64], gamma: f64, budget: f64) -> Vec<f64> {
    let level = |l: f64, nu: f64| (-gamma - 1.0 / l + ((gamma * l + 1.0) / nu).sqrt()).max(0.0);
    let power = |nu: f64| lambda.iter().map(|&l| level(l, nu)).sum::<f64>();
    let (mut lo, mut hi) = (1e-300f64.ln(), 1e300f64.ln());
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if power(mid.exp()) > budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nu = (0.5 * (lo + hi)).exp();
    lambda.iter().map(|&l| level(l, nu)).collect()
}

fn criterion_4() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = SolverConfig::default();
    let (mut worst_rel, mut worst_kkt, mut worst_off): (f64, f64, f64) = (0.0, 0.0, 0.0);
    let mut wider = 0;
    let mut restricted_violations = 0;
    for _ in 0..100 {
        let n = rng.random_range(1..=16);
        let tt = rng.random_range(1..=n);
        let gamma = 10f64.powf(rng.random_range(-0.5..2.0));
        let noise_var = rng.random_range(0.5..2.0);
        let rho = noise_var * 10f64.powf(rng.random_range(-1.0..2.0));
        let mut lambda: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.5..1.0))).collect();
        lambda.sort_by(|x, y| y.total_cmp(x));
        let params = DesignParams { gamma, rho, noise_var, train_len: tt };
        let belief = KalmanBelief {
            mean: mimo_pilot::linalg::CVector::zeros(n),
            covariance: mimo_pilot::linalg::diagonal(&lambda),
        };
        let obj = snr::build_objective(&belief, gamma, params.normalized_budget()).map_err(|e| e.to_string())?;
        let res = sdp::solve_trace_inverse_sdp(&obj, &cfg).map_err(|e| e.to_string())?;

        let value = |x: &[f64]| -> f64 {
            lambda
                .iter()
                .zip(x)
                .map(|(&l, &xi)| (gamma * l + 1.0) / (gamma + 1.0 / l + xi))
                .sum()
        };
        let levels = waterfill_all(&lambda, gamma, params.normalized_budget());
        let relaxed = value(&levels);
        worst_rel = worst_rel.max((res.objective - relaxed).abs() / relaxed);
        worst_kkt = worst_kkt.max(res.kkt_residual);
        let diag: f64 = (0..n).map(|i| res.x[(i, i)].norm()).sum();
        let off: f64 = res.x.iter().map(|z| z.norm()).sum::<f64>() - diag;
        worst_off = worst_off.max(off / diag);

        let closed = pilot::design_block_iid(&lambda, &params).map_err(|e| e.to_string())?;
        let mut x_tt = vec![0.0; n];
        for (&i, &x) in closed.indices.iter().zip(&closed.levels) {
            x_tt[i] = x;
        }
        let restricted = value(&x_tt);
        if levels.iter().filter(|&&x| x > 0.0).count() > tt {
            wider += 1;
        }
        if res.objective > restricted * (1.0 + 1e-9) {
            restricted_violations += 1;
        }
    }
    let detail = format!(
        "100 instances: objective rel dev {worst_rel:.2e} (limit 1e-4), KKT {worst_kkt:.2e} (limit 1e-6), \
         off/diag {worst_off:.2e} (limit 1e-6); relaxed optimum used > T_t directions in {wider}, \
         solver worse than the T_t closed form in {restricted_violations}"
    );
    if worst_rel <= 1e-4 && worst_kkt <= 1e-6 && worst_off <= 1e-6 && restricted_violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_5() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut worst_power, mut worst_form): (f64, f64) = (0.0, 0.0);
    for _ in 0..1000 {
        let n = rng.random_range(1..=16);
        let gamma = 10f64.powf(rng.random_range(-1.0..2.0));
        let budget = 10f64.powf(rng.random_range(-2.0..2.0));
        let lambda: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-2.0..1.0))).collect();
        let b: Vec<f64> = lambda.iter().map(|&l| gamma + 1.0 / l).collect();
        let (nu, levels) = pilot::waterfill_nu(&b, gamma, budget).map_err(|e| e.to_string())?;
        let total: f64 = levels.iter().sum();
        worst_power = worst_power.max((total - budget).abs() / budget);
        for ((&l, &bi), &x) in lambda.iter().zip(&b).zip(&levels) {
            let first = (-bi + (bi / (nu * (bi - gamma))).sqrt()).max(0.0);
            let second = (-gamma - 1.0 / l + ((gamma * l + 1.0) / nu).sqrt()).max(0.0);
            let scale = 1.0 + bi;
            worst_form = worst_form
                .max((first - second).abs() / scale)
                .max((x - second).abs() / scale);
        }
    }
    let detail = format!(
        "1000 inputs: power rel dev {worst_power:.2e} (limit 1e-9), form disagreement {worst_form:.2e} (limit 1e-12)"
    );
    if worst_power <= 1e-9 && worst_form <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn reference_config() -> ExperimentConfig {
    ExperimentConfig {
        speed_kmh: Some(3.0),
        n_blocks: 40,
        n_trials: 100,
        seed: 20,
        ..Default::default()
    }
}

fn criterion_6() -> Result<String, String> {
    let cfg = reference_config();
    let out = experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let mean_over = |m: Method, blocks: std::ops::Range<usize>, snr: bool| -> f64 {
        let pts: Vec<_> = out
            .points
            .iter()
            .filter(|p| p.method == m && blocks.contains(&p.block))
            .collect();
        let s: f64 = pts.iter().map(|p| if snr { p.snr_mean_linear } else { p.nmse_mean }).sum();
        s / pts.len() as f64
    };
    let steady = |m| db(mean_over(m, 20..40, true));
    let early = |m| db(mean_over(m, 0..6, true));
    let (sdr, mse, orth, rand) = (
        steady(Method::SdrSnr),
        steady(Method::MseMin),
        steady(Method::Orthogonal),
        steady(Method::Random),
    );
    let (early_sdr, early_orth) = (early(Method::SdrSnr), early(Method::Orthogonal));
    let (nmse_sdr, nmse_mse) = (mean_over(Method::SdrSnr, 20..40, false), mean_over(Method::MseMin, 20..40, false));
    let a = sdr - orth > 0.0 && sdr - rand > 0.0 && sdr >= mse;
    let b = early_sdr > early_orth;
    let c = nmse_mse <= nmse_sdr;
    let detail = format!(
        "(a) steady SNR dB sdr {sdr:.3} mse_min {mse:.3} orthogonal {orth:.3} random {rand:.3}: {}; \
         (b) blocks 0-5 sdr {early_sdr:.3} vs orthogonal {early_orth:.3}: {}; \
         (c) steady NMSE mse_min {nmse_mse:.4} vs sdr {nmse_sdr:.4}: {}; solver warnings {}",
        if a { "ok" } else { "violated" },
        if b { "ok" } else { "violated" },
        if c { "ok" } else { "violated" },
        out.solver_warnings,
    );
    if a && b && c {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_7() -> Result<String, String> {
    let cfg = ExperimentConfig {
        speed_kmh: None,
        fading_coefficient: Some(0.0),
        methods: vec![Method::BlockiidSnr, Method::MseMin],
        seed: 7,
        ..reference_config()
    };
    let out = experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let diffs: Vec<f64> = out
        .trials
        .iter()
        .flat_map(|t| t.per_method[0].iter().zip(&t.per_method[1]).map(|(x, y)| x.snr - y.snr))
        .collect();
    let n = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let se = (var / n).sqrt();
    let detail = format!(
        "{} paired blocks, mean SNR(closed form) - SNR(mse_min) = {mean:.4} (SE {se:.4}), one-sided 5% bound {:.4}",
        diffs.len(),
        -1.645 * se
    );
    if diffs.len() >= 500 && mean >= -1.645 * se {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_8() -> Result<String, String> {
    let cfg = ExperimentConfig {
        n_antennas: 8,
        n_blocks: 6,
        n_trials: 12,
        seed: 8,
        ..Default::default()
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for run in 0..2 {
        let out = experiment::run_experiment(&cfg).map_err(|e| e.to_string())?;
        let path = dir.path().join(format!("run{run}.csv"));
        experiment::emit_csv(&out.points, &[cfg.metadata()], &path).map_err(|e| e.to_string())?;
        files.push(std::fs::read(&path).map_err(|e| e.to_string())?);
    }
    let detail = format!("two runs, {} and {} bytes", files[0].len(), files[1].len());
    if files[0] == files[1] && !files[0].is_empty() {
        Ok(format!("{detail}, identical"))
    } else {
        Err(format!("{detail}, differ"))
    }
}

fn main() {
    let criteria: [(&str, fn() -> Result<String, String>); 8] = [
        ("1 jakes coefficient", criterion_1),
        ("2 kalman vs joint posterior", criterion_2),
        ("3 analytic vs simulated SNR", criterion_3),
        ("4 relaxed solver vs water-filling", criterion_4),
        ("5 water-filling bisection", criterion_5),
        ("6 reference curves ordering", criterion_6),
        ("7 block iid closed form vs mse_min", criterion_7),
        ("8 deterministic csv", criterion_8),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {name}: PASS ({secs:.1} s) {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {name}: FAIL ({secs:.1} s) {d}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", 8 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
