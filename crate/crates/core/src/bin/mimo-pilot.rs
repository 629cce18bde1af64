use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mimo_pilot::experiment::{self, ExperimentConfig};
use mimo_pilot::kalman::KalmanBelief;
use mimo_pilot::pilot;
use mimo_pilot::snr;
use mimo_pilot::validation::{self, Suite};
use mimo_pilot::Error;

#[derive(Parser)]
#[command(
    name = "mimo-pilot",
    version,
    about = "Pilot design and channel tracking for FDD massive MISO"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the Monte Carlo experiment and write averaged curves as CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Adds the true-channel SNR of the designed beamformer as a column.
        #[arg(long)]
        genie_snr: bool,
    },
    /// Print the first-block pilot design for a config.
    Design {
        #[arg(long)]
        config: PathBuf,
        /// Closed-form water-filling table for the block i.i.d. channel.
        #[arg(long)]
        block_iid: bool,
    },
    /// Run the built-in oracle checks.
    Validate {
        /// Smaller instance counts.
        #[arg(long)]
        quick: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

/// Exit status 2 for bad input (usage, missing or invalid config), 1 otherwise.
fn fail(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::Io { .. } | Error::Config { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn run(config: PathBuf, out: PathBuf, seed: Option<u64>, genie_snr: bool) -> Result<(), Error> {
    let mut cfg = ExperimentConfig::load(&config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.genie_snr |= genie_snr;
    let output = experiment::run_experiment(&cfg)?;
    experiment::emit_csv(&output.points, &[cfg.metadata()], &out)?;
    eprintln!(
        "wrote {} rows to {}; solver warnings: {}",
        output.points.len(),
        out.display(),
        output.solver_warnings
    );
    if cfg.check_dominance {
        eprintln!(
            "dominance violations: {} of {} checks",
            output.dominance_violations, output.dominance_checks
        );
    }
    Ok(())
}

fn design(config: PathBuf, block_iid: bool) -> Result<String, Error> {
    let mut out = String::new();
    let cfg = ExperimentConfig::load(&config)?;
    let rc = cfg.resolve()?;
    let lambda = rc.subspace.eigenvalues();
    let _ = writeln!(
        out,
        "rank {}  a {:.6}  gamma {:.4}  rho {:.4}  noise_var {}  train_len {}",
        rc.subspace.rank(),
        rc.subspace.fading(),
        rc.params.gamma,
        rc.params.rho,
        rc.params.noise_var,
        rc.params.train_len
    );
    if block_iid {
        let wf = pilot::design_block_iid(lambda, &rc.params)?;
        let _ = writeln!(out, "nu {:.9e}", wf.nu);
        let _ = writeln!(out, "{:>5} {:>14} {:>14}", "index", "lambda", "power");
        for (&i, &x) in wf.indices.iter().zip(&wf.levels) {
            let _ = writeln!(
                out,
                "{:>5} {:>14.6e} {:>14.6e}",
                i + 1,
                lambda[i],
                x * rc.params.noise_var
            );
        }
        return Ok(out);
    }
    let belief = KalmanBelief::initial(&rc.subspace);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let d = pilot::design_sdr(&belief, &rc.params, &rc.solver, &rc.randomization, &mut rng)?;
    let obj = snr::build_objective(&belief, rc.params.gamma, rc.params.normalized_budget())?;
    let expected = obj
        .expected_snr_analytic(&d.pilot.normalized_gram(rc.params.noise_var))
        .unwrap_or(f64::NAN);
    let _ = writeln!(
        out,
        "solver: {} iterations, objective {:.9e}, KKT residual {:.3e}, converged {}",
        d.solver.iterations, d.solver.objective, d.solver.kkt_residual, d.solver.converged
    );
    let _ = writeln!(out, "extraction: {:?}", d.path);
    let _ = writeln!(
        out,
        "pilot power {:.6e} (budget {:.6e})",
        d.pilot.power(),
        d.pilot.power_budget()
    );
    let _ = writeln!(out, "expected SNR {:.6e} ({:.3} dB)", expected, 10.0 * expected.log10());
    Ok(out)
}

fn validate(quick: bool, seed: u64) -> Result<bool, Error> {
    let suite = if quick { Suite::Quick } else { Suite::Full };
    let mut all = true;
    for check in validation::run_suite(suite, seed)? {
        let tag = if check.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", check.name, check.detail);
        all &= check.passed;
    }
    Ok(all)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run {
            config,
            out,
            seed,
            genie_snr,
        } => run(config, out, seed, genie_snr).map(|_| true),
        Command::Design { config, block_iid } => design(config, block_iid).map(|text| {
            // a closed pipe (e.g. `| head`) is not an error
            let _ = std::io::stdout().write_all(text.as_bytes());
            true
        }),
        Command::Validate { quick, seed } => validate(quick, seed),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => fail(&e),
    }
}
