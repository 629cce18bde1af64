use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::channel::{self, ChannelSubspace, JakesParams, SpatialCorrelation};
use crate::error::{Error, Result};
use crate::pilot::{DesignParams, RandomizationConfig};
use crate::sdp::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    SdrSnr,
    MseMin,
    Orthogonal,
    Random,
    BlockiidSnr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::SdrSnr,
        Method::MseMin,
        Method::Orthogonal,
        Method::Random,
        Method::BlockiidSnr,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::SdrSnr => "sdr_snr",
            Method::MseMin => "mse_min",
            Method::Orthogonal => "orthogonal",
            Method::Random => "random",
            Method::BlockiidSnr => "blockiid_snr",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method `{s}`"))
    }
}

/// Flat key-value experiment description (TOML on disk).
///
/// Missing keys take the defaults below: 16 antennas, `r = 0.9`, 2 GHz,
/// `T_s = 100 µs`, `T = 10`, `T_t = 3`, 3 km/h, `ρ/σ² = γ = 10 dB`, 40 blocks,
/// 100 trials. `speed_kmh` and `fading_coefficient` are mutually exclusive.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n_antennas: usize,
    pub r: f64,
    pub carrier_freq_hz: f64,
    pub symbol_duration_s: f64,
    pub block_len: usize,
    pub train_len: usize,
    pub speed_kmh: Option<f64>,
    pub fading_coefficient: Option<f64>,
    pub rho_db: f64,
    pub gamma_db: f64,
    pub noise_var: f64,
    pub n_blocks: usize,
    pub n_trials: usize,
    pub seed: u64,
    pub methods: Vec<Method>,
    /// Extra CSV column with the SNR of the designed beamformer on the true channel.
    pub genie_snr: bool,
    /// Count blocks where another design beats `sdr_snr` under its own belief.
    pub check_dominance: bool,
    pub solver_max_iters: usize,
    pub solver_rel_obj_tol: f64,
    pub solver_kkt_tol: f64,
    pub solver_initial_step: f64,
    pub solver_backtrack_factor: f64,
    pub solver_armijo_c: f64,
    pub randomization_candidates: usize,
    pub randomization_refine: bool,
    pub randomization_refine_iters: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let solver = SolverConfig::default();
        let rand = RandomizationConfig::default();
        Self {
            n_antennas: 16,
            r: 0.9,
            carrier_freq_hz: 2e9,
            symbol_duration_s: 100e-6,
            block_len: 10,
            train_len: 3,
            speed_kmh: None,
            fading_coefficient: None,
            rho_db: 10.0,
            gamma_db: 10.0,
            noise_var: 1.0,
            n_blocks: 40,
            n_trials: 100,
            seed: 0,
            methods: Method::ALL.to_vec(),
            genie_snr: false,
            check_dominance: false,
            solver_max_iters: solver.max_iters,
            solver_rel_obj_tol: solver.rel_obj_tol,
            solver_kkt_tol: solver.kkt_tol,
            solver_initial_step: solver.initial_step,
            solver_backtrack_factor: solver.backtrack_factor,
            solver_armijo_c: solver.armijo_c,
            randomization_candidates: rand.candidates,
            randomization_refine: rand.refine,
            randomization_refine_iters: rand.refine_iters,
        }
    }
}

pub const DEFAULT_SPEED_KMH: f64 = 3.0;

/// A validated config with the derived channel model and design parameters.
#[derive(Debug, Clone)]
pub struct ResolvedConfig {
    pub config: ExperimentConfig,
    pub subspace: ChannelSubspace,
    pub params: DesignParams,
    pub solver: SolverConfig,
    pub randomization: RandomizationConfig,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .span()
                .and_then(|span| text.get(span))
                .map(|s| s.trim().to_string())
                .unwrap_or_else(|| "<config>".to_string());
            Error::config(field, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            max_iters: self.solver_max_iters,
            rel_obj_tol: self.solver_rel_obj_tol,
            kkt_tol: self.solver_kkt_tol,
            initial_step: self.solver_initial_step,
            backtrack_factor: self.solver_backtrack_factor,
            armijo_c: self.solver_armijo_c,
        }
    }

    pub fn randomization_config(&self) -> RandomizationConfig {
        RandomizationConfig {
            candidates: self.randomization_candidates,
            refine: self.randomization_refine,
            refine_iters: self.randomization_refine_iters,
        }
    }

    /// `ρ = σ² · 10^(rho_db/10)`.
    pub fn rho(&self) -> f64 {
        self.noise_var * 10f64.powf(self.rho_db / 10.0)
    }

    /// `γ = 10^(gamma_db/10)`.
    pub fn gamma(&self) -> f64 {
        10f64.powf(self.gamma_db / 10.0)
    }

    /// Temporal coefficient `a`, explicit or from Jakes' model.
    pub fn fading(&self) -> Result<f64> {
        match (self.speed_kmh, self.fading_coefficient) {
            (Some(_), Some(_)) => Err(Error::config(
                "speed_kmh",
                "mutually exclusive with fading_coefficient",
            )),
            (None, Some(a)) => Ok(a),
            (speed, None) => {
                let kmh = speed.unwrap_or(DEFAULT_SPEED_KMH);
                let p = JakesParams::from_kmh(self.carrier_freq_hz, self.symbol_duration_s, self.block_len, kmh);
                channel::jakes_coefficient(&p).map_err(|e| Error::config("speed_kmh", e.to_string()))
            }
        }
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let positive = [
            ("carrier_freq_hz", self.carrier_freq_hz),
            ("symbol_duration_s", self.symbol_duration_s),
            ("noise_var", self.noise_var),
        ];
        for (field, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(field, format!("must be positive, got {v}")));
            }
        }
        for (field, v) in [("rho_db", self.rho_db), ("gamma_db", self.gamma_db)] {
            if !v.is_finite() {
                return Err(Error::config(field, "must be finite"));
            }
        }
        if let Some(v) = self.speed_kmh {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::config("speed_kmh", format!("must be non-negative, got {v}")));
            }
        }
        if self.block_len == 0 {
            return Err(Error::config("block_len", "must be at least 1"));
        }
        if self.train_len == 0 || self.train_len > self.block_len {
            return Err(Error::config(
                "train_len",
                format!("must be in 1..={} (block_len)", self.block_len),
            ));
        }
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be at least 1"));
        }
        if self.n_blocks == 0 {
            return Err(Error::config("n_blocks", "must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "empty"));
        }
        let mut seen = self.methods.clone();
        seen.sort();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::config("methods", "duplicate entry"));
        }
        if self.randomization_candidates == 0 {
            return Err(Error::config("randomization_candidates", "must be at least 1"));
        }
        let solver = self.solver_config();
        solver.validate().map_err(|e| Error::config("solver", e.to_string()))?;

        let a = self.fading()?;
        if !(0.0..=1.0).contains(&a) {
            let field = if self.fading_coefficient.is_some() {
                "fading_coefficient"
            } else {
                "speed_kmh"
            };
            return Err(Error::config(field, format!("temporal coefficient {a} outside [0, 1]")));
        }
        let r_h = SpatialCorrelation::exponential(self.n_antennas, self.r).map_err(|e| match e {
            Error::InvalidParameter { name, reason } => Error::config(name, reason),
            other => other,
        })?;
        let subspace = ChannelSubspace::from_correlation(&r_h, a, channel::DEFAULT_RANK_TOL)?;
        if self.train_len > subspace.rank() {
            return Err(Error::config(
                "train_len",
                format!("exceeds channel rank {}", subspace.rank()),
            ));
        }
        let params = DesignParams {
            gamma: self.gamma(),
            rho: self.rho(),
            noise_var: self.noise_var,
            train_len: self.train_len,
        };
        Ok(ResolvedConfig {
            config: self.clone(),
            subspace,
            params,
            solver,
            randomization: self.randomization_config(),
        })
    }

    /// One-line `key=value` summary written as the CSV comment header.
    pub fn metadata(&self) -> String {
        let a = self
            .fading()
            .map(|a| format!("{a:.6}"))
            .unwrap_or_else(|_| "invalid".into());
        let methods: Vec<&str> = self.methods.iter().map(|m| m.as_str()).collect();
        format!(
            "n_antennas={} r={} train_len={} block_len={} a={} rho_db={} gamma_db={} noise_var={} \
             n_blocks={} n_trials={} seed={} methods={} snr_average=linear_then_db \
             orthogonal=round_robin_eigen_directions random=isotropic_unit_power_columns",
            self.n_antennas,
            self.r,
            self.train_len,
            self.block_len,
            a,
            self.rho_db,
            self.gamma_db,
            self.noise_var,
            self.n_blocks,
            self.n_trials,
            self.seed,
            methods.join(","),
        )
    }
}
