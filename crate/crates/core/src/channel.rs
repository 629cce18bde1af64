//! Spatial and temporal channel statistics and the block Gauss-Markov channel
//! in the reduced eigen-domain.
//!
//! The full `N_t`-dimensional channel is `h_l = U g_l`, where `U` holds the
//! eigenvectors of the spatial correlation `R_h` with non-zero eigenvalues and
//! `g_l` evolves as `g_{l+1} = a g_l + √(1−a²) e_l`, `e_l ~ CN(0, Λ)`.

use rand::Rng;

use crate::bessel::j0;
use crate::error::{Error, Result};
use crate::linalg::{self, c, CMatrix, CVector, HermitianEigen};

pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

/// Relative PSD tolerance: smallest eigenvalue must be `≥ −ε·λ_max`.
pub const PSD_TOL: f64 = 1e-10;

pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Spatial covariance `R_h` of the transmit-side channel.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialCorrelation {
    matrix: CMatrix,
}

impl SpatialCorrelation {
    /// Validates that `matrix` is square and Hermitian as stored, with no
    /// eigenvalue below `-PSD_TOL` times the largest.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                context: "spatial correlation",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::invalid("n_antennas", "must be at least 1"));
        }
        if !linalg::is_finite(&matrix) {
            return Err(Error::NonFinite("spatial correlation"));
        }
        if linalg::hermitian_defect(&matrix) != 0.0 {
            return Err(Error::invalid("spatial correlation", "not Hermitian"));
        }
        let eig = HermitianEigen::new(&matrix);
        if eig.min() < -PSD_TOL * eig.max().abs() {
            return Err(Error::invalid(
                "spatial correlation",
                format!("not PSD (min eigenvalue {:e})", eig.min()),
            ));
        }
        Ok(Self { matrix })
    }

    /// Exponential model `R(i, j) = r^{2|i−j|}`.
    pub fn exponential(n_antennas: usize, r: f64) -> Result<Self> {
        if n_antennas == 0 {
            return Err(Error::invalid("n_antennas", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&r) {
            return Err(Error::invalid("r", format!("{r} outside [0, 1)")));
        }
        let matrix = CMatrix::from_fn(n_antennas, n_antennas, |i, j| {
            c(r.powi(2 * i.abs_diff(j) as i32))
        });
        Self::new(matrix)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Channel subspace `(U, Λ)` together with the temporal coefficient `a`.
#[derive(Debug, Clone)]
pub struct ChannelSubspace {
    basis: CMatrix,
    eigenvalues: Vec<f64>,
    fading: f64,
}

impl ChannelSubspace {
    /// Keeps eigenpairs with `λ_i > rank_tol · λ_1`.
    pub fn from_correlation(r_h: &SpatialCorrelation, a: f64, rank_tol: f64) -> Result<Self> {
        check_fading(a)?;
        if !(rank_tol > 0.0 && rank_tol < 1.0) {
            return Err(Error::invalid("rank_tol", format!("{rank_tol} outside (0, 1)")));
        }
        let eig = HermitianEigen::new(r_h.matrix());
        let top = eig.max();
        if top <= 0.0 {
            return Err(Error::EmptySubspace);
        }
        let rank = eig.values.iter().take_while(|&&v| v > rank_tol * top).count();
        Ok(Self {
            basis: eig.vectors.columns(0, rank).into_owned(),
            eigenvalues: eig.values[..rank].to_vec(),
            fading: a,
        })
    }

    /// Subspace already expressed in its own eigenbasis (`U` = canonical
    /// embedding). `eigenvalues` must be positive and non-increasing.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, a: f64) -> Result<Self> {
        check_fading(a)?;
        if eigenvalues.is_empty() {
            return Err(Error::EmptySubspace);
        }
        if eigenvalues.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("eigenvalues", "must be finite and positive"));
        }
        if eigenvalues.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::invalid("eigenvalues", "must be non-increasing"));
        }
        let n = eigenvalues.len();
        Ok(Self {
            basis: linalg::identity(n),
            eigenvalues,
            fading: a,
        })
    }

    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.basis.nrows()
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn lambda(&self) -> CMatrix {
        linalg::diagonal(&self.eigenvalues)
    }

    pub fn fading(&self) -> f64 {
        self.fading
    }

    pub fn sample_initial<R: Rng + ?Sized>(&self, rng: &mut R) -> ChannelState {
        ChannelState {
            g: self.innovation(rng),
            block_index: 0,
        }
    }

    pub fn evolve<R: Rng + ?Sized>(&self, state: &ChannelState, rng: &mut R) -> ChannelState {
        let a = self.fading;
        let e = self.innovation(rng);
        let g = state.g.map(|z| z * a) + e * c((1.0 - a * a).sqrt());
        ChannelState {
            g,
            block_index: state.block_index + 1,
        }
    }

    /// `h = U g`.
    pub fn lift(&self, state: &ChannelState) -> Result<CVector> {
        if state.g.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                context: "lift",
                expected: self.rank(),
                found: state.g.len(),
            });
        }
        Ok(&self.basis * &state.g)
    }

    /// `U Λ Uᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.basis.clone();
        for (j, &v) in self.eigenvalues.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        scaled * self.basis.adjoint()
    }

    /// Draw from `CN(0, Λ)`; Λ is diagonal so its square root is entrywise.
    fn innovation<R: Rng + ?Sized>(&self, rng: &mut R) -> CVector {
        let z = linalg::standard_cn(self.rank(), rng);
        CVector::from_fn(self.rank(), |i, _| z[i] * self.eigenvalues[i].sqrt())
    }
}

fn check_fading(a: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::invalid("a", format!("{a} outside [0, 1]")));
    }
    Ok(())
}

/// Reduced-domain channel `g_l` for block `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub g: CVector,
    pub block_index: usize,
}

/// Timing and mobility parameters for Jakes' temporal correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JakesParams {
    pub carrier_freq_hz: f64,
    pub symbol_duration_s: f64,
    pub block_len: usize,
    pub speed_mps: f64,
}

impl JakesParams {
    pub fn from_kmh(carrier_freq_hz: f64, symbol_duration_s: f64, block_len: usize, kmh: f64) -> Self {
        Self {
            carrier_freq_hz,
            symbol_duration_s,
            block_len,
            speed_mps: kmh / 3.6,
        }
    }

    pub fn doppler_hz(&self) -> f64 {
        self.speed_mps * self.carrier_freq_hz / SPEED_OF_LIGHT
    }
}

/// `a = J0(2π f_d T_s T)`.
///
/// The raw Bessel value is returned; it is negative for fast enough fading and
/// callers must check it against the `a ∈ [0, 1]` requirement themselves.
pub fn jakes_coefficient(p: &JakesParams) -> Result<f64> {
    let fields = [
        ("carrier_freq_hz", p.carrier_freq_hz),
        ("symbol_duration_s", p.symbol_duration_s),
        ("speed", p.speed_mps),
    ];
    for (name, v) in fields {
        if v.is_nan() {
            return Err(Error::invalid(name, "NaN"));
        }
    }
    if !(p.carrier_freq_hz > 0.0) || !(p.symbol_duration_s > 0.0) || p.block_len == 0 {
        return Err(Error::invalid(
            "jakes params",
            "carrier frequency, symbol duration and block length must be positive",
        ));
    }
    if p.speed_mps < 0.0 {
        return Err(Error::invalid("speed", "must be non-negative"));
    }
    let arg = 2.0 * std::f64::consts::PI * p.doppler_hz() * p.symbol_duration_s * p.block_len as f64;
    Ok(j0(arg))
}
