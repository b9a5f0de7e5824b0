//! Scenario parameters and the imperfect-CSI channel model.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{ensure, invalid, Result};
use crate::linalg::{frobenius_norm_sqr, psd_sqrt, sample_cn_matrix, trace_re, CMatrix};

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

/// Network-level parameters. Powers are linear (W), densities in 1/m².
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams {
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub alpha: f64,
    /// Per-stream transmit power.
    pub tx_power: f64,
    /// Interfering BS transmit power.
    pub interferer_power: f64,
    pub noise_power: f64,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub pairs: usize,
    /// Cell-geometry constant of the serving-distance law.
    pub cell_constant: f64,
}

impl NetworkParams {
    /// Reference small-cell scenario: 3x2 antennas, two pairs, 20 dBm streams.
    pub fn reference() -> Self {
        Self {
            lambda_b: 1e-5,
            lambda_u: 2e-4,
            alpha: 3.5,
            tx_power: dbm_to_watts(20.0),
            interferer_power: dbm_to_watts(15.0),
            noise_power: dbm_to_watts(-99.0),
            tx_antennas: 3,
            rx_antennas: 2,
            pairs: 2,
            cell_constant: 1.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.alpha > 2.0 && self.alpha.is_finite(), "alpha", format!("must exceed 2, got {}", self.alpha))?;
        for (name, v) in [
            ("lambda_b", self.lambda_b),
            ("lambda_u", self.lambda_u),
            ("interferer_power", self.interferer_power),
            ("noise_power", self.noise_power),
        ] {
            ensure(v >= 0.0 && v.is_finite(), name, format!("must be a finite nonnegative number, got {v}"))?;
        }
        ensure(self.tx_power > 0.0 && self.tx_power.is_finite(), "tx_power", "must be positive")?;
        ensure(self.cell_constant > 0.0, "cell_constant", "must be positive")?;
        ensure(self.pairs >= 1, "pairs", "must be at least 1")?;
        ensure(
            self.pairs <= self.tx_antennas.min(self.rx_antennas),
            "pairs",
            format!(
                "K = {} exceeds min(M, N) = {}",
                self.pairs,
                self.tx_antennas.min(self.rx_antennas)
            ),
        )?;
        Ok(())
    }

    /// Path loss `d^-alpha`.
    pub fn path_loss(&self, d: f64) -> f64 {
        d.powf(-self.alpha)
    }
}

/// Known channel part and Kronecker error statistics for one user.
#[derive(Debug, Clone)]
pub struct ChannelEstimate {
    h_hat: CMatrix,
    r_t: CMatrix,
    r_r: CMatrix,
    sigma_h2: f64,
    r_t_sqrt: CMatrix,
    r_r_sqrt: CMatrix,
}

impl ChannelEstimate {
    /// `h_hat` is N×M, `r_t` is M×M and `r_r` is N×N.
    pub fn new(h_hat: CMatrix, r_t: CMatrix, r_r: CMatrix, sigma_h2: f64) -> Result<Self> {
        let (n, m) = h_hat.shape();
        ensure(r_t.shape() == (m, m), "r_t", format!("expected {m}x{m}, got {:?}", r_t.shape()))?;
        ensure(r_r.shape() == (n, n), "r_r", format!("expected {n}x{n}, got {:?}", r_r.shape()))?;
        ensure(sigma_h2 >= 0.0 && sigma_h2.is_finite(), "sigma_h2", "must be finite and nonnegative")?;
        let r_t_sqrt = psd_sqrt(&r_t)?;
        let r_r_sqrt = psd_sqrt(&r_r)?;
        Ok(Self { h_hat, r_t, r_r, sigma_h2, r_t_sqrt, r_r_sqrt })
    }

    /// Builds an estimate whose error variance realizes the requested K factor.
    pub fn with_k_factor(h_hat: CMatrix, r_t: CMatrix, r_r: CMatrix, k_factor: f64) -> Result<Self> {
        ensure(k_factor > 0.0, "k_factor", "must be positive")?;
        let sigma_h2 = error_variance_for_k_factor(&h_hat, &r_t, &r_r, k_factor);
        Self::new(h_hat, r_t, r_r, sigma_h2)
    }

    pub fn h_hat(&self) -> &CMatrix {
        &self.h_hat
    }
    pub fn r_t(&self) -> &CMatrix {
        &self.r_t
    }
    pub fn r_r(&self) -> &CMatrix {
        &self.r_r
    }
    pub fn sigma_h2(&self) -> f64 {
        self.sigma_h2
    }
    pub fn rx_antennas(&self) -> usize {
        self.h_hat.nrows()
    }
    pub fn tx_antennas(&self) -> usize {
        self.h_hat.ncols()
    }

    /// Same estimate with a different error variance.
    pub fn with_sigma_h2(&self, sigma_h2: f64) -> Result<Self> {
        ensure(sigma_h2 >= 0.0 && sigma_h2.is_finite(), "sigma_h2", "must be finite and nonnegative")?;
        Ok(Self { sigma_h2, ..self.clone() })
    }
}

/// Near/far pair parameters. Rates are in bps/Hz and distances in metres.
#[derive(Debug, Clone, PartialEq)]
pub struct PairConfig {
    pub beta_near2: f64,
    pub rate_near: f64,
    pub rate_far: f64,
    pub d_near: f64,
    pub d_far: f64,
    pub rank_near: usize,
    pub rank_far: usize,
}

impl PairConfig {
    pub fn beta_far2(&self) -> f64 {
        1.0 - self.beta_near2
    }

    /// `beta_near^2 (2^R_far - 1)`, which must stay below one.
    pub fn feasibility_margin(&self) -> f64 {
        self.beta_near2 * (2f64.powf(self.rate_far) - 1.0)
    }

    pub fn is_feasible(&self) -> bool {
        self.feasibility_margin() < 1.0
    }

    pub fn validate(&self, pairs: usize) -> Result<()> {
        ensure(
            self.beta_near2 > 0.0 && self.beta_near2 < 1.0,
            "beta_near2",
            format!("must lie in (0, 1), got {}", self.beta_near2),
        )?;
        ensure(self.rate_near >= 0.0 && self.rate_far >= 0.0, "rate", "rates must be nonnegative")?;
        ensure(self.d_near > 0.0 && self.d_far > 0.0, "distance", "link distances must be positive")?;
        ensure(
            1 <= self.rank_near && self.rank_near < self.rank_far && self.rank_far <= 2 * pairs,
            "rank",
            format!("need 1 <= r_near < r_far <= {}, got ({}, {})", 2 * pairs, self.rank_near, self.rank_far),
        )?;
        Ok(())
    }

    pub fn with_rates(&self, rate_near: f64, rate_far: f64) -> Self {
        Self { rate_near, rate_far, ..self.clone() }
    }
}

/// `(kappa^|i-j|)`, the exponential correlation profile.
pub fn exponential_covariance(dim: usize, kappa: f64) -> Result<CMatrix> {
    ensure(dim >= 1, "dim", "must be at least 1")?;
    if !(0.0..1.0).contains(&kappa) {
        return Err(invalid("kappa", format!("must lie in [0, 1), got {kappa}")));
    }
    Ok(CMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(kappa.powi(i.abs_diff(j) as i32), 0.0)
    }))
}

/// Draws `E = R_r^{1/2} E_w R_t^{1/2}` with `vec(E_w)` i.i.d. CN(0, sigma_h2).
pub fn sample_error_matrix<R: Rng + ?Sized>(est: &ChannelEstimate, rng: &mut R) -> CMatrix {
    let (n, m) = est.h_hat.shape();
    if est.sigma_h2 == 0.0 {
        return CMatrix::zeros(n, m);
    }
    let w = sample_cn_matrix(n, m, rng) * Complex64::new(est.sigma_h2.sqrt(), 0.0);
    &est.r_r_sqrt * w * &est.r_t_sqrt
}

/// `||H_hat||_F^2 / (sigma_h2 Tr R_t Tr R_r)`; infinite when the error vanishes.
pub fn channel_k_factor(est: &ChannelEstimate) -> f64 {
    if est.sigma_h2 == 0.0 {
        return f64::INFINITY;
    }
    frobenius_norm_sqr(&est.h_hat) / (est.sigma_h2 * trace_re(&est.r_t) * trace_re(&est.r_r))
}

pub fn error_variance_for_k_factor(h_hat: &CMatrix, r_t: &CMatrix, r_r: &CMatrix, k_factor: f64) -> f64 {
    frobenius_norm_sqr(h_hat) / (k_factor * trace_re(r_t) * trace_re(r_r))
}

/// i.i.d. CN(0,1) matrix rescaled so that its squared Frobenius norm equals `rows * cols`.
pub fn sample_channel_estimate<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let h = sample_cn_matrix(rows, cols, rng);
    let scale = ((rows * cols) as f64 / frobenius_norm_sqr(&h)).sqrt();
    h * Complex64::new(scale, 0.0)
}
