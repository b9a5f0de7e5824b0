//! Outage probabilities of the near and far user of a pair, conditioned on the
//! channel estimate and optionally averaged over the user distances.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};
use crate::geometry::{
    interference_coefficient, DistanceLaw, GroupingPolicy, InterferenceCoefficient, SpatialAverage, UserRole,
};
use crate::laplace::{invert_1d, invert_2d, Inversion, Inversion1DConfig, Inversion2DConfig};
use crate::linalg::{psd_eigen, quad_form, CMatrix, CVector};
use crate::model::{ChannelEstimate, NetworkParams, PairConfig};

/// Post-filter view of one user's channel: `y = sum_i (mu_i + chi_i) x_i + ...`.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// Index of the pair whose signal this user decodes.
    pub stream: usize,
    /// `mu_i = u^H H_hat v_i`.
    pub mu: CVector,
    /// Covariance of `chi_i = u^H E v_i`.
    pub sigma: CMatrix,
    /// Eigenvalues of `sigma`, descending.
    pub delta: Vec<f64>,
    /// Eigenvectors of `sigma`, column `i` belongs to `delta[i]`.
    pub psi: CMatrix,
    pub omega: InterferenceCoefficient,
    /// `sigma^2 ||u||^2`.
    pub filtered_noise: f64,
    pub error_variance: f64,
}

/// Reduces the MIMO link to the `K` post-filter stream gains seen by filter `u`.
pub fn effective_channel(
    est: &ChannelEstimate,
    v: &CMatrix,
    u: &CVector,
    stream: usize,
    params: &NetworkParams,
) -> Result<EffectiveChannel> {
    let (n, m) = est.h_hat().shape();
    ensure(v.nrows() == m, "v", format!("expected {m} rows, got {}", v.nrows()))?;
    ensure(u.len() == n, "u", format!("expected length {n}, got {}", u.len()))?;
    ensure(stream < v.ncols(), "stream", "must index a precoder column")?;
    for (i, col) in v.column_iter().enumerate() {
        let norm = col.norm();
        ensure((norm - 1.0).abs() <= 1e-8, "v", format!("column {i} has norm {norm}, expected 1"))?;
    }
    let uh = u.adjoint();
    let mu = (&uh * est.h_hat() * v).transpose();
    let receive = quad_form(est.r_r(), u);
    let transmit = v.adjoint() * est.r_t() * v;
    let sigma = transmit.transpose() * Complex64::new(est.sigma_h2() * receive, 0.0);
    let eig = psd_eigen(&sigma)?;
    Ok(EffectiveChannel {
        stream,
        mu,
        sigma,
        delta: eig.values,
        psi: eig.vectors,
        omega: interference_coefficient(u, params)?,
        filtered_noise: params.noise_power * u.norm_squared(),
        error_variance: est.sigma_h2(),
    })
}

impl EffectiveChannel {
    pub fn own_gain(&self) -> f64 {
        self.mu[self.stream].norm_sqr()
    }

    /// `mu` with the own entry multiplied by `factor`.
    pub fn scaled_mean(&self, factor: f64) -> CVector {
        let mut nu = self.mu.clone();
        nu[self.stream] *= factor;
        nu
    }

    /// `zeta = Psi^H nu`.
    pub fn project(&self, nu: &CVector) -> CVector {
        self.psi.adjoint() * nu
    }

    pub fn quadratic_form(&self, nu: &CVector) -> QuadraticForm {
        let zeta = self.project(nu);
        QuadraticForm {
            delta: self.delta.clone(),
            zeta2: zeta.iter().map(|z| z.norm_sqr()).collect(),
        }
    }

    /// `pi lambda_b omega d^2`, the interference exponent at distance `d`.
    pub fn interference_scale(&self, params: &NetworkParams, d: f64) -> f64 {
        PI * params.lambda_b * self.omega.omega * d * d
    }
}

/// `X = ||chi + nu||^2` for `chi ~ CN(0, Psi diag(delta) Psi^H)`, in the eigenbasis.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticForm {
    pub delta: Vec<f64>,
    /// `|zeta_i|^2` with `zeta = Psi^H nu`.
    pub zeta2: Vec<f64>,
}

impl QuadraticForm {
    /// `E[exp(-s X)]`.
    pub fn laplace(&self, s: Complex64) -> Complex64 {
        let mut log = Complex64::new(0.0, 0.0);
        for (&d, &z) in self.delta.iter().zip(&self.zeta2) {
            let denom = s * d + 1.0;
            log -= s * z / denom + denom.ln();
        }
        log.exp()
    }

    pub fn is_deterministic(&self) -> bool {
        self.delta.iter().all(|&d| d == 0.0)
    }

    pub fn mean_norm(&self) -> f64 {
        self.zeta2.iter().sum()
    }
}

/// Transform of the additive interference (and noise, for averages) term.
#[derive(Debug, Clone)]
pub enum Disturbance {
    /// `exp(-scale w^(2/alpha))`, the PPP interference at a fixed distance.
    Interference { scale: f64, alpha: f64 },
    /// Distance-averaged interference plus noise.
    Averaged(SpatialAverage),
}

impl Disturbance {
    pub fn transform(&self, w: Complex64) -> Complex64 {
        match self {
            Disturbance::Interference { scale, alpha } => {
                if *scale == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    (-w.powf(2.0 / alpha) * *scale).exp()
                }
            }
            Disturbance::Averaged(avg) => avg.eval(w),
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, Disturbance::Interference { scale, .. } if *scale == 0.0)
    }
}

/// `P(X + I <= threshold)` by inverting `L_X(s) L_I(s) / s`.
pub fn success_probability(
    form: &QuadraticForm,
    disturbance: &Disturbance,
    threshold: f64,
    cfg: &Inversion1DConfig,
) -> Result<Inversion> {
    let exact = |value: f64| Ok(Inversion { value, degraded: false });
    if threshold.is_nan() {
        return Err(Error::InvalidParameter { name: "threshold", reason: "is NaN".into() });
    }
    if threshold == f64::INFINITY {
        return exact(1.0);
    }
    if threshold <= 0.0 {
        return exact(0.0);
    }
    if form.is_deterministic() {
        // X is the constant ||nu||^2, so only the disturbance is random.
        let rest = threshold - form.mean_norm();
        if rest <= 0.0 {
            return exact(0.0);
        }
        if disturbance.is_zero() {
            return exact(1.0);
        }
        return invert_1d(|s| disturbance.transform(s) / s, rest, cfg);
    }
    invert_1d(|s| form.laplace(s) * disturbance.transform(s) / s, threshold, cfg)
}

/// Why an outage value was not obtained by a plain inversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutageFlag {
    InfeasibleRateSplit,
    NonPositiveThreshold,
    DegradedAcceleration,
}

/// An outage probability with its unclamped value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    pub raw: f64,
    pub flag: Option<OutageFlag>,
}

impl Outage {
    fn certain(flag: OutageFlag) -> Self {
        Self { raw: 1.0, flag: Some(flag) }
    }

    fn from_success(q: Inversion) -> Self {
        Self {
            raw: 1.0 - q.value,
            flag: q.degraded.then_some(OutageFlag::DegradedAcceleration),
        }
    }

    pub fn probability(&self) -> f64 {
        self.raw.clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExactConditional,
    ExactAverage,
    Approximate,
    MonteCarlo,
}

/// Pair outage summary; probabilities are clamped, raw values kept alongside.
#[derive(Debug, Clone, PartialEq)]
pub struct OutageReport {
    pub p_far: f64,
    pub p_near: f64,
    pub raw_far: f64,
    pub raw_near: f64,
    pub method: Method,
    /// `(far, near)` standard errors of Monte Carlo estimates.
    pub standard_error: Option<(f64, f64)>,
}

impl OutageReport {
    pub fn from_outages(far: Outage, near: Outage, method: Method) -> Self {
        Self {
            p_far: far.probability(),
            p_near: near.probability(),
            raw_far: far.raw,
            raw_near: near.raw,
            method,
            standard_error: None,
        }
    }
}

/// `1 / (2^R - 1)`, infinite at zero rate.
fn inverse_snr_target(rate: f64) -> f64 {
    1.0 / (2f64.powf(rate) - 1.0)
}

/// Decoding thresholds of a pair. Bar variants omit the noise term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageThresholds {
    pub tau_far: f64,
    /// Near user decoding its own signal.
    pub theta_near: f64,
    /// Near user decoding the far user's signal (SIC stage).
    pub theta_sic: f64,
    pub tau_far_bar: f64,
    pub theta_near_bar: f64,
    pub theta_sic_bar: f64,
}

pub fn outage_thresholds(
    near: &EffectiveChannel,
    far: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
) -> OutageThresholds {
    let (b2, bt2) = (pair.beta_near2, pair.beta_far2());
    let inv_far = inverse_snr_target(pair.rate_far);
    let inv_near = inverse_snr_target(pair.rate_near);
    let tau_far_bar = (inv_far - b2) * bt2 * far.own_gain();
    let theta_near_bar = near.own_gain() * b2 * inv_near;
    let theta_sic_bar = near.own_gain() * bt2 * inv_far;
    let noise_far = far.filtered_noise / (params.tx_power * params.path_loss(pair.d_far));
    let noise_near = near.filtered_noise / (params.tx_power * params.path_loss(pair.d_near));
    OutageThresholds {
        tau_far: tau_far_bar - noise_far,
        theta_near: theta_near_bar - noise_near,
        theta_sic: theta_sic_bar - noise_near,
        tau_far_bar,
        theta_near_bar,
        theta_sic_bar,
    }
}

fn far_threshold(far: &EffectiveChannel, pair: &PairConfig, noise: f64) -> f64 {
    (inverse_snr_target(pair.rate_far) - pair.beta_near2) * pair.beta_far2() * far.own_gain() - noise
}

fn far_outage_with(
    far: &EffectiveChannel,
    pair: &PairConfig,
    disturbance: &Disturbance,
    threshold: f64,
    cfg: &Inversion1DConfig,
) -> Result<Outage> {
    if pair.rate_far <= 0.0 {
        return Ok(Outage { raw: 0.0, flag: None });
    }
    if !pair.is_feasible() {
        return Ok(Outage::certain(OutageFlag::InfeasibleRateSplit));
    }
    if threshold <= 0.0 {
        return Ok(Outage::certain(OutageFlag::NonPositiveThreshold));
    }
    let form = far.quadratic_form(&far.scaled_mean(pair.beta_near2));
    Ok(Outage::from_success(success_probability(&form, disturbance, threshold, cfg)?))
}

/// Far-user outage given the channel estimate and the distance `pair.d_far`.
pub fn far_outage_conditional(
    far: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    cfg: &Inversion1DConfig,
) -> Result<Outage> {
    let noise = far.filtered_noise / (params.tx_power * params.path_loss(pair.d_far));
    let disturbance = Disturbance::Interference {
        scale: far.interference_scale(params, pair.d_far),
        alpha: params.alpha,
    };
    far_outage_with(far, pair, &disturbance, far_threshold(far, pair, noise), cfg)
}

/// Far-user outage averaged over a distance law.
pub fn far_outage_for_law(
    far: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    law: DistanceLaw,
    cfg: &Inversion1DConfig,
) -> Result<Outage> {
    let threshold = far_threshold(far, pair, 0.0);
    let avg = SpatialAverage::new(law, params, far.omega.omega, far.filtered_noise, threshold)?;
    far_outage_with(far, pair, &Disturbance::Averaged(avg), threshold, cfg)
}

pub fn far_outage_average(
    far: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    policy: GroupingPolicy,
    cfg: &Inversion1DConfig,
) -> Result<Outage> {
    let law = policy.distance_law(UserRole::Far, pair, params.pairs);
    far_outage_for_law(far, pair, params, law, cfg)
}

/// Joint SIC-and-decode transform of the near user, divided by `s t`.
struct NearJointTransform {
    delta: Vec<f64>,
    /// `psi_i^H mu`.
    p: Vec<Complex64>,
    /// `conj(mu_k) psi_{k,i}`.
    m: Vec<Complex64>,
    beta_far2: f64,
}

impl NearJointTransform {
    fn new(near: &EffectiveChannel, pair: &PairConfig) -> Self {
        let k = near.stream;
        let p = near.project(&near.mu).iter().copied().collect();
        let mu_k = near.mu[k].conj();
        let m = (0..near.delta.len()).map(|i| mu_k * near.psi[(k, i)]).collect();
        Self {
            delta: near.delta.clone(),
            p,
            m,
            beta_far2: pair.beta_far2(),
        }
    }

    /// `E[exp(-s X1 - t X2)]` for the two decoding statistics.
    fn joint_laplace(&self, s: Complex64, t: Complex64) -> Complex64 {
        let w = s + t;
        let a_shift = t + s * self.beta_far2;
        let mut log = Complex64::new(0.0, 0.0);
        for i in 0..self.delta.len() {
            let denom = w * self.delta[i] + 1.0;
            let left = w * self.p[i].conj() - a_shift * self.m[i];
            let right = a_shift * self.delta[i] * self.m[i].conj() + self.p[i];
            log -= left * right / denom + denom.ln();
        }
        log.exp()
    }

    fn eval(&self, s: Complex64, t: Complex64, disturbance: &Disturbance) -> Complex64 {
        self.joint_laplace(s, t) * disturbance.transform(s + t) / (s * t)
    }

    /// `(X1, X2)` when the error covariance vanishes.
    fn deterministic_statistics(&self) -> (f64, f64) {
        let total: f64 = self.p.iter().map(|z| z.norm_sqr()).sum();
        let own: Complex64 = self.m.iter().zip(&self.p).map(|(m, p)| m * p).sum();
        let own = own.re;
        (total - self.beta_far2 * own, total - own)
    }
}

fn near_exact_with(
    near: &EffectiveChannel,
    pair: &PairConfig,
    disturbance: &Disturbance,
    theta_sic: f64,
    theta_near: f64,
    cfg2d: &Inversion2DConfig,
    cfg1d: &Inversion1DConfig,
) -> Result<Outage> {
    if !pair.is_feasible() {
        return Ok(Outage::certain(OutageFlag::InfeasibleRateSplit));
    }
    if theta_sic <= 0.0 || theta_near <= 0.0 {
        return Ok(Outage::certain(OutageFlag::NonPositiveThreshold));
    }
    let joint = NearJointTransform::new(near, pair);
    let b2 = pair.beta_near2;
    let bt2 = pair.beta_far2();
    let sic_gap = b2 * bt2 * near.own_gain();
    // With one event certain the joint probability is a single marginal.
    if theta_sic.is_infinite() || theta_near.is_infinite() {
        let q = if theta_sic.is_infinite() && theta_near.is_infinite() {
            Inversion { value: 1.0, degraded: false }
        } else if theta_sic.is_infinite() {
            success_probability(&near.quadratic_form(&near.scaled_mean(0.0)), disturbance, theta_near, cfg1d)?
        } else {
            success_probability(&near.quadratic_form(&near.scaled_mean(b2)), disturbance, theta_sic - sic_gap, cfg1d)?
        };
        return Ok(Outage::from_success(q));
    }
    if near.delta.iter().all(|&d| d == 0.0) {
        let (x1, x2) = joint.deterministic_statistics();
        let rest = (theta_sic - x1).min(theta_near - x2);
        let form = QuadraticForm { delta: vec![], zeta2: vec![] };
        return Ok(Outage::from_success(success_probability(&form, disturbance, rest, cfg1d)?));
    }
    let q = invert_2d(|s, t| joint.eval(s, t, disturbance), theta_sic, theta_near, cfg2d)?;
    Ok(Outage::from_success(q))
}

/// Exact near-user outage: failure of SIC or of decoding the own signal.
pub fn near_outage_conditional_exact(
    near: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    cfg2d: &Inversion2DConfig,
) -> Result<Outage> {
    let noise = near.filtered_noise / (params.tx_power * params.path_loss(pair.d_near));
    let disturbance = Disturbance::Interference {
        scale: near.interference_scale(params, pair.d_near),
        alpha: params.alpha,
    };
    let (theta_sic, theta_near) = near_thresholds(near, pair, noise);
    near_exact_with(near, pair, &disturbance, theta_sic, theta_near, cfg2d, &Inversion1DConfig::steep())
}

fn near_thresholds(near: &EffectiveChannel, pair: &PairConfig, noise: f64) -> (f64, f64) {
    let g = near.own_gain();
    (
        g * pair.beta_far2() * inverse_snr_target(pair.rate_far) - noise,
        g * pair.beta_near2 * inverse_snr_target(pair.rate_near) - noise,
    )
}

/// Near-user outage treating the two decoding stages as independent; an upper bound.
pub fn near_outage_conditional_approx(
    near: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    cfg: &Inversion1DConfig,
) -> Result<Outage> {
    if !pair.is_feasible() {
        return Ok(Outage::certain(OutageFlag::InfeasibleRateSplit));
    }
    let noise = near.filtered_noise / (params.tx_power * params.path_loss(pair.d_near));
    let (theta_sic, theta_near) = near_thresholds(near, pair, noise);
    if theta_sic <= 0.0 || theta_near <= 0.0 {
        return Ok(Outage::certain(OutageFlag::NonPositiveThreshold));
    }
    let disturbance = Disturbance::Interference {
        scale: near.interference_scale(params, pair.d_near),
        alpha: params.alpha,
    };
    let b2 = pair.beta_near2;
    let sic_gap = b2 * pair.beta_far2() * near.own_gain();
    let q1 = success_probability(&near.quadratic_form(&near.scaled_mean(b2)), &disturbance, theta_sic - sic_gap, cfg)?;
    let q2 = success_probability(&near.quadratic_form(&near.scaled_mean(0.0)), &disturbance, theta_near, cfg)?;
    Ok(Outage {
        raw: 1.0 - q1.value * q2.value,
        flag: (q1.degraded || q2.degraded).then_some(OutageFlag::DegradedAcceleration),
    })
}

/// Exact near-user outage averaged over a distance law.
pub fn near_outage_for_law(
    near: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    law: DistanceLaw,
    cfg2d: &Inversion2DConfig,
) -> Result<Outage> {
    let (theta_sic, theta_near) = near_thresholds(near, pair, 0.0);
    let reference = theta_sic.min(theta_near);
    let avg = SpatialAverage::new(law, params, near.omega.omega, near.filtered_noise, reference)?;
    near_exact_with(
        near,
        pair,
        &Disturbance::Averaged(avg),
        theta_sic,
        theta_near,
        cfg2d,
        &Inversion1DConfig::steep(),
    )
}

pub fn near_outage_average(
    near: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    policy: GroupingPolicy,
    cfg2d: &Inversion2DConfig,
) -> Result<Outage> {
    let law = policy.distance_law(UserRole::Near, pair, params.pairs);
    near_outage_for_law(near, pair, params, law, cfg2d)
}
