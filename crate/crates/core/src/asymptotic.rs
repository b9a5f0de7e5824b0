//! Chernoff upper bounds on the outage probabilities and the rate thresholds
//! below which outage vanishes with the estimation error (no inter-cell interference).

use crate::error::{ensure, Result};
use crate::model::{NetworkParams, PairConfig};
use crate::outage::{EffectiveChannel, QuadraticForm};

const GOLDEN_MARGIN: f64 = 1e-6;
const GOLDEN_ITERATIONS: usize = 200;

/// Admissible upper end `min_i 1 / upsilon_i` with `upsilon = delta / sigma_h^2`.
fn admissible_limit(eff: &EffectiveChannel) -> Result<f64> {
    ensure(eff.error_variance > 0.0, "sigma_h2", "Chernoff bounds need a positive error variance")?;
    let upsilon_max = eff.delta.iter().copied().fold(0.0, f64::max) / eff.error_variance;
    ensure(upsilon_max > 0.0, "delta", "error covariance vanishes after filtering")?;
    Ok(1.0 / upsilon_max)
}

/// `log` of `exp(-(s/sigma^2)(tau + sum |zeta_i|^2/(s upsilon_i - 1))) prod 1/(1 - s upsilon_i)`.
fn log_chernoff(form: &QuadraticForm, error_variance: f64, threshold: f64, s: f64) -> f64 {
    let mut acc = threshold;
    let mut log_det = 0.0;
    for (&d, &z) in form.delta.iter().zip(&form.zeta2) {
        let su = s * d / error_variance;
        acc += z / (su - 1.0);
        log_det -= (1.0 - su).ln();
    }
    -(s / error_variance) * acc + log_det
}

fn check_parameter(s: f64, limit: f64) -> Result<()> {
    ensure(
        s > 0.0 && s < limit,
        "s",
        format!("must lie in (0, {limit}), got {s}"),
    )
}

fn far_form(far: &EffectiveChannel, pair: &PairConfig) -> QuadraticForm {
    far.quadratic_form(&far.scaled_mean(pair.beta_near2))
}

fn noise_term(eff: &EffectiveChannel, params: &NetworkParams, d: f64) -> f64 {
    eff.filtered_noise / (params.tx_power * params.path_loss(d))
}

fn far_tau(far: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams) -> f64 {
    let inv = 1.0 / (2f64.powf(pair.rate_far) - 1.0);
    (inv - pair.beta_near2) * pair.beta_far2() * far.own_gain() - noise_term(far, params, pair.d_far)
}

/// Chernoff bound on the far-user outage at `s_bar = sigma_h^2 s`.
pub fn chernoff_far_bound(far: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams, s_bar: f64) -> Result<f64> {
    check_parameter(s_bar, admissible_limit(far)?)?;
    let tau = far_tau(far, pair, params);
    Ok(log_chernoff(&far_form(far, pair), far.error_variance, tau, s_bar).exp())
}

struct NearTerms {
    sic: (QuadraticForm, f64),
    own: (QuadraticForm, f64),
}

fn near_terms(near: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams) -> NearTerms {
    let noise = noise_term(near, params, pair.d_near);
    let g = near.own_gain();
    let (b2, bt2) = (pair.beta_near2, pair.beta_far2());
    let theta_sic = g * bt2 / (2f64.powf(pair.rate_far) - 1.0) - noise;
    let theta_own = g * b2 / (2f64.powf(pair.rate_near) - 1.0) - noise;
    NearTerms {
        sic: (near.quadratic_form(&near.scaled_mean(b2)), theta_sic - b2 * bt2 * g),
        own: (near.quadratic_form(&near.scaled_mean(0.0)), theta_own),
    }
}

fn log_near(terms: &NearTerms, error_variance: f64, s: f64) -> f64 {
    let a = log_chernoff(&terms.sic.0, error_variance, terms.sic.1, s);
    let b = log_chernoff(&terms.own.0, error_variance, terms.own.1, s);
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Union of the Chernoff bounds on the SIC and own-decoding failures at `s_hat = sigma_h^2 s`.
pub fn chernoff_near_bound(near: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams, s_hat: f64) -> Result<f64> {
    check_parameter(s_hat, admissible_limit(near)?)?;
    Ok(log_near(&near_terms(near, pair, params), near.error_variance, s_hat).exp())
}

/// Minimizer and minimum of a convex function on `[lo, hi]`.
fn golden_section<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> (f64, f64) {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..GOLDEN_ITERATIONS {
        if (b - a) <= 1e-15 * b.abs().max(1e-300) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Optimized Chernoff bound: `(s_bar, bound)`.
pub fn optimize_chernoff_far(far: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams) -> Result<(f64, f64)> {
    let limit = admissible_limit(far)?;
    let form = far_form(far, pair);
    let tau = far_tau(far, pair, params);
    let (s, v) = golden_section(
        |s| log_chernoff(&form, far.error_variance, tau, s),
        GOLDEN_MARGIN * limit,
        (1.0 - GOLDEN_MARGIN) * limit,
    );
    Ok((s, v.exp()))
}

pub fn optimize_chernoff_near(near: &EffectiveChannel, pair: &PairConfig, params: &NetworkParams) -> Result<(f64, f64)> {
    let limit = admissible_limit(near)?;
    let terms = near_terms(near, pair, params);
    let (s, v) = golden_section(
        |s| log_near(&terms, near.error_variance, s),
        GOLDEN_MARGIN * limit,
        (1.0 - GOLDEN_MARGIN) * limit,
    );
    Ok((s, v.exp()))
}

/// Largest rates for which outage decays to zero as the estimation error vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateThresholds {
    pub far: f64,
    /// Far-user rate the near user can still remove by SIC.
    pub near_sic: f64,
    /// Near user's own rate; infinite when nothing else interferes.
    pub near_own: f64,
}

pub fn rate_thresholds(
    far: &EffectiveChannel,
    near: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
) -> RateThresholds {
    let (b2, bt2) = (pair.beta_near2, pair.beta_far2());
    let bound = |signal: f64, denom: f64| {
        if denom == 0.0 {
            f64::INFINITY
        } else {
            (1.0 + signal / denom).log2()
        }
    };
    let gf = far.own_gain();
    let far_rest = far_form(far, pair).mean_norm();
    let gn = near.own_gain();
    let nu1 = near.quadratic_form(&near.scaled_mean(b2)).mean_norm();
    let nu2 = near.quadratic_form(&near.scaled_mean(0.0)).mean_norm();
    let noise_far = noise_term(far, params, pair.d_far);
    let noise_near = noise_term(near, params, pair.d_near);
    RateThresholds {
        far: bound(bt2 * gf, far_rest + b2 * bt2 * gf + noise_far),
        near_sic: bound(bt2 * gn, nu1 + b2 * bt2 * gn + noise_near),
        near_own: bound(gn * b2, nu2 + noise_near),
    }
}
