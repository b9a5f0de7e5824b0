#![allow(dead_code)]

use mimo_noma::model::{NetworkParams, PairConfig};
use mimo_noma::scenario::{DesignKind, Realization, Scenario};

/// Seed of the pinned channel realization used across the integration tests.
pub const REALIZATION_SEED: u64 = 7;

pub fn table_pair() -> PairConfig {
    PairConfig {
        beta_near2: 0.3,
        rate_near: 1.0,
        rate_far: 0.5,
        d_near: 50.0,
        d_far: 125.0,
        rank_near: 1,
        rank_far: 4,
    }
}

pub fn table_realization() -> Realization {
    Realization { seed: REALIZATION_SEED, kappa: 0.9, k_factor: 100.0, design: DesignKind::Aligned }
}

pub fn table_scenario(params: &NetworkParams) -> Scenario {
    table_realization().draw(params, &table_pair()).unwrap()
}

/// `(R_near, R_far)` with `R_near = 2 R_far` and `R_far` in {0.25, 0.5, ..., 1.5}.
pub fn rate_grid() -> Vec<(f64, f64)> {
    (1..=6).map(|i| (0.5 * i as f64, 0.25 * i as f64)).collect()
}

/// Two-sided Kolmogorov-Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic critical value of the KS statistic at level `alpha`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
