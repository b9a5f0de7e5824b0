//! Stochastic geometry: PPP sampling, serving-distance laws and the
//! distance-averaged interference/noise transform.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use std::f64::consts::PI;

use crate::error::{ensure, Result};
use crate::linalg::CVector;
use crate::model::{NetworkParams, PairConfig};
use crate::quadrature;

/// How users are grouped into near/far pairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupingPolicy {
    /// Two uniformly chosen users; the closer one is the near user.
    Random,
    /// Users ranked by distance; pair ranks come from [`PairConfig`].
    DistanceBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserRole {
    Near,
    Far,
}

/// Distribution of a user's serving distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceLaw {
    /// Deterministic distance in metres.
    PointMass(f64),
    /// `rank`-th smallest of `total` i.i.d. serving distances.
    Ordered { rank: usize, total: usize },
}

impl GroupingPolicy {
    pub fn distance_law(&self, role: UserRole, pair: &PairConfig, pairs: usize) -> DistanceLaw {
        match (self, role) {
            (GroupingPolicy::Random, UserRole::Near) => DistanceLaw::Ordered { rank: 1, total: 2 },
            (GroupingPolicy::Random, UserRole::Far) => DistanceLaw::Ordered { rank: 2, total: 2 },
            (GroupingPolicy::DistanceBased, UserRole::Near) => DistanceLaw::Ordered {
                rank: pair.rank_near,
                total: 2 * pairs,
            },
            (GroupingPolicy::DistanceBased, UserRole::Far) => DistanceLaw::Ordered {
                rank: pair.rank_far,
                total: 2 * pairs,
            },
        }
    }
}

/// Ranks `(r_near, r_far)` for zero-based pair `index`: the nearest user goes with the farthest.
pub fn default_ranks(index: usize, pairs: usize) -> (usize, usize) {
    (index + 1, 2 * pairs - index)
}

fn rayleigh_rate(params: &NetworkParams) -> f64 {
    params.cell_constant * params.lambda_b * PI
}

pub fn serving_distance_pdf(x: f64, params: &NetworkParams) -> f64 {
    if x < 0.0 {
        return 0.0;
    }
    let a = rayleigh_rate(params);
    2.0 * a * x * (-a * x * x).exp()
}

pub fn serving_distance_cdf(x: f64, params: &NetworkParams) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    -(-rayleigh_rate(params) * x * x).exp_m1()
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn ordered_distance_pdf(x: f64, rank: usize, total: usize, params: &NetworkParams) -> f64 {
    assert!(1 <= rank && rank <= total, "rank must lie in [1, total]");
    let f = serving_distance_cdf(x, params);
    rank as f64
        * binomial(total, rank)
        * f.powi(rank as i32 - 1)
        * (1.0 - f).powi((total - rank) as i32)
        * serving_distance_pdf(x, params)
}

/// CDF of the `rank`-th order statistic: `P(at least rank of total draws <= x)`.
pub fn ordered_distance_cdf(x: f64, rank: usize, total: usize, params: &NetworkParams) -> f64 {
    let f = serving_distance_cdf(x, params);
    (rank..=total)
        .map(|j| binomial(total, j) * f.powi(j as i32) * (1.0 - f).powi((total - j) as i32))
        .sum()
}

/// Inverse-CDF draw from the serving-distance law.
pub fn sample_serving_distance<R: Rng + ?Sized>(params: &NetworkParams, rng: &mut R) -> f64 {
    let u: f64 = 1.0 - rng.random::<f64>();
    (-u.ln() / rayleigh_rate(params)).sqrt()
}

/// `total` i.i.d. serving distances, sorted ascending.
pub fn sample_ordered_distances<R: Rng + ?Sized>(params: &NetworkParams, total: usize, rng: &mut R) -> Vec<f64> {
    let mut d: Vec<f64> = (0..total).map(|_| sample_serving_distance(params, rng)).collect();
    d.sort_by(f64::total_cmp);
    d
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceCoefficient {
    pub omega: f64,
}

/// `Gamma(1 - 2/alpha) ((rho_I / P) |u^H 1|^2)^(2/alpha)`.
pub fn interference_coefficient(u: &CVector, params: &NetworkParams) -> Result<InterferenceCoefficient> {
    ensure(params.alpha > 2.0, "alpha", format!("must exceed 2, got {}", params.alpha))?;
    let gain = u.iter().sum::<Complex64>().norm_sqr();
    let delta = 2.0 / params.alpha;
    let omega = statrs::function::gamma::gamma(1.0 - delta)
        * (params.interferer_power / params.tx_power * gain).powf(delta);
    Ok(InterferenceCoefficient { omega })
}

fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("mean is positive and finite").sample(rng) as usize
}

/// PPP of intensity `lambda` on the annulus `exclusion <= |x| <= window` around the origin.
pub fn sample_ppp_points<R: Rng + ?Sized>(
    lambda: f64,
    exclusion: f64,
    window: f64,
    rng: &mut R,
) -> Vec<[f64; 2]> {
    let (e2, w2) = (exclusion * exclusion, window * window);
    let count = poisson_count(lambda * PI * (w2 - e2), rng);
    (0..count)
        .map(|_| {
            let r = (e2 + rng.random::<f64>() * (w2 - e2)).sqrt();
            let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
            [r * c, r * s]
        })
        .collect()
}

/// Distances from the origin to interfering BSs on the annulus.
pub fn sample_ppp_interferers<R: Rng + ?Sized>(
    params: &NetworkParams,
    exclusion_radius: f64,
    window_radius: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    ensure(
        exclusion_radius >= 0.0 && window_radius > exclusion_radius,
        "window_radius",
        "need window_radius > exclusion_radius >= 0",
    )?;
    Ok(sample_ppp_points(params.lambda_b, exclusion_radius, window_radius, rng)
        .into_iter()
        .map(|[x, y]| x.hypot(y))
        .collect())
}

/// Relative noise level below which the closed interference-limited form is used.
const INTERFERENCE_LIMITED_RATIO: f64 = 1e-12;
const ENVELOPE_FLOOR: f64 = 1e-16;

/// Distance average `phi(w) = E_d[exp(-(sigma_u^2 / (P l(d))) w - pi lambda_b omega d^2 w^(2/alpha))]`.
#[derive(Debug, Clone)]
pub struct SpatialAverage {
    law: DistanceLaw,
    alpha: f64,
    /// `sigma_u^2 / P`.
    noise: f64,
    omega: f64,
    lambda_b: f64,
    /// `c lambda_b pi`, so that `x = rate * d^2` is standard exponential.
    rate: f64,
    cell_constant: f64,
    closed_form: bool,
}

impl SpatialAverage {
    /// `filtered_noise` is `sigma^2 ||u||^2`; `threshold` is the success threshold the
    /// transform is inverted at and decides whether noise is negligible.
    pub fn new(
        law: DistanceLaw,
        params: &NetworkParams,
        omega: f64,
        filtered_noise: f64,
        threshold: f64,
    ) -> Result<Self> {
        let rate = rayleigh_rate(params);
        let noise = filtered_noise / params.tx_power;
        let closed_form = match law {
            DistanceLaw::PointMass(d) => {
                ensure(d > 0.0, "distance", "must be positive")?;
                false
            }
            DistanceLaw::Ordered { rank, total } => {
                ensure(1 <= rank && rank <= total, "rank", "must lie in [1, total]")?;
                ensure(params.lambda_b > 0.0, "lambda_b", "distance averages need a positive BS density")?;
                let noise_at_scale = noise * rate.powf(-params.alpha / 2.0);
                noise_at_scale < INTERFERENCE_LIMITED_RATIO * threshold.abs()
            }
        };
        Ok(Self {
            law,
            alpha: params.alpha,
            noise,
            omega,
            lambda_b: params.lambda_b,
            rate,
            cell_constant: params.cell_constant,
            closed_form,
        })
    }

    pub fn is_closed_form(&self) -> bool {
        self.closed_form
    }

    pub fn eval(&self, w: Complex64) -> Complex64 {
        let w_pow = w.powf(2.0 / self.alpha);
        match self.law {
            DistanceLaw::PointMass(d) => {
                (-(w * self.noise * d.powf(self.alpha)) - w_pow * (PI * self.lambda_b * self.omega * d * d)).exp()
            }
            DistanceLaw::Ordered { rank, total } => {
                let z = w_pow * (self.omega / self.cell_constant);
                if self.closed_form {
                    ordered_closed_form(rank, total, z)
                } else {
                    self.ordered_quadrature(rank, total, w, z)
                }
            }
        }
    }

    fn ordered_quadrature(&self, rank: usize, total: usize, w: Complex64, z: Complex64) -> Complex64 {
        let coef = rank as f64 * binomial(total, rank);
        let decay = (total - rank + 1) as f64 + z.re.max(0.0);
        let upper = (coef / ENVELOPE_FLOOR).ln() / decay;
        let half_alpha = self.alpha / 2.0;
        let noise_w = w * (self.noise * self.rate.powf(-half_alpha));
        let integrand = |x: f64| {
            let density = coef * (-(-x).exp_m1()).powi(rank as i32 - 1) * (-((total - rank + 1) as f64) * x).exp();
            (-(noise_w * x.powf(half_alpha)) - z * x).exp() * density
        };
        quadrature::integrate(integrand, 0.0, upper, 1e-13, 1e-12, 2000).value
    }
}

/// `r C(n, r) sum_l (-1)^l C(r-1, l) / (n - r + l + 1 + z)`.
fn ordered_closed_form(rank: usize, total: usize, z: Complex64) -> Complex64 {
    let coef = rank as f64 * binomial(total, rank);
    (0..rank)
        .map(|l| {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            (z + (total - rank + l + 1) as f64).inv() * (sign * binomial(rank - 1, l))
        })
        .sum::<Complex64>()
        * coef
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params() -> NetworkParams {
        NetworkParams::reference()
    }

    fn integrate_real<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
        quadrature::integrate(|x| Complex64::new(f(x), 0.0), a, b, 1e-14, 1e-13, 1000).value.re
    }

    #[test]
    fn serving_pdf_normalizes_and_peaks() {
        let p = params();
        let total = integrate_real(|x| serving_distance_pdf(x, &p), 0.0, 3000.0);
        assert!((total - 1.0).abs() < 1e-9);
        let mode = 1.0 / (2.0 * p.cell_constant * p.lambda_b * PI).sqrt();
        assert!((mode - 112.838).abs() < 1e-3);
        let h = 1e-3;
        assert!(serving_distance_pdf(mode, &p) > serving_distance_pdf(mode - h, &p));
        assert!(serving_distance_pdf(mode, &p) > serving_distance_pdf(mode + h, &p));
    }

    #[test]
    fn ordered_pdf_reductions() {
        let p = params();
        for &x in &[10.0, 100.0, 400.0] {
            assert!((ordered_distance_pdf(x, 1, 1, &p) - serving_distance_pdf(x, &p)).abs() < 1e-18);
            let f = serving_distance_cdf(x, &p);
            let expected = 4.0 * f.powi(3) * serving_distance_pdf(x, &p);
            assert!((ordered_distance_pdf(x, 4, 4, &p) - expected).abs() < 1e-18);
        }
        let total = integrate_real(|x| ordered_distance_pdf(x, 4, 4, &p), 0.0, 3000.0);
        assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ordered_cdf_is_integral_of_pdf() {
        let p = params();
        for &(r, n) in &[(1, 2), (2, 2), (2, 4), (3, 4)] {
            let x = 180.0;
            let integral = integrate_real(|t| ordered_distance_pdf(t, r, n, &p), 0.0, x);
            assert!((integral - ordered_distance_cdf(x, r, n, &p)).abs() < 1e-10);
        }
    }

    #[test]
    fn interference_coefficient_cases() {
        let mut p = params();
        p.alpha = 4.0;
        p.interferer_power = p.tx_power;
        let u = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let w = interference_coefficient(&u, &p).unwrap();
        assert!((w.omega - PI.sqrt()).abs() < 1e-12);
        let nulling = CVector::from_vec(vec![Complex64::new(1.0, 0.0), Complex64::new(-1.0, 0.0)]);
        assert_eq!(interference_coefficient(&nulling, &p).unwrap().omega, 0.0);
        p.alpha = 2.0;
        assert!(interference_coefficient(&u, &p).is_err());
    }

    #[test]
    fn interference_coefficient_matches_integral_gamma() {
        // Gamma(z) = Gamma(z + 1) / z with Gamma(z + 1) from its Euler integral.
        let p = params();
        let z = 1.0 - 2.0 / p.alpha;
        let gamma_z1 = integrate_real(|t| t.powf(z) * (-t).exp(), 0.0, 60.0);
        let gamma = gamma_z1 / z;
        let gain: f64 = 0.7;
        let u = CVector::from_vec(vec![Complex64::new(gain.sqrt(), 0.0), Complex64::new(0.0, 0.0)]);
        let expected = gamma * (p.interferer_power / p.tx_power * gain).powf(2.0 / p.alpha);
        let got = interference_coefficient(&u, &p).unwrap().omega;
        assert!((got - expected).abs() < 1e-10 * expected);
    }

    #[test]
    fn ppp_empty_without_bs() {
        let mut p = params();
        p.lambda_b = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sample_ppp_interferers(&p, 0.0, 5000.0, &mut rng).unwrap().is_empty());
        assert!(sample_ppp_interferers(&p, 10.0, 5.0, &mut rng).is_err());
    }

    #[test]
    fn ppp_mean_count_and_campbell() {
        let p = params();
        let (excl, window) = (125.0, 2000.0);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let n = 10_000;
        let (mut counts, mut counts_sq) = (0.0, 0.0);
        let (mut agg, mut agg_sq) = (0.0, 0.0);
        for _ in 0..n {
            let d = sample_ppp_interferers(&p, excl, window, &mut rng).unwrap();
            let c = d.len() as f64;
            counts += c;
            counts_sq += c * c;
            let s: f64 = d.iter().map(|&r| r.powf(-p.alpha)).sum();
            agg += s;
            agg_sq += s * s;
        }
        let nf = n as f64;
        let mean = counts / nf;
        let se = ((counts_sq / nf - mean * mean) / nf).sqrt();
        let expected = p.lambda_b * PI * (window * window - excl * excl);
        assert!((mean - expected).abs() <= 3.0 * se);
        // Campbell: E[sum d^-alpha] = lambda 2 pi int r^(1 - alpha) dr.
        let campbell = p.lambda_b * 2.0 * PI * integrate_real(|r| r.powf(1.0 - p.alpha), excl, window);
        let mean = agg / nf;
        let se = ((agg_sq / nf - mean * mean) / nf).sqrt();
        assert!((mean - campbell).abs() <= 3.0 * se, "{mean} vs {campbell} (se {se})");
    }

    #[test]
    fn spatial_average_is_one_at_origin() {
        let p = params();
        for law in [
            DistanceLaw::Ordered { rank: 1, total: 2 },
            DistanceLaw::Ordered { rank: 2, total: 2 },
            DistanceLaw::Ordered { rank: 3, total: 4 },
        ] {
            let sa = SpatialAverage::new(law, &p, 1.3, p.noise_power, 1.0).unwrap();
            assert!(!sa.is_closed_form());
            let v = sa.eval(Complex64::new(1e-300, 0.0));
            assert!((v - 1.0).norm() < 1e-10);
        }
    }

    #[test]
    fn spatial_average_closed_form_matches_quadrature() {
        let mut p = params();
        p.noise_power = 0.0;
        for (rank, total) in [(1, 2), (2, 2), (1, 4), (2, 4), (3, 4), (4, 4)] {
            let law = DistanceLaw::Ordered { rank, total };
            let closed = SpatialAverage::new(law, &p, 0.8, 0.0, 1.0).unwrap();
            assert!(closed.is_closed_form());
            let quad = SpatialAverage { closed_form: false, ..closed.clone() };
            for w in [Complex64::new(0.3, 0.0), Complex64::new(2.0, 15.0), Complex64::new(0.1, -40.0)] {
                assert!((closed.eval(w) - quad.eval(w)).norm() < 1e-11, "({rank},{total}) at {w}");
            }
        }
    }

    #[test]
    fn spatial_average_requires_positive_density() {
        let mut p = params();
        p.lambda_b = 0.0;
        let law = DistanceLaw::Ordered { rank: 1, total: 2 };
        assert!(SpatialAverage::new(law, &p, 1.0, 0.0, 1.0).is_err());
        assert!(SpatialAverage::new(DistanceLaw::PointMass(50.0), &p, 1.0, 0.0, 1.0).is_ok());
    }

    proptest! {
        #[test]
        fn order_statistics_mix_to_parent(x in 1.0f64..800.0, pairs in 1usize..4) {
            let p = params();
            let n = 2 * pairs;
            let mix: f64 = (1..=n).map(|r| ordered_distance_pdf(x, r, n, &p)).sum::<f64>() / n as f64;
            let parent = serving_distance_pdf(x, &p);
            prop_assert!((mix - parent).abs() <= 1e-12 * parent.max(1e-300));
        }

        #[test]
        fn cdf_is_monotone(x in 0.0f64..1000.0, dx in 0.0f64..100.0) {
            let p = params();
            prop_assert!(serving_distance_cdf(x + dx, &p) >= serving_distance_cdf(x, &p));
            prop_assert!(serving_distance_pdf(x, &p) >= 0.0);
        }

        #[test]
        fn omega_is_homogeneous(gamma in 0.01f64..100.0) {
            let p = params();
            let u = CVector::from_vec(vec![Complex64::new(0.6, 0.2), Complex64::new(-0.1, 0.7)]);
            let base = interference_coefficient(&u, &p).unwrap().omega;
            let mut q = p.clone();
            q.interferer_power *= gamma;
            let scaled = interference_coefficient(&u, &q).unwrap().omega;
            prop_assert!((scaled - base * gamma.powf(2.0 / p.alpha)).abs() <= 1e-12 * scaled);
        }
    }
}
