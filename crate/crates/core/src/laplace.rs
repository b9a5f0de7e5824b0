//! Numerical inversion of one- and two-dimensional Laplace transforms.
//!
//! The 1D routine is the Fourier-series method with Euler summation of the
//! alternating tail. The 2D routine is a double Fourier series on a shifted
//! contour, summed row by row and accelerated with Wynn's epsilon algorithm.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};

/// How the alternating Fourier tail of the 1D inversion is summed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesAcceleration {
    /// Binomial average of `terms + 1` consecutive partial sums.
    Euler { terms: usize },
    /// Wynn's epsilon algorithm over `depth` consecutive partial sums.
    ///
    /// Better suited to transforms of nearly discontinuous functions.
    Epsilon { depth: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion1DConfig {
    /// Contour abscissa parameter; the discretization error is about `e^{-a}`.
    pub a: f64,
    /// Index of the first partial sum handed to the accelerator.
    pub truncation: usize,
    pub acceleration: SeriesAcceleration,
}

impl Default for Inversion1DConfig {
    fn default() -> Self {
        Self {
            a: 23.0,
            truncation: 15,
            acceleration: SeriesAcceleration::Euler { terms: 11 },
        }
    }
}

impl Inversion1DConfig {
    /// Longer Euler averaging, roughly 1e-10 on smooth CDFs.
    pub fn high_accuracy() -> Self {
        Self {
            a: 23.0,
            truncation: 20,
            acceleration: SeriesAcceleration::Euler { terms: 15 },
        }
    }

    /// Epsilon-accelerated summation for outage curves with steep transitions.
    pub fn steep() -> Self {
        Self {
            a: 23.0,
            truncation: 180,
            acceleration: SeriesAcceleration::Epsilon { depth: 41 },
        }
    }

    fn last_term(&self) -> usize {
        match self.acceleration {
            SeriesAcceleration::Euler { terms } => self.truncation + terms,
            SeriesAcceleration::Epsilon { depth } => self.truncation + depth.max(1) - 1,
        }
    }
}

/// Result of a numerical inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub value: f64,
    /// Set when the epsilon table became numerically singular.
    pub degraded: bool,
}

/// Output of Wynn's epsilon algorithm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonEstimate {
    pub value: Complex64,
    pub degraded: bool,
}

const SINGULAR_DIFFERENCE: f64 = 1e-300;

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
///
/// Returns the deepest even-column estimate. A converged column returns its
/// converged value; a singular auxiliary column returns the last partial sum
/// with `degraded` set.
pub fn epsilon_accelerate(partial_sums: &[Complex64]) -> EpsilonEstimate {
    let n = partial_sums.len();
    let Some(&last) = partial_sums.last() else {
        return EpsilonEstimate {
            value: Complex64::new(0.0, 0.0),
            degraded: true,
        };
    };
    let mut prev: Vec<Complex64> = vec![Complex64::new(0.0, 0.0); n + 1];
    let mut cur: Vec<Complex64> = partial_sums.to_vec();
    let mut best = last;
    for col in 0..n - 1 {
        let even = col % 2 == 0;
        if even {
            best = *cur.last().expect("column is non-empty");
        }
        let mut next = Vec::with_capacity(cur.len() - 1);
        for j in 0..cur.len() - 1 {
            let diff = cur[j + 1] - cur[j];
            let scale = cur[j].norm().max(cur[j + 1].norm());
            if even && diff.norm() <= 4.0 * f64::EPSILON * scale {
                return EpsilonEstimate {
                    value: cur[j + 1],
                    degraded: false,
                };
            }
            if !even && diff.norm() <= SINGULAR_DIFFERENCE {
                return EpsilonEstimate {
                    value: last,
                    degraded: true,
                };
            }
            next.push(prev[j + 1] + diff.inv());
        }
        prev = cur;
        cur = next;
    }
    if (n - 1) % 2 == 0 {
        best = *cur.last().expect("column is non-empty");
    }
    let degraded = !best.is_finite();
    EpsilonEstimate {
        value: if degraded { last } else { best },
        degraded,
    }
}

fn checked(s: Complex64, v: Complex64) -> Result<Complex64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonFiniteTransform { s })
    }
}

/// Inverts a one-sided Laplace transform `f` at time `t > 0`.
pub fn invert_1d<F>(f: F, t: f64, cfg: &Inversion1DConfig) -> Result<Inversion>
where
    F: Fn(Complex64) -> Complex64,
{
    ensure(t.is_finite() && t > 0.0, "t", format!("must be positive, got {t}"))?;
    ensure(cfg.a.is_finite() && cfg.a > 0.0, "a", "must be positive")?;
    let last = cfg.last_term();
    let mut partial = Vec::with_capacity(last + 1);
    let mut sum = 0.0;
    for n in 0..=last {
        let s = Complex64::new(cfg.a, 2.0 * PI * n as f64) / (2.0 * t);
        let v = checked(s, f(s))?.re;
        let term = if n == 0 {
            0.5 * v
        } else if n % 2 == 1 {
            -v
        } else {
            v
        };
        sum += term;
        partial.push(sum);
    }
    let scale = (cfg.a / 2.0).exp() / t;
    let (value, degraded) = match cfg.acceleration {
        SeriesAcceleration::Euler { terms } => {
            let mut binom = 1.0;
            let mut acc = 0.0;
            for m in 0..=terms {
                acc += binom * partial[cfg.truncation + m];
                binom *= (terms - m) as f64 / (m + 1) as f64;
            }
            (acc * 0.5f64.powi(terms as i32), false)
        }
        SeriesAcceleration::Epsilon { .. } => {
            let sums: Vec<Complex64> = partial[cfg.truncation..]
                .iter()
                .map(|&x| Complex64::new(x, 0.0))
                .collect();
            let est = epsilon_accelerate(&sums);
            (est.value.re, est.degraded)
        }
    };
    Ok(Inversion {
        value: scale * value,
        degraded,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion2DConfig {
    /// Half-period in each dimension as a multiple of the evaluation point.
    pub half_period_scale: f64,
    /// Terms summed directly before acceleration starts.
    pub terms: usize,
    /// Each one-sided tail hands `2 * epsilon_depth + 1` partial sums to Wynn's algorithm.
    pub epsilon_depth: usize,
    /// Target discretization (aliasing) error; sets the contour abscissae.
    pub discretization_error: f64,
}

impl Default for Inversion2DConfig {
    fn default() -> Self {
        Self {
            half_period_scale: 2.0,
            terms: 100,
            epsilon_depth: 4,
            discretization_error: 1e-8,
        }
    }
}

fn accelerated_line(center: Complex64, positive: &[Complex64], negative: &[Complex64], start: usize) -> (Complex64, bool) {
    let tail = |side: &[Complex64]| {
        let mut acc = Complex64::new(0.0, 0.0);
        let sums: Vec<Complex64> = side
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        epsilon_accelerate(&sums[start..])
    };
    let p = tail(positive);
    let n = tail(negative);
    (center + p.value + n.value, p.degraded || n.degraded)
}

/// Inverts a two-dimensional Laplace transform `f(s, t)` at `(x, y)`, both positive.
///
/// `f` must be the transform of a real function, so that `f(conj s, conj t)`
/// equals `conj f(s, t)`; only half of the lattice is evaluated.
pub fn invert_2d<F>(f: F, x: f64, y: f64, cfg: &Inversion2DConfig) -> Result<Inversion>
where
    F: Fn(Complex64, Complex64) -> Complex64 + Sync,
{
    ensure(x.is_finite() && x > 0.0, "x", format!("must be positive, got {x}"))?;
    ensure(y.is_finite() && y > 0.0, "y", format!("must be positive, got {y}"))?;
    ensure(cfg.half_period_scale > 1.0, "half_period_scale", "must exceed 1")?;
    ensure(cfg.terms >= 1, "terms", "must be at least 1")?;
    ensure(
        cfg.discretization_error > 0.0 && cfg.discretization_error < 1.0,
        "discretization_error",
        "must lie in (0, 1)",
    )?;
    let t1 = cfg.half_period_scale * x;
    let t2 = cfg.half_period_scale * y;
    let er = cfg.discretization_error;
    let c1 = -(er / 10.0).ln() / (2.0 * t1);
    let xi = (-2.0 * t1 * c1).exp();
    let c2 = -(er / (1.0 - xi)).ln() / (2.0 * t2);
    let n = cfg.terms + 2 * cfg.epsilon_depth;
    let start = cfg.terms - 1;

    let term = |l1: i64, l2: i64| -> Result<Complex64> {
        let s = Complex64::new(c1, PI * l1 as f64 / t1);
        let t = Complex64::new(c2, PI * l2 as f64 / t2);
        let v = checked(s, f(s, t))?;
        let phase = PI * (l1 as f64 * x / t1 + l2 as f64 * y / t2);
        Ok(v * Complex64::from_polar(1.0, phase))
    };

    let rows: Vec<Result<(Complex64, bool)>> = (0..=n as i64)
        .into_par_iter()
        .map(|l1| {
            let center = term(l1, 0)?;
            let pos = (1..=n as i64).map(|l2| term(l1, l2)).collect::<Result<Vec<_>>>()?;
            let neg = (1..=n as i64).map(|l2| term(l1, -l2)).collect::<Result<Vec<_>>>()?;
            Ok(accelerated_line(center, &pos, &neg, start))
        })
        .collect();
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut degraded = rows.iter().any(|r| r.1);
    let row_sums: Vec<Complex64> = rows.iter().map(|r| r.0).collect();
    // Rows with negative l1 are conjugates of the positive ones.
    let mirrored: Vec<Complex64> = row_sums[1..].iter().map(|z| z.conj()).collect();
    let (total, d) = accelerated_line(row_sums[0], &row_sums[1..], &mirrored, start);
    degraded |= d;
    let prefactor = (c1 * x + c2 * y).exp() / (4.0 * t1 * t2);
    Ok(Inversion {
        value: prefactor * total.re,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn step_function_default_config() {
        let r = invert_1d(|s| s.inv(), 1.0, &Inversion1DConfig::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-7);
    }

    #[test]
    fn step_function_high_accuracy() {
        let r = invert_1d(|s| s.inv(), 1.0, &Inversion1DConfig::high_accuracy()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn exponential_cdf() {
        for &t in &[0.1, 0.5, 1.0, 2.0, 8.0] {
            let r = invert_1d(|s| (s * (s + 1.0)).inv(), t, &Inversion1DConfig::default()).unwrap();
            assert!((r.value - (1.0 - (-t).exp())).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn levy_cdf() {
        for &t in &[0.2, 1.0, 3.0] {
            let r = invert_1d(|s| (-s.sqrt()).exp() / s, t, &Inversion1DConfig::default()).unwrap();
            let exact = statrs::function::erf::erfc(1.0 / (2.0 * f64::sqrt(t)));
            assert!((r.value - exact).abs() < 1e-7, "t={t}");
        }
    }

    #[test]
    fn steep_config_resolves_near_step() {
        // CDF of an exponential with mean 0.01 shifted to 1, evaluated just after the jump.
        let f = |s: Complex64| (-s).exp() / (s * (s * 0.01 + 1.0));
        let cfg = Inversion1DConfig::steep();
        for &t in &[0.8, 1.3] {
            let exact = if t < 1.0 { 0.0 } else { 1.0 - f64::exp(-(t - 1.0) / 0.01) };
            let r = invert_1d(f, t, &cfg).unwrap();
            assert!((r.value - exact).abs() < 1e-7, "t={t}: {}", r.value);
        }
    }

    #[test]
    fn small_a_is_visibly_wrong() {
        let cfg = Inversion1DConfig { a: 3.0, ..Default::default() };
        let r = invert_1d(|s| s.inv(), 1.0, &cfg).unwrap();
        assert!((r.value - 1.0).abs() > 1e-2);
    }

    #[test]
    fn nonfinite_transform_is_an_error() {
        let r = invert_1d(|_| c(f64::NAN), 1.0, &Inversion1DConfig::default());
        assert!(matches!(r, Err(Error::NonFiniteTransform { .. })));
    }

    #[test]
    fn rejects_nonpositive_time() {
        assert!(invert_1d(|s| s.inv(), 0.0, &Inversion1DConfig::default()).is_err());
    }

    #[test]
    fn epsilon_on_constant_sequence() {
        let e = epsilon_accelerate(&[c(2.5); 7]);
        assert_eq!(e.value, c(2.5));
        assert!(!e.degraded);
    }

    #[test]
    fn epsilon_on_geometric_series() {
        // Partial sums of sum (-0.9)^k converge slowly to 1/1.9.
        let mut s = 0.0;
        let sums: Vec<Complex64> = (0..11)
            .map(|k| {
                s += (-0.9f64).powi(k);
                c(s)
            })
            .collect();
        let e = epsilon_accelerate(&sums);
        assert!((e.value.re - 1.0 / 1.9).abs() < 1e-12);
    }

    #[test]
    fn epsilon_on_log2_series() {
        let mut s = 0.0;
        let sums: Vec<Complex64> = (1..=15)
            .map(|k| {
                s += (-1.0f64).powi(k + 1) / k as f64;
                c(s)
            })
            .collect();
        let e = epsilon_accelerate(&sums);
        assert!((e.value.re - 2f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_oracles() {
        let cfg = Inversion2DConfig::default();
        let r = invert_2d(|s, t| (s * t).inv(), 0.7, 1.9, &cfg).unwrap();
        assert!((r.value - 1.0).abs() < 1e-6);
        let r = invert_2d(|s, t| ((s + 1.0) * (t + 2.0)).inv(), 1.0, 0.5, &cfg).unwrap();
        assert!((r.value - (-2f64).exp()).abs() < 1e-6);
        let r = invert_2d(|s, t| (s * t * (s + t + 1.0)).inv(), 1.0, 2.0, &cfg).unwrap();
        assert!((r.value - (1.0 - (-1f64).exp())).abs() < 1e-6);
    }

    #[test]
    fn kink_on_diagonal_converges_like_one_over_terms() {
        let f = |s: Complex64, t: Complex64| (s * t * (s + t + 1.0)).inv();
        let exact = 1.0 - (-1f64).exp();
        let err = |terms| {
            let cfg = Inversion2DConfig { terms, ..Default::default() };
            (invert_2d(f, 1.0, 1.0, &cfg).unwrap().value - exact).abs()
        };
        let (coarse, fine) = (err(100), err(200));
        assert!(coarse > 1e-4);
        assert!((coarse / fine - 2.0).abs() < 0.2, "{coarse} {fine}");
    }

    #[test]
    fn two_dimensional_separable_cdf() {
        // P(X <= x, Y <= y) for independent Exp(1) and Exp(3).
        let f = |s: Complex64, t: Complex64| (s * t * (s + 1.0) * (t / 3.0 + 1.0)).inv();
        let r = invert_2d(f, 0.4, 0.3, &Inversion2DConfig::default()).unwrap();
        let exact = (1.0 - (-0.4f64).exp()) * (1.0 - (-0.9f64).exp());
        assert!((r.value - exact).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn gamma_two_cdf(rate in 0.05f64..20.0, t in 0.05f64..10.0) {
            // Erlang(2, rate) CDF.
            let f = |s: Complex64| (s * (s / rate + 1.0).powi(2)).inv();
            let r = invert_1d(f, t, &Inversion1DConfig::default()).unwrap();
            let x = rate * t;
            let exact = 1.0 - (-x).exp() * (1.0 + x);
            prop_assert!((r.value - exact).abs() < 1e-7);
        }
    }
}
