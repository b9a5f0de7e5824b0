//! Self-checks: inversion kernels against transforms with known inverses, and
//! the analytic outage against Monte Carlo on the reference realization.

use anyhow::Result;
use num_complex::Complex64;
use statrs::function::erf::erfc;

use mimo_noma::laplace::{invert_1d, invert_2d, Inversion1DConfig, Inversion2DConfig};
use mimo_noma::montecarlo::{estimate_outage, McMode, SicCoupling};
use mimo_noma::outage::{far_outage_conditional, near_outage_conditional_exact};

use crate::config::ExperimentConfig;
use crate::presets::preset;

#[derive(Debug, Clone)]
pub struct ValidateOptions {
    /// Replaces the damping parameter of the 1D kernel.
    pub a: Option<f64>,
    pub seed: u64,
    pub trials: usize,
}

impl Default for ValidateOptions {
    fn default() -> Self {
        Self { a: None, seed: 1, trials: 20_000 }
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// Absolute error, or distance in standard errors for Monte Carlo checks.
    pub value: f64,
    pub bound: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.bound
    }
}

type Transform1D = (&'static str, fn(Complex64) -> Complex64, fn(f64) -> f64);
type Transform2D = (&'static str, fn(Complex64, Complex64) -> Complex64, fn(f64, f64) -> f64);

const ONE_D: [Transform1D; 3] = [
    ("1/s", |s| s.inv(), |_| 1.0),
    ("1/(s(s+1))", |s| (s * (s + 1.0)).inv(), |t| 1.0 - (-t).exp()),
    ("exp(-sqrt s)/s", |s| (-s.sqrt()).exp() / s, |t| erfc(1.0 / (2.0 * t.sqrt()))),
];

const TWO_D: [Transform2D; 3] = [
    ("1/(st)", |s, t| (s * t).inv(), |_, _| 1.0),
    ("1/((s+1)(t+2))", |s, t| ((s + 1.0) * (t + 2.0)).inv(), |x, y| (-x - 2.0 * y).exp()),
    ("1/(st(1+s+t))", |s, t| (s * t * (s + t + 1.0)).inv(), |x, y| 1.0 - (-x.min(y)).exp()),
];

fn kernel_checks(a: Option<f64>) -> Vec<Check> {
    let mut cfg1 = Inversion1DConfig::default();
    if let Some(a) = a {
        cfg1.a = a;
    }
    let mut checks = Vec::new();
    for (name, f, exact) in ONE_D {
        let mut worst: f64 = 0.0;
        for t in [0.1, 0.5, 1.0, 2.0, 5.0, 10.0] {
            worst = worst.max(match invert_1d(f, t, &cfg1) {
                Ok(r) => (r.value - exact(t)).abs(),
                Err(_) => f64::INFINITY,
            });
        }
        checks.push(Check { suite: "kernel-1d", name: name.into(), value: worst, bound: 1e-7 });
    }
    let cfg2 = Inversion2DConfig::default();
    // Off the x = y diagonal, where the third transform has a kink.
    let points = [(1.0, 2.0), (0.7, 1.9), (2.0, 0.4), (3.0, 1.0), (0.5, 1.5)];
    for (name, f, exact) in TWO_D {
        let mut worst: f64 = 0.0;
        for (x, y) in points {
            worst = worst.max(match invert_2d(f, x, y, &cfg2) {
                Ok(r) => (r.value - exact(x, y)).abs(),
                Err(_) => f64::INFINITY,
            });
        }
        checks.push(Check { suite: "kernel-2d", name: name.into(), value: worst, bound: 1e-5 });
    }
    checks
}

fn consistency_checks(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let cfg = ExperimentConfig::from_toml(preset("fig1").expect("fig1 preset"))?;
    let index = cfg.pair.index;
    let points: Vec<_> = cfg.sweep.values.iter().map(|&v| cfg.point(v)).collect();
    let scenario = points[0].realization.draw(&points[0].params, &points[0].pair)?;
    let (near, far) = scenario.effective_channels(index)?;
    let rates: Vec<(f64, f64)> = points.iter().map(|p| (p.pair.rate_near, p.pair.rate_far)).collect();
    let mc = estimate_outage(&scenario, index, &rates, McMode::Conditional, SicCoupling::Joint, opts.trials, opts.seed)?;
    let mut checks = Vec::new();
    for (p, est) in points.iter().zip(&mc) {
        let pair = scenario.pairs[index].with_rates(p.pair.rate_near, p.pair.rate_far);
        let pf = far_outage_conditional(&far, &pair, &p.params, &cfg.inversion.one_d())?.raw;
        let pn = near_outage_conditional_exact(&near, &pair, &p.params, &cfg.inversion.two_d())?.raw;
        for (role, analytic, e) in [("far", pf, est.far), ("near", pn, est.near)] {
            checks.push(Check {
                suite: "mc",
                name: format!("{role} R_far={}", p.pair.rate_far),
                value: (analytic - e.p_hat).abs() / e.comparison_stderr(),
                bound: 3.0,
            });
        }
    }
    Ok(checks)
}

pub fn run(opts: &ValidateOptions) -> Result<Vec<Check>> {
    let mut checks = kernel_checks(opts.a);
    checks.extend(consistency_checks(opts)?);
    Ok(checks)
}

pub fn report(checks: &[Check], opts: &ValidateOptions) -> String {
    let mut out = format!("monte carlo: seed {}, {} trials\n", opts.seed, opts.trials);
    out.push_str(&format!("{:<10} {:<20} {:>11} {:>9}  result\n", "suite", "check", "value", "bound"));
    for c in checks {
        out.push_str(&format!(
            "{:<10} {:<20} {:>11.3e} {:>9.1e}  {}\n",
            c.suite,
            c.name,
            c.value,
            c.bound,
            if c.passed() { "pass" } else { "FAIL" }
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    out.push_str(&format!("{} checks, {failed} failed\n", checks.len()));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernels_pass_with_defaults() {
        assert!(kernel_checks(None).iter().all(Check::passed));
    }

    #[test]
    fn small_damping_is_caught() {
        let checks = kernel_checks(Some(3.0));
        assert!(checks.iter().filter(|c| c.suite == "kernel-1d").all(|c| !c.passed()));
    }
}
