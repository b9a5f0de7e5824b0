//! Evaluates every (mode, method) table of a configuration over its sweep grid.

use anyhow::{anyhow, bail, Result};
use rayon::prelude::*;

use mimo_noma::asymptotic::{optimize_chernoff_far, optimize_chernoff_near};
use mimo_noma::design::{pair_goodput, Access};
use mimo_noma::geometry::GroupingPolicy;
use mimo_noma::model::NetworkParams;
use mimo_noma::montecarlo::{estimate_outage, McMode, SicCoupling};
use mimo_noma::outage::{
    far_outage_average, far_outage_conditional, near_outage_average, near_outage_conditional_approx,
    near_outage_conditional_exact,
};
use mimo_noma::scenario::{DesignKind, Scenario};

use crate::config::{ExperimentConfig, Method, Mode, SweepPoint};

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub sweep_value: f64,
    pub p_far: f64,
    pub p_near: f64,
    pub stderr_far: Option<f64>,
    pub stderr_near: Option<f64>,
    pub goodput: f64,
    pub seed: Option<u64>,
}

impl Row {
    fn failed(value: f64) -> Self {
        Self {
            sweep_value: value,
            p_far: f64::NAN,
            p_near: f64::NAN,
            stderr_far: None,
            stderr_near: None,
            goodput: f64::NAN,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub method: Method,
    pub mode: Mode,
    pub rows: Vec<Row>,
    /// `(sweep value, message)` of every point that could not be evaluated.
    pub failures: Vec<(f64, String)>,
}

fn policy(mode: Mode) -> Option<GroupingPolicy> {
    match mode {
        Mode::Conditional => None,
        Mode::Random => Some(GroupingPolicy::Random),
        Mode::Distance => Some(GroupingPolicy::DistanceBased),
    }
}

fn mc_mode(mode: Mode) -> McMode {
    match mode {
        Mode::Conditional => McMode::Conditional,
        Mode::Random => McMode::AverageRandom,
        Mode::Distance => McMode::AverageDistance,
    }
}

fn composed_goodput(point: &SweepPoint, p_far: f64, p_near: f64) -> f64 {
    point.pair.rate_near * (1.0 - p_near.clamp(0.0, 1.0)) + point.pair.rate_far * (1.0 - p_far.clamp(0.0, 1.0))
}

fn scenario(cfg: &ExperimentConfig, point: &SweepPoint, design: Option<DesignKind>) -> Result<Scenario> {
    let mut realization = point.realization.clone();
    if let Some(d) = design {
        realization.design = d;
    }
    let mut s = realization.draw(&point.params, &point.pair)?;
    s.window_radius = cfg.run.window;
    s.exclusion = cfg.exclusion();
    Ok(s)
}

fn analytic_row(cfg: &ExperimentConfig, point: &SweepPoint, method: Method, mode: Mode) -> Result<Row> {
    let index = cfg.pair.index;
    // Averaged "approx" neglects the receiver noise, which gives the closed forms.
    let params = match (method, mode) {
        (Method::Approx, Mode::Random | Mode::Distance) => NetworkParams { noise_power: 0.0, ..point.params.clone() },
        _ => point.params.clone(),
    };
    let s = scenario(cfg, &SweepPoint { params: params.clone(), ..point.clone() }, None)?;
    let (near, far) = s.effective_channels(index)?;
    let pair = &s.pairs[index];
    let (one_d, two_d) = (cfg.inversion.one_d(), cfg.inversion.two_d());
    let (p_far, p_near) = match (method, policy(mode)) {
        (Method::Exact, None) => (
            far_outage_conditional(&far, pair, &params, &one_d)?.raw,
            near_outage_conditional_exact(&near, pair, &params, &two_d)?.raw,
        ),
        (Method::Approx, None) => (
            far_outage_conditional(&far, pair, &params, &one_d)?.raw,
            near_outage_conditional_approx(&near, pair, &params, &one_d)?.raw,
        ),
        (Method::Exact | Method::Approx, Some(policy)) => (
            far_outage_average(&far, pair, &params, policy, &one_d)?.raw,
            near_outage_average(&near, pair, &params, policy, &two_d)?.raw,
        ),
        (Method::Asymptotic, None) => (
            optimize_chernoff_far(&far, pair, &params)?.1,
            optimize_chernoff_near(&near, pair, &params)?.1,
        ),
        (Method::Asymptotic, Some(_)) => bail!("asymptotic bounds are conditional on the distances"),
        _ => unreachable!("not an analytic method"),
    };
    Ok(Row {
        sweep_value: point.value,
        p_far,
        p_near,
        stderr_far: None,
        stderr_near: None,
        goodput: composed_goodput(point, p_far, p_near),
        seed: None,
    })
}

fn mc_row(cfg: &ExperimentConfig, point: &SweepPoint, mode: Mode) -> Result<Row> {
    let s = scenario(cfg, point, None)?;
    let rates = [(point.pair.rate_near, point.pair.rate_far)];
    let est = estimate_outage(&s, cfg.pair.index, &rates, mc_mode(mode), SicCoupling::Joint, cfg.run.trials, cfg.run.seed)?;
    let e = est.first().ok_or_else(|| anyhow!("no estimate returned"))?;
    Ok(Row {
        sweep_value: point.value,
        p_far: e.far.p_hat,
        p_near: e.near.p_hat,
        stderr_far: Some(e.far.stderr),
        stderr_near: Some(e.near.stderr),
        goodput: composed_goodput(point, e.far.p_hat, e.near.p_hat),
        seed: Some(cfg.run.seed),
    })
}

fn optimization_row(cfg: &ExperimentConfig, point: &SweepPoint, method: Method, mode: Mode) -> Result<Row> {
    if mode != Mode::Conditional {
        bail!("goodput optimization is conditional on the distances");
    }
    let (design, access) = match method {
        Method::Optimize => (DesignKind::Aligned, Access::Noma),
        Method::OmaPrecoded => (DesignKind::Aligned, Access::Oma),
        Method::OmaPlain => (DesignKind::Plain, Access::Oma),
        Method::NomaPlain => (DesignKind::Plain, Access::Noma),
        _ => unreachable!("not an optimization method"),
    };
    let s = scenario(cfg, point, Some(design))?;
    let index = cfg.pair.index;
    let (near, far) = s.effective_channels(index)?;
    let sol = pair_goodput(access, &near, &far, &s.pairs[index], &point.params, &cfg.inversion.one_d(), cfg.run.epsilon)?;
    Ok(Row {
        sweep_value: point.value,
        p_far: sol.outage_far,
        p_near: sol.outage_near,
        stderr_far: None,
        stderr_near: None,
        goodput: sol.goodput,
        seed: None,
    })
}

pub fn evaluate(cfg: &ExperimentConfig, point: &SweepPoint, method: Method, mode: Mode) -> Result<Row> {
    match method {
        Method::Mc => mc_row(cfg, point, mode),
        m if m.is_analytic() => analytic_row(cfg, point, m, mode),
        m => optimization_row(cfg, point, m, mode),
    }
}

/// Runs the selected methods of `cfg` under every configured mode. Rows keep
/// the sweep order; failing points yield NaN rows and a recorded message.
pub fn run(cfg: &ExperimentConfig, methods: &[Method]) -> Vec<Table> {
    let points: Vec<SweepPoint> = cfg.sweep.values.iter().map(|&v| cfg.point(v)).collect();
    let mut tables = Vec::new();
    for &mode in &cfg.run.modes {
        for &method in methods {
            let results: Vec<Result<Row>> = points.par_iter().map(|p| evaluate(cfg, p, method, mode)).collect();
            let mut rows = Vec::with_capacity(points.len());
            let mut failures = Vec::new();
            for (p, r) in points.iter().zip(results) {
                match r {
                    Ok(row) => rows.push(row),
                    Err(e) => {
                        failures.push((p.value, format!("{e:#}")));
                        rows.push(Row::failed(p.value));
                    }
                }
            }
            tables.push(Table { method, mode, rows, failures });
        }
    }
    tables
}
