//! Monte Carlo simulation of the pair SINRs with sampled estimation errors,
//! PPP interferers and, for averaged modes, random user distances.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{ensure, Result};
use crate::geometry::{sample_ordered_distances, sample_ppp_points, sample_serving_distance};
use crate::linalg::{CMatrix, CVector};
use crate::model::{sample_error_matrix, NetworkParams};
pub use crate::scenario::{InterfererExclusion, Scenario, DEFAULT_WINDOW};

/// Trials per RNG substream. Fixed so results do not depend on the thread count.
pub const CHUNK_TRIALS: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McMode {
    /// Distances fixed at the pair configuration.
    Conditional,
    /// Near/far distances are the min/max of two serving distances.
    AverageRandom,
    /// `2K` serving distances ranked; the pair takes its configured ranks.
    AverageDistance,
}

/// Whether the near user's two decoding stages see the same random draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SicCoupling {
    Joint,
    /// Errors and interferers are redrawn for the own-decoding stage.
    Independent,
}

/// The three decoding SINRs of a pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sinrs {
    /// Near user decoding the far user's signal.
    pub sic: f64,
    /// Near user decoding its own signal after SIC.
    pub near: f64,
    pub far: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialOutcome {
    pub success_far: bool,
    pub success_sic: bool,
    /// Joint event: SIC and own decoding both succeed.
    pub success_near: bool,
}

impl TrialOutcome {
    pub fn from_sinrs(sinrs: &Sinrs, rate_near: f64, rate_far: f64) -> Self {
        let far_target = 2f64.powf(rate_far) - 1.0;
        let near_target = 2f64.powf(rate_near) - 1.0;
        let success_sic = sinrs.sic >= far_target;
        Self {
            success_far: sinrs.far >= far_target,
            success_sic,
            success_near: success_sic && sinrs.near >= near_target,
        }
    }
}

/// One user's realization inside a trial.
#[derive(Debug, Clone, Copy)]
pub struct UserDraw<'a> {
    pub h_hat: &'a CMatrix,
    pub error: &'a CMatrix,
    pub filter: &'a CVector,
    pub distance: f64,
    /// `sum_x l(||x - o||)` over the interferers this user sees.
    pub aggregate_path_loss: f64,
}

struct Projections {
    /// `|u^H (H_hat + E) v_i|^2`.
    total: Vec<f64>,
    /// `|u^H H_hat v_k|^2`.
    known_own: f64,
    /// `|u^H E v_k|^2`.
    error_own: f64,
    link_gain: f64,
    disturbance: f64,
}

fn project(user: &UserDraw<'_>, v: &CMatrix, stream: usize, params: &NetworkParams) -> Projections {
    let uh = user.filter.adjoint();
    let known = &uh * user.h_hat * v;
    let error = &uh * user.error * v;
    let total = (0..v.ncols()).map(|i| (known[(0, i)] + error[(0, i)]).norm_sqr()).collect();
    let gain_1 = user.filter.iter().sum::<Complex64>().norm_sqr();
    Projections {
        total,
        known_own: known[(0, stream)].norm_sqr(),
        error_own: error[(0, stream)].norm_sqr(),
        link_gain: params.tx_power * params.path_loss(user.distance),
        disturbance: params.interferer_power * gain_1 * user.aggregate_path_loss
            + params.noise_power * user.filter.norm_squared(),
    }
}

fn other_streams(p: &Projections, stream: usize) -> f64 {
    p.total.iter().enumerate().filter(|&(i, _)| i != stream).map(|(_, &x)| x).sum()
}

/// Evaluates the SIC, near and far SINRs of pair `stream` for one draw.
pub fn sinr_triplet(
    near: &UserDraw<'_>,
    far: &UserDraw<'_>,
    v: &CMatrix,
    stream: usize,
    beta_near2: f64,
    params: &NetworkParams,
) -> Sinrs {
    let bt2 = 1.0 - beta_near2;
    let n = project(near, v, stream, params);
    let f = project(far, v, stream, params);
    let n_rest = other_streams(&n, stream);
    let f_rest = other_streams(&f, stream);
    let sic = n.link_gain * n.known_own * bt2
        / (n.link_gain * (n.error_own * bt2 + n.total[stream] * beta_near2 + n_rest) + n.disturbance);
    let own = n.link_gain * n.known_own * beta_near2 / (n.link_gain * (n.error_own + n_rest) + n.disturbance);
    let far_sinr = f.link_gain * f.known_own * bt2
        / (f.link_gain * (f.error_own * bt2 + f.total[stream] * beta_near2 + f_rest) + f.disturbance);
    Sinrs { sic, near: own, far: far_sinr }
}

/// Empirical probability with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub p_hat: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_count(count: usize, n: usize, seed: u64) -> Self {
        let p_hat = count as f64 / n as f64;
        Self {
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
            n,
            seed,
        }
    }

    /// Standard error with `p_hat` floored at `1/n` away from 0 and 1, for comparisons
    /// where no failures (or no successes) were observed.
    pub fn comparison_stderr(&self) -> f64 {
        let floor = 1.0 / self.n as f64;
        let p = self.p_hat.clamp(floor, 1.0 - floor);
        (p * (1.0 - p) / self.n as f64).sqrt()
    }

    /// `|value - p_hat| <= k * comparison_stderr`.
    pub fn agrees_with(&self, value: f64, k: f64) -> bool {
        (value - self.p_hat).abs() <= k * self.comparison_stderr()
    }
}

/// Outage estimates for one rate point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub far: McEstimate,
    /// Joint SIC-and-decode failure.
    pub near: McEstimate,
    /// SIC-stage failure alone.
    pub sic: McEstimate,
    /// Own-decoding failure alone, ignoring SIC.
    pub own: McEstimate,
}

/// Mean and standard error of a per-trial goodput.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoodputEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

/// Derives the RNG of substream `stream` from a master seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

struct TrialSampler<'a> {
    scenario: &'a Scenario,
    index: usize,
    mode: McMode,
}

struct Positions {
    near: [f64; 2],
    far: [f64; 2],
    d_near: f64,
    d_far: f64,
}

impl TrialSampler<'_> {
    fn positions<R: Rng>(&self, rng: &mut R) -> Positions {
        let pair = &self.scenario.pairs[self.index];
        let params = &self.scenario.params;
        let (d_near, d_far) = match self.mode {
            McMode::Conditional => (pair.d_near, pair.d_far),
            McMode::AverageRandom => {
                let a = sample_serving_distance(params, rng);
                let b = sample_serving_distance(params, rng);
                (a.min(b), a.max(b))
            }
            McMode::AverageDistance => {
                let d = sample_ordered_distances(params, 2 * params.pairs, rng);
                (d[pair.rank_near - 1], d[pair.rank_far - 1])
            }
        };
        let mut place = |d: f64| {
            let (s, c) = (2.0 * PI * rng.random::<f64>()).sin_cos();
            [d * c, d * s]
        };
        Positions { near: place(d_near), far: place(d_far), d_near, d_far }
    }

    fn aggregates<R: Rng>(&self, pos: &Positions, rng: &mut R) -> (f64, f64) {
        let params = &self.scenario.params;
        let points = sample_ppp_points(params.lambda_b, 0.0, self.scenario.window_radius, rng);
        let exclude = self.scenario.exclusion == InterfererExclusion::ServingDistance;
        let half_alpha = -params.alpha / 2.0;
        let sum = |o: [f64; 2], d: f64| -> f64 {
            let d2 = d * d;
            points
                .iter()
                .map(|x| {
                    let r2 = (x[0] - o[0]).powi(2) + (x[1] - o[1]).powi(2);
                    if exclude && r2 < d2 {
                        0.0
                    } else {
                        r2.powf(half_alpha)
                    }
                })
                .sum()
        };
        (sum(pos.near, pos.d_near), sum(pos.far, pos.d_far))
    }

    fn sinrs<R: Rng>(&self, pos: &Positions, rng: &mut R) -> Sinrs {
        let s = self.scenario;
        let k = self.index;
        let e_near = sample_error_matrix(&s.near[k], rng);
        let e_far = sample_error_matrix(&s.far[k], rng);
        let (agg_near, agg_far) = self.aggregates(pos, rng);
        let near = UserDraw {
            h_hat: s.near[k].h_hat(),
            error: &e_near,
            filter: &s.design.near_filters[k],
            distance: pos.d_near,
            aggregate_path_loss: agg_near,
        };
        let far = UserDraw {
            h_hat: s.far[k].h_hat(),
            error: &e_far,
            filter: &s.design.far_filters[k],
            distance: pos.d_far,
            aggregate_path_loss: agg_far,
        };
        sinr_triplet(&near, &far, &s.design.v, k, s.pairs[k].beta_near2, &s.params)
    }
}

/// Runs `n_trials` trials in fixed-size chunks, each chunk on its own substream,
/// and folds the per-trial SINRs with `visit` into one accumulator per chunk.
fn run_chunks<A, F>(
    scenario: &Scenario,
    index: usize,
    mode: McMode,
    coupling: SicCoupling,
    n_trials: usize,
    seed: u64,
    init: impl Fn() -> A + Sync,
    visit: F,
) -> Vec<A>
where
    A: Send,
    F: Fn(&mut A, &Sinrs) + Sync,
{
    let sampler = TrialSampler { scenario, index, mode };
    let chunks = n_trials.div_ceil(CHUNK_TRIALS);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(seed, c as u64);
            let mut acc = init();
            let len = CHUNK_TRIALS.min(n_trials - c * CHUNK_TRIALS);
            for _ in 0..len {
                let pos = sampler.positions(&mut rng);
                let mut sinrs = sampler.sinrs(&pos, &mut rng);
                if coupling == SicCoupling::Independent {
                    sinrs.near = sampler.sinrs(&pos, &mut rng).near;
                }
                visit(&mut acc, &sinrs);
            }
            acc
        })
        .collect()
}

/// Outage estimates of pair `index` at each `(rate_near, rate_far)`, all rate points
/// sharing the same trials.
pub fn estimate_outage(
    scenario: &Scenario,
    index: usize,
    rates: &[(f64, f64)],
    mode: McMode,
    coupling: SicCoupling,
    n_trials: usize,
    seed: u64,
) -> Result<Vec<PairEstimate>> {
    scenario.validate()?;
    ensure(index < scenario.params.pairs, "index", "pair index out of range")?;
    ensure(n_trials >= 1, "n_trials", "must be at least 1")?;
    let targets: Vec<(f64, f64)> = rates
        .iter()
        .map(|&(rn, rf)| (2f64.powf(rn) - 1.0, 2f64.powf(rf) - 1.0))
        .collect();
    let counts = run_chunks(
        scenario,
        index,
        mode,
        coupling,
        n_trials,
        seed,
        || vec![[0usize; 4]; targets.len()],
        |acc, s| {
            for (c, &(tn, tf)) in acc.iter_mut().zip(&targets) {
                let sic_ok = s.sic >= tf;
                let own_ok = s.near >= tn;
                c[0] += usize::from(s.far < tf);
                c[1] += usize::from(!(sic_ok && own_ok));
                c[2] += usize::from(!sic_ok);
                c[3] += usize::from(!own_ok);
            }
        },
    );
    let mut total = vec![[0usize; 4]; targets.len()];
    for chunk in counts {
        for (t, c) in total.iter_mut().zip(chunk) {
            for j in 0..4 {
                t[j] += c[j];
            }
        }
    }
    Ok(total
        .into_iter()
        .map(|c| PairEstimate {
            far: McEstimate::from_count(c[0], n_trials, seed),
            near: McEstimate::from_count(c[1], n_trials, seed),
            sic: McEstimate::from_count(c[2], n_trials, seed),
            own: McEstimate::from_count(c[3], n_trials, seed),
        })
        .collect())
}

/// Empirical goodput `R_near 1{near ok} + R_far 1{far ok}` of pair `index`.
pub fn estimate_goodput(
    scenario: &Scenario,
    index: usize,
    rate_near: f64,
    rate_far: f64,
    mode: McMode,
    n_trials: usize,
    seed: u64,
) -> Result<GoodputEstimate> {
    scenario.validate()?;
    ensure(index < scenario.params.pairs, "index", "pair index out of range")?;
    ensure(n_trials >= 1, "n_trials", "must be at least 1")?;
    let sums = run_chunks(
        scenario,
        index,
        mode,
        SicCoupling::Joint,
        n_trials,
        seed,
        || (0.0f64, 0.0f64),
        |acc, s| {
            let o = TrialOutcome::from_sinrs(s, rate_near, rate_far);
            let g = if o.success_near { rate_near } else { 0.0 } + if o.success_far { rate_far } else { 0.0 };
            acc.0 += g;
            acc.1 += g * g;
        },
    );
    let (sum, sum_sq) = sums.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_trials as f64;
    let mean = sum / n;
    Ok(GoodputEstimate {
        mean,
        stderr: ((sum_sq / n - mean * mean).max(0.0) / n).sqrt(),
        n: n_trials,
        seed,
    })
}
