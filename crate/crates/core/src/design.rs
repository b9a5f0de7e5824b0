//! Signal-alignment precoding and outage-constrained rate selection.

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{ensure, Error, Result};
use crate::laplace::Inversion1DConfig;
use crate::linalg::{dominant_right_singular_vector, null_space, CMatrix, CVector};
use crate::model::{NetworkParams, PairConfig};
use crate::outage::{
    far_outage_conditional, near_outage_conditional_approx, success_probability, Disturbance, EffectiveChannel,
};

/// Largest number of antenna selections enumerated exhaustively.
pub const MAX_EXHAUSTIVE_SELECTIONS: usize = 5040;
const SAMPLED_SELECTIONS: usize = 1000;
const SELECTION_SEED: u64 = 0x5e1e_c710;
const NULL_SPACE_TOLERANCE: f64 = 1e-12;
/// Reciprocal condition number below which `G` counts as singular.
const SINGULAR_RCOND: f64 = 1e-12;

/// Orthonormal basis of `{(u; w) : (H_near L)^H u = (H_far L)^H w}`.
#[derive(Debug, Clone)]
pub struct NullSpace {
    /// `2N x dim` with orthonormal columns.
    pub basis: CMatrix,
    /// Set when the basis is larger than `2N - K`.
    pub rank_deficient: bool,
}

pub fn alignment_nullspace(h_near: &CMatrix, h_far: &CMatrix, selection: &CMatrix) -> Result<NullSpace> {
    let n = h_near.nrows();
    let k = selection.ncols();
    ensure(h_far.shape() == h_near.shape(), "h_far", "near and far channels must have equal shape")?;
    ensure(selection.nrows() == h_near.ncols(), "selection", "must have M rows")?;
    ensure(k < 2 * n, "pairs", format!("need K < 2N, got K = {k}, N = {n}"))?;
    let a = (h_near * selection).adjoint();
    let b = (h_far * selection).adjoint();
    let mut stacked = CMatrix::zeros(k, 2 * n);
    stacked.view_mut((0, 0), (k, n)).copy_from(&a);
    stacked.view_mut((0, n), (k, n)).copy_from(&(-b));
    let (basis, rank_deficient) = null_space(&stacked, NULL_SPACE_TOLERANCE);
    Ok(NullSpace { basis, rank_deficient })
}

/// Unit `z` maximizing `||(H_near L)^H u(z)||` where `u(z)` is the top half of `U z`.
pub fn choose_receiver_combining(basis: &CMatrix, h_near_selected: &CMatrix) -> CVector {
    if basis.ncols() == 1 {
        return CVector::from_element(1, Complex64::new(1.0, 0.0));
    }
    let n = h_near_selected.nrows();
    let top = basis.rows(0, n);
    dominant_right_singular_vector(&(h_near_selected.adjoint() * top))
}

/// `M x K` matrix with a single one per column at the given rows.
pub fn selection_matrix(m: usize, rows: &[usize]) -> CMatrix {
    let mut l = CMatrix::zeros(m, rows.len());
    for (c, &r) in rows.iter().enumerate() {
        l[(r, c)] = Complex64::new(1.0, 0.0);
    }
    l
}

/// All ordered selections of `k` distinct antennas out of `m`, lexicographic.
pub fn antenna_selections(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn extend(m: usize, k: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == k {
            out.push(prefix.clone());
            return;
        }
        for r in 0..m {
            if !prefix.contains(&r) {
                prefix.push(r);
                extend(m, k, prefix, out);
                prefix.pop();
            }
        }
    }
    let mut out = Vec::new();
    extend(m, k, &mut Vec::with_capacity(k), &mut out);
    out
}

fn selection_count(m: usize, k: usize) -> usize {
    (m - k + 1..=m).fold(1usize, |acc, x| acc.saturating_mul(x))
}

/// Precoder and per-user receive filters for all pairs.
#[derive(Debug, Clone)]
pub struct LinearDesign {
    /// `M x K`, unit-norm columns.
    pub v: CMatrix,
    pub near_filters: Vec<CVector>,
    pub far_filters: Vec<CVector>,
    /// Selected antenna rows; column `k` of `L` picks `selection[k]`.
    pub selection: Vec<usize>,
    /// Effective channel `G = (g_1, ..., g_K)`; empty for designs without alignment.
    pub g: CMatrix,
    /// Column normalizers of `G^{-H}`.
    pub normalizers: Vec<f64>,
    /// `|u_k^H H_k v_k|^2` of each pair.
    pub gains: Vec<f64>,
    /// `min_k gain` of every evaluated candidate (`None` when singular), in evaluation order.
    pub candidate_min_gains: Vec<Option<f64>>,
    /// Set when the candidates were randomly subsampled.
    pub subsampled: bool,
}

impl LinearDesign {
    pub fn pairs(&self) -> usize {
        self.v.ncols()
    }
}

struct Candidate {
    g: CMatrix,
    near: Vec<CVector>,
    far: Vec<CVector>,
    g_inv_h: CMatrix,
    gains: Vec<f64>,
}

fn evaluate_selection(h_near: &[CMatrix], h_far: &[CMatrix], l: &CMatrix) -> Result<Option<Candidate>> {
    let k = l.ncols();
    let n = h_near[0].nrows();
    let mut g = CMatrix::zeros(k, k);
    let mut near = Vec::with_capacity(k);
    let mut far = Vec::with_capacity(k);
    for p in 0..k {
        let ns = alignment_nullspace(&h_near[p], &h_far[p], l)?;
        let a = &h_near[p] * l;
        let z = choose_receiver_combining(&ns.basis, &a);
        let stacked = &ns.basis * z;
        let u = stacked.rows(0, n).into_owned();
        let w = stacked.rows(n, n).into_owned();
        g.set_column(p, &(a.adjoint() * &u));
        near.push(u);
        far.push(w);
    }
    let sv = g.clone().singular_values();
    let smax = sv.max();
    if !(smax > 0.0) || sv.min() < SINGULAR_RCOND * smax {
        return Ok(None);
    }
    let Some(g_inv) = g.clone().try_inverse() else {
        return Ok(None);
    };
    let g_inv_h = g_inv.adjoint();
    let gains = g_inv_h.column_iter().map(|c| 1.0 / c.norm_squared()).collect();
    Ok(Some(Candidate { g, near, far, g_inv_h, gains }))
}

fn check_channels(h_near: &[CMatrix], h_far: &[CMatrix], params: &NetworkParams) -> Result<(usize, usize, usize)> {
    let k = params.pairs;
    ensure(h_near.len() == k && h_far.len() == k, "channels", format!("expected {k} near and far channels"))?;
    let (n, m) = (params.rx_antennas, params.tx_antennas);
    for h in h_near.iter().chain(h_far) {
        if h.shape() != (n, m) {
            return Err(Error::Dimension(format!("channel is {:?}, expected ({n}, {m})", h.shape())));
        }
    }
    ensure(k <= m.min(n), "pairs", "K must not exceed min(M, N)")?;
    Ok((n, m, k))
}

/// Signal alignment: for every antenna selection align each pair's two users,
/// zero-force across pairs, and keep the selection with the largest minimum gain.
pub fn build_precoder(h_near: &[CMatrix], h_far: &[CMatrix], params: &NetworkParams) -> Result<LinearDesign> {
    let (_, m, k) = check_channels(h_near, h_far, params)?;
    let mut selections = antenna_selections_bounded(m, k);
    let subsampled = selections.len() < selection_count(m, k);
    if subsampled {
        selections.sort();
    }
    let mut best: Option<(f64, usize, Candidate)> = None;
    let mut candidate_min_gains = Vec::with_capacity(selections.len());
    for (idx, rows) in selections.iter().enumerate() {
        let l = selection_matrix(m, rows);
        let cand = evaluate_selection(h_near, h_far, &l)?;
        let min_gain = cand.as_ref().map(|c| c.gains.iter().copied().fold(f64::INFINITY, f64::min));
        candidate_min_gains.push(min_gain);
        if let (Some(c), Some(gmin)) = (cand, min_gain) {
            if best.as_ref().is_none_or(|(b, _, _)| gmin > *b) {
                best = Some((gmin, idx, c));
            }
        }
    }
    let Some((_, idx, cand)) = best else {
        return Err(Error::AllCandidatesSingular { candidates: selections.len() });
    };
    let l = selection_matrix(m, &selections[idx]);
    let mut p = cand.g_inv_h.clone();
    let mut normalizers = Vec::with_capacity(k);
    for mut col in p.column_iter_mut() {
        let norm = col.norm();
        normalizers.push(1.0 / norm);
        col /= Complex64::new(norm, 0.0);
    }
    Ok(LinearDesign {
        v: &l * p,
        near_filters: cand.near,
        far_filters: cand.far,
        selection: selections[idx].clone(),
        g: cand.g,
        normalizers,
        gains: cand.gains,
        candidate_min_gains,
        subsampled,
    })
}

fn antenna_selections_bounded(m: usize, k: usize) -> Vec<Vec<usize>> {
    if selection_count(m, k) <= MAX_EXHAUSTIVE_SELECTIONS {
        return antenna_selections(m, k);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SELECTION_SEED);
    let mut rows: Vec<usize> = (0..m).collect();
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(SAMPLED_SELECTIONS);
    while out.len() < SAMPLED_SELECTIONS {
        rows.shuffle(&mut rng);
        let pick = rows[..k].to_vec();
        if !out.contains(&pick) {
            out.push(pick);
        }
    }
    out
}

/// Baseline without precoding: first `K` antennas, matched-filter receivers.
pub fn build_plain_design(h_near: &[CMatrix], h_far: &[CMatrix], params: &NetworkParams) -> Result<LinearDesign> {
    let (_, m, k) = check_channels(h_near, h_far, params)?;
    let selection: Vec<usize> = (0..k).collect();
    let v = selection_matrix(m, &selection);
    let matched = |h: &CMatrix, p: usize| -> Result<CVector> {
        let u = h * v.column(p);
        let norm = u.norm();
        ensure(norm > 0.0, "channel", "matched filter of a zero channel")?;
        Ok(u / Complex64::new(norm, 0.0))
    };
    let near_filters = (0..k).map(|p| matched(&h_near[p], p)).collect::<Result<Vec<_>>>()?;
    let far_filters = (0..k).map(|p| matched(&h_far[p], p)).collect::<Result<Vec<_>>>()?;
    let gains = (0..k)
        .map(|p| (near_filters[p].adjoint() * &h_near[p] * v.column(p))[(0, 0)].norm_sqr())
        .collect();
    Ok(LinearDesign {
        v,
        near_filters,
        far_filters,
        selection,
        g: CMatrix::zeros(0, 0),
        normalizers: vec![1.0; k],
        gains,
        candidate_min_gains: vec![],
        subsampled: false,
    })
}

/// Outage of one pair as a function of its two target rates.
pub trait PairOutageModel {
    /// Raw far-user outage.
    fn far(&self, rate_near: f64, rate_far: f64) -> Result<f64>;
    /// Raw near-user outage.
    fn near(&self, rate_near: f64, rate_far: f64) -> Result<f64>;
    /// Exclusive upper limits `(near, far)` of the admissible rates.
    fn rate_limits(&self) -> (f64, f64);
}

/// Cap on searched rates where no other limit applies (bps/Hz).
pub const RATE_CAP: f64 = 30.0;

fn noise_at(eff: &EffectiveChannel, params: &NetworkParams, d: f64) -> f64 {
    eff.filtered_noise / (params.tx_power * params.path_loss(d))
}

fn rate_limit(signal: f64, noise: f64) -> f64 {
    if noise <= 0.0 {
        RATE_CAP
    } else {
        (1.0 + signal / noise).log2().min(RATE_CAP)
    }
}

/// Superposition coding with SIC at the near user.
#[derive(Debug, Clone)]
pub struct NomaPair<'a> {
    pub near: &'a EffectiveChannel,
    pub far: &'a EffectiveChannel,
    pub pair: PairConfig,
    pub params: &'a NetworkParams,
    pub cfg: Inversion1DConfig,
}

impl PairOutageModel for NomaPair<'_> {
    fn far(&self, rate_near: f64, rate_far: f64) -> Result<f64> {
        Ok(far_outage_conditional(self.far, &self.pair.with_rates(rate_near, rate_far), self.params, &self.cfg)?.raw)
    }

    fn near(&self, rate_near: f64, rate_far: f64) -> Result<f64> {
        let pair = self.pair.with_rates(rate_near, rate_far);
        Ok(near_outage_conditional_approx(self.near, &pair, self.params, &self.cfg)?.raw)
    }

    fn rate_limits(&self) -> (f64, f64) {
        let b2 = self.pair.beta_near2;
        let near = rate_limit(
            self.near.own_gain() * b2,
            noise_at(self.near, self.params, self.pair.d_near),
        );
        ((near), (1.0 + 1.0 / b2).log2())
    }
}

/// Orthogonal access: the near user holds a `beta_near^2` share of the resource, the far user the rest.
#[derive(Debug, Clone)]
pub struct OmaPair<'a> {
    pub near: &'a EffectiveChannel,
    pub far: &'a EffectiveChannel,
    pub pair: PairConfig,
    pub params: &'a NetworkParams,
    pub cfg: Inversion1DConfig,
}

impl OmaPair<'_> {
    /// Outage of a user decoding alone at rate `rate / share`.
    fn single_user(&self, eff: &EffectiveChannel, d: f64, rate: f64, share: f64) -> Result<f64> {
        if rate <= 0.0 {
            return Ok(0.0);
        }
        let threshold = eff.own_gain() / (2f64.powf(rate / share) - 1.0) - noise_at(eff, self.params, d);
        if threshold <= 0.0 {
            return Ok(1.0);
        }
        let disturbance = Disturbance::Interference {
            scale: eff.interference_scale(self.params, d),
            alpha: self.params.alpha,
        };
        let form = eff.quadratic_form(&eff.scaled_mean(0.0));
        Ok(1.0 - success_probability(&form, &disturbance, threshold, &self.cfg)?.value)
    }
}

impl PairOutageModel for OmaPair<'_> {
    fn far(&self, _rate_near: f64, rate_far: f64) -> Result<f64> {
        self.single_user(self.far, self.pair.d_far, rate_far, self.pair.beta_far2())
    }

    fn near(&self, rate_near: f64, _rate_far: f64) -> Result<f64> {
        self.single_user(self.near, self.pair.d_near, rate_near, self.pair.beta_near2)
    }

    fn rate_limits(&self) -> (f64, f64) {
        let near = self.pair.beta_near2
            * rate_limit(self.near.own_gain(), noise_at(self.near, self.params, self.pair.d_near));
        let far = self.pair.beta_far2()
            * rate_limit(self.far.own_gain(), noise_at(self.far, self.params, self.pair.d_far));
        (near.min(RATE_CAP), far.min(RATE_CAP))
    }
}

/// `R_near (1 - p_near) + R_far (1 - p_far)` with clamped outage probabilities.
pub fn conditional_goodput<M: PairOutageModel + ?Sized>(model: &M, rate_near: f64, rate_far: f64) -> Result<f64> {
    let p_near = model.near(rate_near, rate_far)?.clamp(0.0, 1.0);
    let p_far = model.far(rate_near, rate_far)?.clamp(0.0, 1.0);
    Ok(rate_near * (1.0 - p_near) + rate_far * (1.0 - p_far))
}

/// Optimal rates of one pair under the outage constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSolution {
    pub rate_near: f64,
    pub rate_far: f64,
    pub goodput: f64,
    /// Raw outage values at the solution.
    pub outage_near: f64,
    pub outage_far: f64,
    /// Constraint within 1% of `epsilon` at the solution.
    pub binding_near: bool,
    pub binding_far: bool,
    pub feasible: bool,
}

const GRID_POINTS: usize = 40;
const GRID_FLOOR: f64 = 1e-3;
const PATTERN_MIN_STEP: f64 = 1e-7;

struct Evaluated {
    log_near: f64,
    log_far: f64,
    goodput: f64,
    p_near: f64,
    p_far: f64,
}

fn evaluate<M: PairOutageModel + ?Sized>(
    model: &M,
    log_near: f64,
    log_far: f64,
    limits: (f64, f64),
    epsilon: f64,
) -> Result<Option<Evaluated>> {
    let (rn, rf) = (log_near.exp(), log_far.exp());
    if rn >= limits.0 || rf >= limits.1 {
        return Ok(None);
    }
    let p_near = model.near(rn, rf)?;
    let p_far = model.far(rn, rf)?;
    if p_near > epsilon || p_far > epsilon {
        return Ok(None);
    }
    let goodput = rn * (1.0 - p_near.clamp(0.0, 1.0)) + rf * (1.0 - p_far.clamp(0.0, 1.0));
    Ok(Some(Evaluated { log_near, log_far, goodput, p_near, p_far }))
}

/// Maximizes the pair goodput subject to both raw outages staying at most `epsilon`.
///
/// A logarithmic grid locates a start point, then a pattern search with axis and
/// anti-diagonal moves refines it along the constraint boundary.
pub fn maximize_goodput<M: PairOutageModel + ?Sized>(model: &M, epsilon: f64) -> Result<RateSolution> {
    ensure(epsilon > 0.0 && epsilon <= 1.0, "epsilon", format!("must lie in (0, 1], got {epsilon}"))?;
    let limits = model.rate_limits();
    let grid = |limit: f64| -> Vec<f64> {
        let (lo, hi) = ((GRID_FLOOR * limit).ln(), (limit * (1.0 - 1e-9)).ln());
        (0..GRID_POINTS).map(|i| lo + (hi - lo) * i as f64 / (GRID_POINTS - 1) as f64).collect()
    };
    let (gn, gf) = (grid(limits.0), grid(limits.1));
    let mut best: Option<Evaluated> = None;
    for &ln in &gn {
        for &lf in &gf {
            if let Some(e) = evaluate(model, ln, lf, limits, epsilon)? {
                if best.as_ref().is_none_or(|b| e.goodput > b.goodput) {
                    best = Some(e);
                }
            }
        }
    }
    if best.is_none() {
        let tiny = (1e-6f64).ln();
        best = evaluate(model, tiny, tiny, limits, epsilon)?;
    }
    let Some(mut best) = best else {
        return Ok(RateSolution {
            rate_near: 0.0,
            rate_far: 0.0,
            goodput: 0.0,
            outage_near: 0.0,
            outage_far: 0.0,
            binding_near: false,
            binding_far: false,
            feasible: false,
        });
    };
    let mut step = (gn[1] - gn[0]).max(gf[1] - gf[0]);
    let moves = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, -1.0), (-1.0, 1.0)];
    while step > PATTERN_MIN_STEP {
        let mut improved = false;
        for (dn, df) in moves {
            if let Some(e) = evaluate(model, best.log_near + dn * step, best.log_far + df * step, limits, epsilon)? {
                if e.goodput > best.goodput {
                    best = e;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(RateSolution {
        rate_near: best.log_near.exp(),
        rate_far: best.log_far.exp(),
        goodput: best.goodput,
        outage_near: best.p_near,
        outage_far: best.p_far,
        binding_near: best.p_near >= 0.99 * epsilon,
        binding_far: best.p_far >= 0.99 * epsilon,
        feasible: true,
    })
}

/// Reference schemes compared against signal-aligned NOMA.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    OmaPrecoded,
    OmaPlain,
    NomaPlain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    Noma,
    Oma,
}

impl Baseline {
    pub fn access(&self) -> Access {
        match self {
            Baseline::OmaPrecoded | Baseline::OmaPlain => Access::Oma,
            Baseline::NomaPlain => Access::Noma,
        }
    }

    /// Whether the scheme uses the signal-alignment precoder.
    pub fn precoded(&self) -> bool {
        matches!(self, Baseline::OmaPrecoded)
    }
}

/// Maximizes the goodput of one pair under the given access scheme.
pub fn pair_goodput(
    access: Access,
    near: &EffectiveChannel,
    far: &EffectiveChannel,
    pair: &PairConfig,
    params: &NetworkParams,
    cfg: &Inversion1DConfig,
    epsilon: f64,
) -> Result<RateSolution> {
    match access {
        Access::Noma => maximize_goodput(
            &NomaPair { near, far, pair: pair.clone(), params, cfg: *cfg },
            epsilon,
        ),
        Access::Oma => maximize_goodput(
            &OmaPair { near, far, pair: pair.clone(), params, cfg: *cfg },
            epsilon,
        ),
    }
}
