//! Experiment configuration. Powers are given in dBm and K factors in dB here
//! and converted to linear units once, when a sweep point is built.

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use mimo_noma::laplace::{Inversion1DConfig, Inversion2DConfig};
use mimo_noma::model::{db_to_linear, dbm_to_watts, NetworkParams, PairConfig};
use mimo_noma::scenario::{DesignKind, InterfererExclusion, Realization, DEFAULT_WINDOW};

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Prefix of the output files.
    pub name: String,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub pair: PairSection,
    #[serde(default)]
    pub channel: ChannelSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub inversion: InversionSection,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub lambda_b: f64,
    pub lambda_u: f64,
    pub alpha: f64,
    pub tx_power_dbm: f64,
    pub interferer_power_dbm: f64,
    pub noise_power_dbm: f64,
    /// Drops the receiver noise entirely.
    pub noiseless: bool,
    pub tx_antennas: usize,
    pub rx_antennas: usize,
    pub pairs: usize,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            lambda_b: 1e-5,
            lambda_u: 2e-4,
            alpha: 3.5,
            tx_power_dbm: 20.0,
            interferer_power_dbm: 15.0,
            noise_power_dbm: -99.0,
            noiseless: false,
            tx_antennas: 3,
            rx_antennas: 2,
            pairs: 2,
        }
    }
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PairSection {
    /// Pair whose outage is reported.
    pub index: usize,
    pub beta_near2: f64,
    pub rate_far: f64,
    /// `R_near = rate_ratio * R_far`.
    pub rate_ratio: f64,
    pub d_near: f64,
    pub d_far: f64,
}

impl Default for PairSection {
    fn default() -> Self {
        Self {
            index: 0,
            beta_near2: 0.3,
            rate_far: 0.5,
            rate_ratio: 2.0,
            d_near: 50.0,
            d_far: 125.0,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum DesignSetting {
    Aligned,
    Plain,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelSection {
    /// Seed of the channel-estimate realization.
    pub seed: u64,
    pub kappa: f64,
    pub k_factor_db: f64,
    pub design: DesignSetting,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            seed: 7,
            kappa: 0.9,
            k_factor_db: 20.0,
            design: DesignSetting::Aligned,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    RateFar,
    KFactorDb,
    LambdaB,
    Kappa,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Exact,
    Approx,
    Mc,
    Asymptotic,
    Optimize,
    OmaPrecoded,
    OmaPlain,
    NomaPlain,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Exact => "exact",
            Method::Approx => "approx",
            Method::Mc => "mc",
            Method::Asymptotic => "asymptotic",
            Method::Optimize => "optimize",
            Method::OmaPrecoded => "oma-precoded",
            Method::OmaPlain => "oma-plain",
            Method::NomaPlain => "noma-plain",
        }
    }

    pub fn is_analytic(&self) -> bool {
        matches!(self, Method::Exact | Method::Approx | Method::Asymptotic)
    }

    pub fn is_optimization(&self) -> bool {
        matches!(self, Method::Optimize | Method::OmaPrecoded | Method::OmaPlain | Method::NomaPlain)
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Conditional,
    Random,
    Distance,
}

impl Mode {
    pub fn name(&self) -> &'static str {
        match self {
            Mode::Conditional => "conditional",
            Mode::Random => "random",
            Mode::Distance => "distance",
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionSetting {
    None,
    Serving,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub methods: Vec<Method>,
    pub modes: Vec<Mode>,
    pub trials: usize,
    /// Monte Carlo master seed.
    pub seed: u64,
    /// Outage constraint of the goodput optimization.
    pub epsilon: f64,
    pub exclusion: ExclusionSetting,
    pub window: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            methods: vec![Method::Exact, Method::Approx],
            modes: vec![Mode::Conditional],
            trials: 100_000,
            seed: 1,
            epsilon: 1e-2,
            exclusion: ExclusionSetting::None,
            window: DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum OneDPreset {
    /// Euler summation with the textbook parameters.
    Euler,
    /// Wynn-accelerated tail; robust on steep distribution functions.
    Steep,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSection {
    pub one_d: OneDPreset,
    /// Overrides the discretization parameter `A` of the 1D kernel.
    pub a: Option<f64>,
    pub two_d_terms: usize,
    pub two_d_depth: usize,
    pub two_d_error: f64,
}

impl Default for InversionSection {
    fn default() -> Self {
        let d = Inversion2DConfig::default();
        Self {
            one_d: OneDPreset::Steep,
            a: None,
            two_d_terms: d.terms,
            two_d_depth: d.epsilon_depth,
            two_d_error: d.discretization_error,
        }
    }
}

impl InversionSection {
    pub fn one_d(&self) -> Inversion1DConfig {
        let base = match self.one_d {
            OneDPreset::Euler => Inversion1DConfig::default(),
            OneDPreset::Steep => Inversion1DConfig::steep(),
        };
        Inversion1DConfig { a: self.a.unwrap_or(base.a), ..base }
    }

    pub fn two_d(&self) -> Inversion2DConfig {
        Inversion2DConfig {
            terms: self.two_d_terms,
            epsilon_depth: self.two_d_depth,
            discretization_error: self.two_d_error,
            ..Inversion2DConfig::default()
        }
    }
}

/// Everything that varies along the sweep, in linear units.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub params: NetworkParams,
    pub pair: PairConfig,
    pub realization: Realization,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid experiment configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let values = &self.sweep.values;
        if values.is_empty() {
            bail!("sweep.values: grid is empty");
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            bail!("sweep.values: {v} is not finite");
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            bail!("sweep.values: grid must be strictly increasing");
        }
        let (lo, hi) = (values[0], values[values.len() - 1]);
        match self.sweep.axis {
            SweepAxis::RateFar if lo <= 0.0 => bail!("sweep.values: rates must be positive"),
            SweepAxis::LambdaB if lo < 0.0 => bail!("sweep.values: lambda_b must be nonnegative"),
            SweepAxis::Kappa if lo < 0.0 || hi >= 1.0 => bail!("sweep.values: kappa must lie in [0, 1)"),
            _ => {}
        }
        if self.run.methods.is_empty() {
            bail!("run.methods: at least one method is required");
        }
        if self.run.modes.is_empty() {
            bail!("run.modes: at least one mode is required");
        }
        if self.run.trials == 0 {
            bail!("run.trials: must be at least 1");
        }
        if !(self.run.epsilon > 0.0 && self.run.epsilon <= 1.0) {
            bail!("run.epsilon: must lie in (0, 1]");
        }
        if !(self.run.window > 0.0) {
            bail!("run.window: must be positive");
        }
        if self.pair.index >= self.network.pairs {
            bail!("pair.index: {} is out of range for {} pairs", self.pair.index, self.network.pairs);
        }
        if self.pair.rate_ratio <= 0.0 {
            bail!("pair.rate_ratio: must be positive");
        }
        for v in values {
            let p = self.point(*v);
            p.params.validate().with_context(|| format!("sweep value {v}"))?;
            p.pair.validate(p.params.pairs).with_context(|| format!("sweep value {v}"))?;
        }
        Ok(())
    }

    pub fn exclusion(&self) -> InterfererExclusion {
        match self.run.exclusion {
            ExclusionSetting::None => InterfererExclusion::None,
            ExclusionSetting::Serving => InterfererExclusion::ServingDistance,
        }
    }

    pub fn point(&self, value: f64) -> SweepPoint {
        let n = &self.network;
        let mut params = NetworkParams {
            lambda_b: n.lambda_b,
            lambda_u: n.lambda_u,
            alpha: n.alpha,
            tx_power: dbm_to_watts(n.tx_power_dbm),
            interferer_power: dbm_to_watts(n.interferer_power_dbm),
            noise_power: if n.noiseless { 0.0 } else { dbm_to_watts(n.noise_power_dbm) },
            tx_antennas: n.tx_antennas,
            rx_antennas: n.rx_antennas,
            pairs: n.pairs,
            ..NetworkParams::reference()
        };
        let p = &self.pair;
        let mut rate_far = p.rate_far;
        let c = &self.channel;
        let mut realization = Realization {
            seed: c.seed,
            kappa: c.kappa,
            k_factor: db_to_linear(c.k_factor_db),
            design: match c.design {
                DesignSetting::Aligned => DesignKind::Aligned,
                DesignSetting::Plain => DesignKind::Plain,
            },
        };
        match self.sweep.axis {
            SweepAxis::RateFar => rate_far = value,
            SweepAxis::KFactorDb => realization.k_factor = db_to_linear(value),
            SweepAxis::LambdaB => params.lambda_b = value,
            SweepAxis::Kappa => realization.kappa = value,
        }
        let (rank_near, rank_far) = mimo_noma::geometry::default_ranks(p.index, n.pairs);
        let pair = PairConfig {
            beta_near2: p.beta_near2,
            rate_near: p.rate_ratio * rate_far,
            rate_far,
            d_near: p.d_near,
            d_far: p.d_far,
            rank_near,
            rank_far,
        };
        SweepPoint { value, params, pair, realization }
    }
}
