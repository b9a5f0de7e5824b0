//! A pinned channel realization: estimates, linear design and pair settings
//! for every pair served by the tagged BS.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::design::{build_plain_design, build_precoder, LinearDesign};
use crate::error::{ensure, Result};
use crate::geometry::default_ranks;
use crate::linalg::CMatrix;
use crate::model::{exponential_covariance, sample_channel_estimate, ChannelEstimate, NetworkParams, PairConfig};
use crate::outage::{effective_channel, EffectiveChannel};

/// Default interferer window radius in metres.
pub const DEFAULT_WINDOW: f64 = 5000.0;

/// Which interferers each user sees in simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterfererExclusion {
    /// Every BS of the PPP other than the serving one.
    None,
    /// BSs closer to the user than its serving BS are dropped.
    ServingDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Signal alignment with zero forcing across pairs.
    Aligned,
    /// First `K` transmit antennas, matched-filter receivers.
    Plain,
}

/// Recipe for a realization; `Realization::draw` is deterministic in it.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub seed: u64,
    /// Exponential correlation coefficient, shared by both ends.
    pub kappa: f64,
    /// Linear K factor applied to every user.
    pub k_factor: f64,
    pub design: DesignKind,
}

impl Realization {
    /// Channel estimates `(near, far)` of all pairs. Depends only on `seed`.
    pub fn channels(&self, params: &NetworkParams) -> (Vec<CMatrix>, Vec<CMatrix>) {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (n, m, k) = (params.rx_antennas, params.tx_antennas, params.pairs);
        let near = (0..k).map(|_| sample_channel_estimate(n, m, &mut rng)).collect();
        let far = (0..k).map(|_| sample_channel_estimate(n, m, &mut rng)).collect();
        (near, far)
    }

    pub fn draw(&self, params: &NetworkParams, pair: &PairConfig) -> Result<Scenario> {
        params.validate()?;
        let (h_near, h_far) = self.channels(params);
        let design = match self.design {
            DesignKind::Aligned => build_precoder(&h_near, &h_far, params)?,
            DesignKind::Plain => build_plain_design(&h_near, &h_far, params)?,
        };
        let r_t = exponential_covariance(params.tx_antennas, self.kappa)?;
        let r_r = exponential_covariance(params.rx_antennas, self.kappa)?;
        let est = |h: &CMatrix| ChannelEstimate::with_k_factor(h.clone(), r_t.clone(), r_r.clone(), self.k_factor);
        let pairs = (0..params.pairs)
            .map(|k| {
                let (rank_near, rank_far) = default_ranks(k, params.pairs);
                PairConfig { rank_near, rank_far, ..pair.clone() }
            })
            .collect();
        Ok(Scenario {
            params: params.clone(),
            pairs,
            near: h_near.iter().map(est).collect::<Result<_>>()?,
            far: h_far.iter().map(est).collect::<Result<_>>()?,
            design,
            window_radius: DEFAULT_WINDOW,
            exclusion: InterfererExclusion::None,
        })
    }
}

/// Everything needed to evaluate or simulate the pairs served by one BS.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub params: NetworkParams,
    pub pairs: Vec<PairConfig>,
    pub near: Vec<ChannelEstimate>,
    pub far: Vec<ChannelEstimate>,
    pub design: LinearDesign,
    pub window_radius: f64,
    pub exclusion: InterfererExclusion,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        let k = self.params.pairs;
        ensure(
            self.pairs.len() == k && self.near.len() == k && self.far.len() == k,
            "pairs",
            format!("expected {k} pair configurations and channel estimates"),
        )?;
        ensure(self.design.pairs() == k, "design", "precoder width must equal the pair count")?;
        ensure(self.window_radius > 0.0, "window_radius", "must be positive")?;
        for p in &self.pairs {
            p.validate(k)?;
        }
        Ok(())
    }

    /// Effective channels `(near, far)` of pair `index`.
    pub fn effective_channels(&self, index: usize) -> Result<(EffectiveChannel, EffectiveChannel)> {
        ensure(index < self.params.pairs, "index", "pair index out of range")?;
        let d = &self.design;
        Ok((
            effective_channel(&self.near[index], &d.v, &d.near_filters[index], index, &self.params)?,
            effective_channel(&self.far[index], &d.v, &d.far_filters[index], index, &self.params)?,
        ))
    }

    /// Same realization with every pair's rates replaced.
    pub fn with_rates(&self, rate_near: f64, rate_far: f64) -> Self {
        Self {
            pairs: self.pairs.iter().map(|p| p.with_rates(rate_near, rate_far)).collect(),
            ..self.clone()
        }
    }

    /// Same realization with a different error variance for every user.
    pub fn with_sigma_h2(&self, sigma_h2: f64) -> Result<Self> {
        Ok(Self {
            near: self.near.iter().map(|e| e.with_sigma_h2(sigma_h2)).collect::<Result<_>>()?,
            far: self.far.iter().map(|e| e.with_sigma_h2(sigma_h2)).collect::<Result<_>>()?,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::channel_k_factor;

    fn table_pair() -> PairConfig {
        PairConfig { beta_near2: 0.3, rate_near: 1.0, rate_far: 0.5, d_near: 50.0, d_far: 125.0, rank_near: 1, rank_far: 4 }
    }

    #[test]
    fn estimates_depend_only_on_seed() {
        let params = NetworkParams::reference();
        let a = Realization { seed: 9, kappa: 0.9, k_factor: 100.0, design: DesignKind::Aligned };
        let b = Realization { kappa: 0.0, k_factor: 1.0, ..a.clone() };
        let (sa, sb) = (a.draw(&params, &table_pair()).unwrap(), b.draw(&params, &table_pair()).unwrap());
        assert_eq!(sa.near[1].h_hat(), sb.near[1].h_hat());
        assert_eq!(sa.design.v, sb.design.v);
        assert!((channel_k_factor(&sa.far[0]) - 100.0).abs() < 1e-9);
        assert!((sa.near[0].sigma_h2() - 0.01).abs() < 1e-12);
        assert_eq!(sa.pairs[1].rank_near, 2);
        assert_eq!(sa.pairs[1].rank_far, 3);
        sa.validate().unwrap();
    }

    #[test]
    fn effective_channels_see_their_stream() {
        let params = NetworkParams::reference();
        let s = Realization { seed: 2, kappa: 0.9, k_factor: 100.0, design: DesignKind::Aligned }
            .draw(&params, &table_pair())
            .unwrap();
        let (near, far) = s.effective_channels(1).unwrap();
        assert_eq!(near.stream, 1);
        assert!(near.mu[0].norm() < 1e-10 && far.mu[0].norm() < 1e-10);
        assert!(s.effective_channels(2).is_err());
    }
}
