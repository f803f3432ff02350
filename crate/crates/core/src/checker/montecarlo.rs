use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::stages::ceil_rational;
use super::CheckConfig;
use crate::dist::Sampler;
use crate::error::Result;
use crate::ratio::{self, Rational};
use crate::rsm::{coin_count, Coins, Rsm};
use crate::scenario::{AgentType, Scenario};
use crate::vcg::PaymentRule;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UtilityEstimate {
    pub estimate: Rational,
    /// Two-sided Hoeffding radius, rounded up.
    pub radius: Rational,
    pub samples: u64,
}

/// Two-sided Hoeffding radius for the mean of `n` samples with range `range`.
pub fn hoeffding_radius(range: f64, n: u64, confidence: f64) -> f64 {
    let delta = 1.0 - confidence;
    range * ((2.0 / delta).ln() / (2.0 * n as f64)).sqrt()
}

/// Coin spaces up to this many entries per (agent, report) are tabulated
/// once instead of running the matching for every sample.
const DENSE_COINS: u128 = 1 << 16;

/// Sampled version of agent 1's RSM utility.
///
/// Each sample draws fresh coins for agent 1 and, for every other agent, a
/// type from the prior and its own coins. The allocation's randomness and
/// the weight tables stay exact; only coins and the other agents' types are
/// sampled. The estimate is an exact sample mean.
pub struct UtilityEstimator {
    rsm: Rsm,
    support: Vec<AgentType>,
    dense: bool,
    /// `[true type][profile index]`: expected value of the allocation.
    values: Vec<Vec<OnceLock<Rational>>>,
}

impl UtilityEstimator {
    pub fn new(sc: Scenario) -> Self {
        Self::with_rule(sc, PaymentRule::Clarke)
    }

    pub fn with_rule(sc: Scenario, rule: PaymentRule) -> Self {
        let support = sc.prior.support().copied().collect();
        let dense = coin_count(&sc) <= DENSE_COINS;
        let profiles = sc.profile_count();
        let values = (0..sc.num_types())
            .map(|_| (0..profiles).map(|_| OnceLock::new()).collect())
            .collect();
        UtilityEstimator {
            rsm: Rsm::with_rule(sc, rule),
            support,
            dense,
            values,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        self.rsm.scenario()
    }

    /// Range of one utility sample: values lie in `[lo, hi]` and payments
    /// in an interval of the same width.
    pub fn range(&self) -> f64 {
        let (lo, hi) = self.scenario().valuation.min_max();
        2.0 * ratio::to_f64(&(hi - lo))
    }

    /// One coin realization as support positions plus the 1-based slot.
    fn draw<R: Rng>(&self, prior: &Sampler<'_, AgentType>, rng: &mut R, positions: &mut Vec<usize>) -> usize {
        let m = self.scenario().m;
        positions.clear();
        positions.extend((0..2 * m - 1).map(|_| prior.sample_index(rng)));
        rng.gen_range(1..=m)
    }

    /// Position of a realization in [`Rsm::coins`] entry order.
    fn coin_index(&self, positions: &[usize], slot: usize) -> usize {
        let s = self.support.len();
        positions.iter().fold(0, |acc, &p| acc * s + p) * self.scenario().m + slot - 1
    }

    fn coins(&self, positions: &[usize], slot: usize) -> Coins {
        let m = self.scenario().m;
        let at = |p: &usize| self.support[*p];
        Coins {
            replicas_rest: positions[..m - 1].iter().map(at).collect(),
            surrogates: positions[m - 1..].iter().map(at).collect(),
            slot,
        }
    }

    pub fn estimate(
        &self,
        truety: AgentType,
        bid: AgentType,
        samples: u64,
        seed: u64,
        confidence: f64,
    ) -> Result<UtilityEstimate> {
        let sc = self.scenario();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prior = sc.prior.sampler();
        let base = sc.num_types();
        let mut profile_hits = vec![0u64; sc.profile_count()];
        let mut coin_hits = vec![0u64; if self.dense { self.rsm.coins().len() } else { 0 }];
        let mut paid = ratio::zero();
        let mut positions = Vec::with_capacity(2 * sc.m);
        for _ in 0..samples {
            let slot = self.draw(&prior, &mut rng, &mut positions);
            let mine = if self.dense {
                let i = self.coin_index(&positions, slot);
                coin_hits[i] += 1;
                self.rsm.outcomes_for(1, bid)?[i].surrogate
            } else {
                let out = self.rsm.rsmdet(1, &self.coins(&positions, slot), bid)?;
                paid += out.payment;
                out.surrogate
            };
            let mut index = mine.0;
            for k in 2..=sc.n {
                let t = *prior.sample(&mut rng);
                let slot = self.draw(&prior, &mut rng, &mut positions);
                let s = if self.dense {
                    self.rsm.outcomes_for(k, t)?[self.coin_index(&positions, slot)].surrogate
                } else {
                    self.rsm.rsmdet(k, &self.coins(&positions, slot), t)?.surrogate
                };
                index = index * base + s.0;
            }
            profile_hits[index] += 1;
        }
        if self.dense {
            let outs = self.rsm.outcomes_for(1, bid)?;
            for (hits, out) in coin_hits.iter().zip(outs) {
                if *hits > 0 {
                    paid += &out.payment * ratio::int(*hits as i64);
                }
            }
        }
        let mut total = -paid;
        for (i, hits) in profile_hits.iter().enumerate().filter(|(_, h)| **h > 0) {
            total += self.value(truety, i)? * ratio::int(*hits as i64);
        }
        let radius = hoeffding_radius(self.range(), samples, confidence);
        Ok(UtilityEstimate {
            estimate: total / ratio::int(samples as i64),
            radius: ceil_rational(radius),
            samples,
        })
    }

    fn value(&self, truety: AgentType, index: usize) -> Result<Rational> {
        let cell = &self.values[truety.0][index];
        if let Some(v) = cell.get() {
            return Ok(v.clone());
        }
        let sc = self.scenario();
        let profile = sc.profile_at(index);
        let v = sc.expect_outcome(&profile.0, |o| sc.valuation.value(1, truety, o).clone())?;
        Ok(cell.get_or_init(|| v).clone())
    }
}

/// One-off estimate of agent 1's utility with [`CheckConfig`] sampling
/// parameters.
pub fn estimate_utility(
    sc: &Scenario,
    truety: AgentType,
    bid: AgentType,
    cfg: &CheckConfig,
) -> Result<UtilityEstimate> {
    cfg.validate()?;
    UtilityEstimator::new(sc.clone()).estimate(truety, bid, cfg.samples, cfg.seed, cfg.confidence)
}
