//! The replica-surrogate-matching (RSM) reduction in the idealized model.
//!
//! An agent's report is placed at a random slot among `m - 1` replicas drawn
//! from the prior; `m` surrogates are drawn from the prior as well. Replicas
//! bid for surrogates in a VCG matching market whose weights are exact
//! expected values `w(r, s) = E[v(r, A(s, t_-j))]`, and the agent receives
//! the surrogate matched to its slot together with that slot's payment.
//!
//! The surrogate is selected by slot, not by agent number. The distinguished
//! agent for utilities is agent 1; other positions are handled by rotating
//! the scenario (see [`Scenario::rotate_to_front`]).

use std::collections::HashMap;
use std::sync::OnceLock;

use rand::Rng;

use crate::dist::ExactDist;
use crate::error::Result;
use crate::ratio::{self, Rational};
use crate::scenario::{insert_at, AgentType, Scenario};
use crate::vcg::{self, PaymentRule, WeightMatrix};

/// One realization of the RSM randomness.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Coins {
    pub replicas_rest: Vec<AgentType>,
    pub surrogates: Vec<AgentType>,
    /// 1-based slot of the reporting agent among the replicas.
    pub slot: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SurrogatePayment {
    pub surrogate: AgentType,
    pub payment: Rational,
}

/// Product law `prior^(m-1) x prior^m x uniform(1..=m)`.
pub fn rsmcoins(sc: &Scenario) -> ExactDist<Coins> {
    let replicas = sc.prior.power(sc.m - 1);
    let surrogates = sc.prior.power(sc.m);
    let slots = ExactDist::uniform(1..=sc.m).expect("m >= 1");
    replicas.bind(|rr| {
        surrogates.bind(|ss| {
            slots.map(|&slot| Coins {
                replicas_rest: rr.clone(),
                surrogates: ss.clone(),
                slot,
            })
        })
    })
}

/// Number of coin outcomes: `|supp(prior)|^(2m-1) * m`.
pub fn coin_count(sc: &Scenario) -> u128 {
    let s = sc.prior.len() as u128;
    s.saturating_pow(2 * sc.m as u32 - 1).saturating_mul(sc.m as u128)
}

/// Exact weight table `w(r, s)` for agent `j`, over all types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightTable {
    num_types: usize,
    w: Vec<Rational>,
}

impl WeightTable {
    pub fn compute(sc: &Scenario, j: usize) -> Result<Self> {
        let nt = sc.num_types();
        let rest = sc.prior.power(sc.n - 1);
        let mut w = vec![ratio::zero(); nt * nt];
        for s in (0..nt).map(AgentType) {
            // Outcome law when agent j reports s and the others are prior draws.
            let mut outcome_law: HashMap<usize, Rational> = HashMap::new();
            for (others, p) in rest.entries() {
                let profile = insert_at(others, j, s)?;
                for (o, q) in sc.run_algorithm(&profile)?.entries() {
                    *outcome_law.entry(o.0).or_insert_with(ratio::zero) += p * q;
                }
            }
            for r in (0..nt).map(AgentType) {
                w[r.0 * nt + s.0] = outcome_law.iter().fold(ratio::zero(), |acc, (o, p)| {
                    acc + p * sc.valuation.value(j, r, crate::scenario::Outcome(*o))
                });
            }
        }
        Ok(WeightTable { num_types: nt, w })
    }

    #[inline]
    pub fn get(&self, replica: AgentType, surrogate: AgentType) -> &Rational {
        &self.w[replica.0 * self.num_types + surrogate.0]
    }

    /// Buyer-by-good matrix for the given replicas and surrogates.
    pub fn matrix(&self, replicas: &[AgentType], surrogates: &[AgentType]) -> WeightMatrix {
        WeightMatrix::new(
            replicas
                .iter()
                .map(|&r| surrogates.iter().map(|&s| self.get(r, s).clone()).collect())
                .collect(),
        )
        .expect("replica and surrogate lists have equal length")
    }
}

/// `w(r, s)`: expected value to an agent of true type `r` in position `j`
/// reporting `s` when everyone else is drawn from the prior.
pub fn expwts(sc: &Scenario, j: usize, r: AgentType, s: AgentType) -> Result<Rational> {
    let rest = sc.prior.power(sc.n - 1);
    let mut total = ratio::zero();
    for (others, p) in rest.entries() {
        let profile = insert_at(others, j, s)?;
        total += p * sc.expect_outcome(&profile, |o| sc.valuation.value(j, r, o).clone())?;
    }
    Ok(total)
}

/// Deterministic core of RSM under the given weights and payment rule.
pub fn rsmdet_with(
    weights: &WeightTable,
    rule: PaymentRule,
    coins: &Coins,
    report: AgentType,
) -> Result<SurrogatePayment> {
    let buyers = insert_at(&coins.replicas_rest, coins.slot, report)?;
    if coins.surrogates.len() != buyers.len() {
        return Err(crate::Error::Config(format!(
            "coins carry {} surrogates for {} replicas",
            coins.surrogates.len(),
            buyers.len()
        )));
    }
    let w = weights.matrix(&buyers, &coins.surrogates);
    let res = vcg::matching_with_rule(&w, rule);
    let k = coins.slot - 1;
    Ok(SurrogatePayment {
        surrogate: coins.surrogates[res.alloc[k]],
        payment: res.pays[k].clone(),
    })
}

pub fn rsmdet(sc: &Scenario, j: usize, coins: &Coins, report: AgentType) -> Result<SurrogatePayment> {
    let weights = WeightTable::compute(sc, j)?;
    rsmdet_with(&weights, PaymentRule::Clarke, coins, report)
}

pub fn others(sc: &Scenario, j: usize, t: AgentType) -> Result<ExactDist<AgentType>> {
    Rsm::new(sc.clone()).others(j, t)
}

/// Agent 1's expected utility when the other agents' types pass through
/// `othermoves(k, t)` before reaching the algorithm.
pub fn util<F>(sc: &Scenario, othermoves: F, truety: AgentType, bid: AgentType) -> Result<Rational>
where
    F: Fn(usize, AgentType) -> Result<ExactDist<AgentType>>,
{
    Rsm::new(sc.clone()).util(othermoves, truety, bid)
}

pub fn my_util(sc: &Scenario, truety: AgentType, bid: AgentType) -> Result<Rational> {
    Rsm::new(sc.clone()).my_util(truety, bid)
}

/// Memoizing evaluator for one scenario.
///
/// Weight tables and per-report RSM outcomes over the full coin space are
/// computed at most once per agent position. All caches are write-once, so
/// an `Rsm` can be shared across worker threads.
pub struct Rsm {
    sc: Scenario,
    rule: PaymentRule,
    coins: OnceLock<ExactDist<Coins>>,
    weights: Vec<OnceLock<WeightTable>>,
    /// `[agent][report]` -> outcome per coins entry.
    outcomes: Vec<Vec<OnceLock<Vec<SurrogatePayment>>>>,
}

impl Rsm {
    pub fn new(sc: Scenario) -> Self {
        Self::with_rule(sc, PaymentRule::Clarke)
    }

    /// `rule` replaces the Clarke payments inside the matching market;
    /// anything but [`PaymentRule::Clarke`] is a deliberately broken variant.
    pub fn with_rule(sc: Scenario, rule: PaymentRule) -> Self {
        let nt = sc.num_types();
        let n = sc.n;
        Rsm {
            rule,
            coins: OnceLock::new(),
            weights: (0..n).map(|_| OnceLock::new()).collect(),
            outcomes: (0..n).map(|_| (0..nt).map(|_| OnceLock::new()).collect()).collect(),
            sc,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.sc
    }

    pub fn rule(&self) -> PaymentRule {
        self.rule
    }

    pub fn coins(&self) -> &ExactDist<Coins> {
        self.coins.get_or_init(|| rsmcoins(&self.sc))
    }

    pub fn weights(&self, j: usize) -> Result<&WeightTable> {
        check_agent(&self.sc, j)?;
        if let Some(w) = self.weights[j - 1].get() {
            return Ok(w);
        }
        let w = WeightTable::compute(&self.sc, j)?;
        Ok(self.weights[j - 1].get_or_init(|| w))
    }

    pub fn rsmdet(&self, j: usize, coins: &Coins, report: AgentType) -> Result<SurrogatePayment> {
        rsmdet_with(self.weights(j)?, self.rule, coins, report)
    }

    /// RSM outcome for every entry of [`Rsm::coins`], in entry order.
    pub fn outcomes_for(&self, j: usize, report: AgentType) -> Result<&[SurrogatePayment]> {
        check_agent(&self.sc, j)?;
        let cell = &self.outcomes[j - 1][report.0];
        if let Some(v) = cell.get() {
            return Ok(v);
        }
        let weights = self.weights(j)?;
        let v = self
            .coins()
            .entries()
            .iter()
            .map(|(c, _)| rsmdet_with(weights, self.rule, c, report))
            .collect::<Result<Vec<_>>>()?;
        Ok(cell.get_or_init(|| v))
    }

    /// Surrogate law of agent `j` with input type `t`.
    pub fn others(&self, j: usize, t: AgentType) -> Result<ExactDist<AgentType>> {
        let outs = self.outcomes_for(j, t)?;
        let mut i = 0;
        Ok(self.coins().map(|_| {
            let s = outs[i].surrogate;
            i += 1;
            s
        }))
    }

    pub fn util<F>(&self, othermoves: F, truety: AgentType, bid: AgentType) -> Result<Rational>
    where
        F: Fn(usize, AgentType) -> Result<ExactDist<AgentType>>,
    {
        let sc = &self.sc;
        let mut other_laws = Vec::with_capacity(sc.n - 1);
        for k in 2..=sc.n {
            let mut err = None;
            let law = sc.prior.bind(|t| match othermoves(k, *t) {
                Ok(d) => d,
                Err(e) => {
                    err.get_or_insert(e);
                    ExactDist::point(*t)
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            other_laws.push(law);
        }
        let joint = ExactDist::product(&other_laws);
        // Expected value of the allocation given agent 1 submits `mysur`.
        let mut value_of: Vec<Option<Rational>> = vec![None; sc.num_types()];
        let mut value = |mysur: AgentType| -> Result<Rational> {
            if let Some(v) = &value_of[mysur.0] {
                return Ok(v.clone());
            }
            let mut total = ratio::zero();
            for (othersurs, p) in joint.entries() {
                let profile = insert_at(othersurs, 1, mysur)?;
                total += p * sc.expect_outcome(&profile, |o| sc.valuation.value(1, truety, o).clone())?;
            }
            value_of[mysur.0] = Some(total.clone());
            Ok(total)
        };
        let outs = self.outcomes_for(1, bid)?;
        let mut total = ratio::zero();
        for ((_, p), out) in self.coins().entries().iter().zip(outs) {
            total += p * (value(out.surrogate)? - &out.payment);
        }
        Ok(total)
    }

    pub fn my_util(&self, truety: AgentType, bid: AgentType) -> Result<Rational> {
        self.util(|k, t| self.others(k, t), truety, bid)
    }

    /// Draws one realization of the coins.
    pub fn sample_coins<R: Rng + ?Sized>(&self, rng: &mut R) -> Coins {
        let sampler = self.sc.prior.sampler();
        let m = self.sc.m;
        Coins {
            replicas_rest: (0..m - 1).map(|_| *sampler.sample(rng)).collect(),
            surrogates: (0..m).map(|_| *sampler.sample(rng)).collect(),
            slot: rng.gen_range(1..=m),
        }
    }
}

fn check_agent(sc: &Scenario, j: usize) -> Result<()> {
    if j == 0 || j > sc.n {
        Err(crate::Error::BadSlot { slot: j, len: sc.n })
    } else {
        Ok(())
    }
}
