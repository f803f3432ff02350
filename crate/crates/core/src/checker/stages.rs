//! The program-transformation chain behind distribution preservation,
//! generalized from two replicas to any `m`:
//!
//! * stage 1: draw `t` from the prior and run the surrogate procedure on it;
//! * stage 2: the same program unfolded, `t` placed at a uniform slot
//!   among the replicas before the matching;
//! * stage 3: `t` always at slot 1, the slot to read off drawn after the
//!   matching;
//! * stage 4: a uniformly chosen surrogate.
//!
//! Each stage is evaluated exactly (as a distribution) or by sampling, and
//! consecutive stages must agree, ending at the prior.

use std::cell::Cell;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{inputs, CheckReport, Estimate, Witness};
use super::{check_budget, derive_seed, dist_cost, par_map, CheckConfig, Mode};
use crate::dist::ExactDist;
use crate::error::Result;
use crate::ratio::{self, Rational};
use crate::rsm::{Rsm, WeightTable};
use crate::scenario::{insert_at, AgentType, Scenario};
use crate::vcg;

/// Which matched surrogate stage 3 returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stage3Slot {
    /// Slot drawn uniformly after the matching.
    #[default]
    Uniform,
    /// Always slot 1 (the input type's own replica). A deliberately
    /// broken variant used as a negative control.
    First,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageDists {
    pub stages: [ExactDist<AgentType>; 4],
    /// Number of enumerated branches per stage.
    pub branches: [u64; 4],
}

fn matched_surrogate(w: &WeightTable, buyers: &[AgentType], surrogates: &[AgentType], slot: usize) -> AgentType {
    let res = vcg::vcg_matching(&w.matrix(buyers, surrogates));
    surrogates[res.alloc[slot - 1]]
}

/// Exact output laws of the four stage programs for agent `j`.
pub fn stage_distributions(rsm: &Rsm, j: usize, stage3: Stage3Slot) -> Result<StageDists> {
    let sc = rsm.scenario();
    let m = sc.m;
    let prior = &sc.prior;
    let weights = rsm.weights(j)?;
    let replicas = prior.power(m - 1);
    let surrogates = prior.power(m);
    let slots = ExactDist::uniform(1..=m).expect("m >= 1");

    let count = Cell::new(0u64);
    let mut failure = None;
    let stage1 = prior.bind(|t| match rsm.others(j, *t) {
        Ok(d) => {
            count.set(count.get() + rsm.coins().len() as u64);
            d
        }
        Err(e) => {
            failure.get_or_insert(e);
            ExactDist::point(*t)
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let b1 = count.replace(0);

    let stage2 = prior.bind(|ot| {
        replicas.bind(|rr| {
            surrogates.bind(|ss| {
                slots.map(|&i| {
                    count.set(count.get() + 1);
                    let buyers = insert_at(rr, i, *ot).expect("slot in range");
                    matched_surrogate(weights, &buyers, ss, i)
                })
            })
        })
    });
    let b2 = count.replace(0);

    let stage3 = prior.bind(|ot| {
        replicas.bind(|rr| {
            surrogates.bind(|ss| {
                let buyers = insert_at(rr, 1, *ot).expect("slot 1 exists");
                let res = vcg::vcg_matching(&weights.matrix(&buyers, ss));
                slots.map(|&i| {
                    count.set(count.get() + 1);
                    let slot = match stage3 {
                        Stage3Slot::Uniform => i,
                        Stage3Slot::First => 1,
                    };
                    ss[res.alloc[slot - 1]]
                })
            })
        })
    });
    let b3 = count.replace(0);

    let stage4 = surrogates.bind(|ss| {
        slots.map(|&i| {
            count.set(count.get() + 1);
            ss[i - 1]
        })
    });
    let b4 = count.replace(0);

    Ok(StageDists {
        stages: [stage1, stage2, stage3, stage4],
        branches: [b1, b2, b3, b4],
    })
}

const LINKS: [&str; 4] = ["stage1=stage2", "stage2=stage3", "stage3=stage4", "stage4=prior"];

/// Witnesses for the support points where `left` has less mass than `right`.
fn law_gap(sc: &Scenario, j: usize, link: &str, left: &ExactDist<AgentType>, right: &ExactDist<AgentType>) -> Vec<Witness> {
    let mut points: Vec<AgentType> = left.support().chain(right.support()).copied().collect();
    points.sort();
    points.dedup();
    points
        .into_iter()
        .filter_map(|x| {
            let (l, r) = (left.prob(&x), right.prob(&x));
            (l < r).then(|| {
                Witness::new(
                    inputs!("agent" => j, "link" => link, "type" => sc.type_label(x)),
                    l,
                    r,
                )
            })
        })
        .collect()
}

pub fn check_stage_chain(sc: &Scenario, cfg: &CheckConfig) -> Result<CheckReport> {
    check_stage_chain_with(sc, cfg, Stage3Slot::Uniform)
}

pub fn check_stage_chain_with(sc: &Scenario, cfg: &CheckConfig, stage3: Stage3Slot) -> Result<CheckReport> {
    cfg.validate()?;
    let start = Instant::now();
    let rsm = Rsm::new(sc.clone());
    let agents: Vec<usize> = (1..=sc.n).collect();
    let mut report = match cfg.mode {
        Mode::Exact => {
            check_budget(dist_cost(sc), cfg)?;
            let per_agent = par_map(cfg, &agents, |&j| -> Result<(u64, Vec<Witness>)> {
                let d = stage_distributions(&rsm, j, stage3)?;
                let s = &d.stages;
                let pairs = [(&s[0], &s[1]), (&s[1], &s[2]), (&s[2], &s[3]), (&s[3], &sc.prior)];
                let witnesses = pairs
                    .iter()
                    .zip(LINKS)
                    .flat_map(|((l, r), link)| law_gap(sc, j, link, l, r))
                    .collect();
                Ok((d.branches.iter().sum(), witnesses))
            });
            let mut instances = 0;
            let mut witnesses = Vec::new();
            for r in per_agent {
                let (n, mut w) = r?;
                instances += n;
                witnesses.append(&mut w);
            }
            CheckReport::exact("stage-chain", instances, witnesses)
        }
        Mode::MonteCarlo => sampled_chain(&rsm, cfg, stage3)?,
    };
    report.stats.elapsed = start.elapsed();
    Ok(report)
}

/// Distribution-free total-variation tolerance for an empirical histogram
/// of `n` draws over `k` points at failure probability `delta`.
pub(crate) fn tv_tolerance(k: usize, n: u64, delta: f64) -> f64 {
    let n = n as f64;
    0.5 * (k as f64 / n).sqrt() + ((1.0 / delta).ln() / (2.0 * n)).sqrt()
}

/// Upper rational bound of a non-negative float, denominator `10^9`.
pub(crate) fn ceil_rational(x: f64) -> Rational {
    let scaled = (x * 1e9).ceil();
    ratio::frac(scaled as i64, 1_000_000_000)
}

/// Exact total variation between a histogram and a distribution.
pub(crate) fn empirical_tv(counts: &[u64], total: u64, law: &ExactDist<AgentType>) -> Rational {
    let mut sum = ratio::zero();
    for (t, c) in counts.iter().enumerate() {
        let p_hat = ratio::frac(*c as i64, total as i64);
        let d = p_hat - law.prob(&AgentType(t));
        sum += if d < ratio::zero() { -d } else { d };
    }
    sum / ratio::int(2)
}

fn sampled_chain(rsm: &Rsm, cfg: &CheckConfig, stage3: Stage3Slot) -> Result<CheckReport> {
    let sc = rsm.scenario();
    let m = sc.m;
    let nt = sc.num_types();
    let delta = (1.0 - cfg.confidence) / (4 * sc.n) as f64;
    let tol = ceil_rational(tv_tolerance(sc.prior.len(), cfg.samples, delta));
    let tasks: Vec<(usize, usize)> = (1..=sc.n).flat_map(|j| (0..4).map(move |s| (j, s))).collect();
    let results = par_map(cfg, &tasks, |&(j, stage)| -> Result<(Rational, Witness)> {
        let weights = rsm.weights(j)?;
        let prior = sc.prior.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, (j * 4 + stage) as u64));
        let mut counts = vec![0u64; nt];
        for _ in 0..cfg.samples {
            let ot = *prior.sample(&mut rng);
            let rr: Vec<AgentType> = (0..m - 1).map(|_| *prior.sample(&mut rng)).collect();
            let ss: Vec<AgentType> = (0..m).map(|_| *prior.sample(&mut rng)).collect();
            let i = rng.gen_range(1..=m);
            let out = match stage {
                0 => {
                    let coins = crate::rsm::Coins {
                        replicas_rest: rr,
                        surrogates: ss,
                        slot: i,
                    };
                    rsm.rsmdet(j, &coins, ot)?.surrogate
                }
                1 => matched_surrogate(weights, &insert_at(&rr, i, ot)?, &ss, i),
                2 => {
                    let slot = if stage3 == Stage3Slot::First { 1 } else { i };
                    matched_surrogate(weights, &insert_at(&rr, 1, ot)?, &ss, slot)
                }
                _ => ss[i - 1],
            };
            counts[out.0] += 1;
        }
        let tv = empirical_tv(&counts, cfg.samples, &sc.prior);
        let w = Witness::new(
            inputs!("agent" => j, "stage" => stage + 1, "statistic" => "tv-to-prior"),
            tol.clone(),
            tv.clone(),
        );
        Ok((tv, w))
    });
    let mut estimates = Vec::new();
    let mut witnesses = Vec::new();
    for r in results {
        let (tv, w) = r?;
        estimates.push(Estimate {
            inputs: w.inputs.clone(),
            value: tv,
            radius: tol.clone(),
        });
        if w.margin < ratio::zero() {
            witnesses.push(w);
        }
    }
    let mut report = CheckReport::exact("stage-chain", tasks.len() as u64 * cfg.samples, witnesses);
    if report.witnesses.is_empty() {
        report.verdict = super::Verdict::Estimated;
    }
    report.stats.samples = Some(cfg.samples);
    report.stats.estimates = estimates;
    Ok(report)
}
