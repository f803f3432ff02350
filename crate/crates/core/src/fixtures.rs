//! Scenario families used by the test suites and the bundled corpus.

use crate::dist::ExactDist;
use crate::ratio::{frac, int};
use crate::scenario::{Algorithm, AgentType, Outcome, Scenario, Valuation};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorShape {
    Uniform,
    /// Mass proportional to `1 : 2 : ... : k`; `{1/3, 2/3}` for two types.
    Increasing,
}

impl PriorShape {
    pub fn name(self) -> &'static str {
        match self {
            PriorShape::Uniform => "uniform",
            PriorShape::Increasing => "increasing",
        }
    }

    pub fn dist(self, types: usize) -> ExactDist<AgentType> {
        match self {
            PriorShape::Uniform => ExactDist::uniform((0..types).map(AgentType)).expect("types >= 1"),
            PriorShape::Increasing => {
                let total = (types * (types + 1) / 2) as i64;
                ExactDist::from_weighted((0..types).map(|t| (AgentType(t), frac(t as i64 + 1, total))))
                    .expect("weights sum to one")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AllocationRule {
    WelfareMax,
    /// The item always goes to bidder 1.
    FirstBidder,
}

impl AllocationRule {
    pub fn name(self) -> &'static str {
        match self {
            AllocationRule::WelfareMax => "welfare-max",
            AllocationRule::FirstBidder => "constant",
        }
    }
}

/// Single-item allocation among `n` bidders. Type `v{k}` values winning at
/// `k` and losing at 0; outcome `win{i}` gives the item to bidder `i`.
pub fn single_item(n: usize, m: usize, types: usize, prior: PriorShape, rule: AllocationRule) -> Scenario {
    let tables = (0..n)
        .map(|bidder| {
            (0..types)
                .map(|t| {
                    (0..n)
                        .map(|o| if o == bidder { int(t as i64 + 1) } else { int(0) })
                        .collect()
                })
                .collect()
        })
        .collect();
    let algorithm = match rule {
        AllocationRule::WelfareMax => Algorithm::WelfareMax,
        AllocationRule::FirstBidder => Algorithm::Constant(Outcome(0)),
    };
    Scenario::new(
        n,
        m,
        (1..=types).map(|k| format!("v{k}")).collect(),
        (1..=n).map(|i| format!("win{i}")).collect(),
        prior.dist(types),
        Valuation::PerAgent(tables),
        algorithm,
    )
    .expect("single-item scenario is valid")
}

/// A named member of [`desk_grid`].
#[derive(Debug, Clone)]
pub struct GridScenario {
    pub name: String,
    pub scenario: Scenario,
}

/// Types in {2, 3} x replicas in {1, 2, 3} x agents in {1, 2, 3} x
/// both prior shapes x both allocation rules.
pub fn desk_grid() -> Vec<GridScenario> {
    let mut out = Vec::new();
    for types in [2, 3] {
        for m in 1..=3 {
            for n in 1..=3 {
                for prior in [PriorShape::Uniform, PriorShape::Increasing] {
                    for rule in [AllocationRule::WelfareMax, AllocationRule::FirstBidder] {
                        out.push(GridScenario {
                            name: format!("types={types} m={m} n={n} prior={} alg={}", prior.name(), rule.name()),
                            scenario: single_item(n, m, types, prior, rule),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Single agent, three replicas, three types: the matching has ties that
/// favor the first buyer, so reading only slot 1 after the matching skews
/// the surrogate law away from the prior.
pub fn slot_sensitive() -> Scenario {
    let v = |row: [i64; 2]| row.iter().map(|&x| int(x)).collect::<Vec<_>>();
    Scenario::new(
        1,
        3,
        vec!["a".into(), "b".into(), "c".into()],
        vec!["x".into(), "y".into()],
        PriorShape::Uniform.dist(3),
        Valuation::Shared(vec![v([1, 1]), v([2, 2]), v([1, 0])]),
        Algorithm::Table(vec![Outcome(1), Outcome(0), Outcome(0)]),
    )
    .expect("fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_has_every_combination() {
        let g = desk_grid();
        assert_eq!(g.len(), 2 * 3 * 3 * 2 * 2);
        let names: std::collections::BTreeSet<_> = g.iter().map(|s| s.name.clone()).collect();
        assert_eq!(names.len(), g.len());
    }

    #[test]
    fn increasing_prior_masses() {
        let d = PriorShape::Increasing.dist(2);
        assert_eq!(d.prob(&AgentType(0)), frac(1, 3));
        assert_eq!(d.prob(&AgentType(1)), frac(2, 3));
        let d = PriorShape::Increasing.dist(3);
        assert_eq!(d.prob(&AgentType(2)), frac(1, 2));
    }

    #[test]
    fn welfare_max_gives_item_to_highest_bidder() {
        let sc = single_item(3, 1, 3, PriorShape::Uniform, AllocationRule::WelfareMax);
        let profile = [AgentType(0), AgentType(2), AgentType(2)];
        let o = sc.run_algorithm(&profile).unwrap();
        assert_eq!(o.prob(&Outcome(1)), int(1));
    }
}
