//! The scenario data model: finite type and outcome spaces, the common prior,
//! valuations and the allocation algorithm.
//!
//! Types and outcomes are interned indices; labels are kept only for display.
//! Agent positions and slots are 1-based everywhere in the public API.

use std::fmt;

use crate::dist::ExactDist;
use crate::error::{Error, Result};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentType(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Outcome(pub usize);

impl fmt::Display for AgentType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "o{}", self.0)
    }
}

/// A type profile, one entry per agent.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Profile(pub Vec<AgentType>);

impl Profile {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Type of the agent in 1-based `slot`.
    pub fn get(&self, slot: usize) -> Result<AgentType> {
        check_slot(slot, self.0.len())?;
        Ok(self.0[slot - 1])
    }
}

fn check_slot(slot: usize, len: usize) -> Result<()> {
    if slot == 0 || slot > len {
        Err(Error::BadSlot { slot, len })
    } else {
        Ok(())
    }
}

/// `(x, rest)` with `x` placed in 1-based `slot`.
pub fn insert_at<T: Clone>(rest: &[T], slot: usize, x: T) -> Result<Vec<T>> {
    check_slot(slot, rest.len() + 1)?;
    let mut out = Vec::with_capacity(rest.len() + 1);
    out.extend_from_slice(&rest[..slot - 1]);
    out.push(x);
    out.extend_from_slice(&rest[slot - 1..]);
    Ok(out)
}

/// The profile with 1-based `slot` removed.
pub fn remove_at<T: Clone>(profile: &[T], slot: usize) -> Result<Vec<T>> {
    check_slot(slot, profile.len())?;
    let mut out = profile.to_vec();
    out.remove(slot - 1);
    Ok(out)
}

/// Valuation `v(t, o)`, either common to all agents or one table per agent.
///
/// Per-agent tables express allocation problems where an outcome means
/// something different to each agent (for example "agent 2 gets the item").
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Valuation {
    Shared(Vec<Vec<Rational>>),
    PerAgent(Vec<Vec<Vec<Rational>>>),
}

impl Valuation {
    /// Value to the agent in 1-based position `agent`.
    #[inline]
    pub fn value(&self, agent: usize, t: AgentType, o: Outcome) -> &Rational {
        match self {
            Valuation::Shared(table) => &table[t.0][o.0],
            Valuation::PerAgent(tables) => &tables[agent - 1][t.0][o.0],
        }
    }

    pub fn min_max(&self) -> (Rational, Rational) {
        let tables: Vec<&Vec<Vec<Rational>>> = match self {
            Valuation::Shared(t) => vec![t],
            Valuation::PerAgent(ts) => ts.iter().collect(),
        };
        let mut it = tables.into_iter().flatten().flatten();
        let first = it.next().cloned().unwrap_or_else(ratio::zero);
        it.fold((first.clone(), first), |(lo, hi), v| {
            (lo.min(v.clone()), hi.max(v.clone()))
        })
    }

    pub fn scaled(&self, factor: &Rational) -> Valuation {
        let scale = |t: &Vec<Vec<Rational>>| -> Vec<Vec<Rational>> {
            t.iter()
                .map(|row| row.iter().map(|v| v * factor).collect())
                .collect()
        };
        match self {
            Valuation::Shared(t) => Valuation::Shared(scale(t)),
            Valuation::PerAgent(ts) => Valuation::PerAgent(ts.iter().map(scale).collect()),
        }
    }
}

/// The allocation algorithm `A : T^n -> O`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Algorithm {
    /// Dense table over profiles; see [`Scenario::profile_index`].
    Table(Vec<Outcome>),
    /// Dense table of outcome distributions.
    Randomized(Vec<ExactDist<Outcome>>),
    /// Argmax of total value, ties to the smallest outcome id.
    WelfareMax,
    Constant(Outcome),
}

impl Algorithm {
    pub fn kind(&self) -> &'static str {
        match self {
            Algorithm::Table(_) => "table",
            Algorithm::Randomized(_) => "randomized-table",
            Algorithm::WelfareMax => "welfare-max",
            Algorithm::Constant(_) => "constant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub n: usize,
    pub m: usize,
    pub types: Vec<String>,
    pub outcomes: Vec<String>,
    pub prior: ExactDist<AgentType>,
    pub valuation: Valuation,
    pub algorithm: Algorithm,
}

impl Scenario {
    pub fn new(
        n: usize,
        m: usize,
        types: Vec<String>,
        outcomes: Vec<String>,
        prior: ExactDist<AgentType>,
        valuation: Valuation,
        algorithm: Algorithm,
    ) -> Result<Self> {
        let sc = Scenario {
            n,
            m,
            types,
            outcomes,
            prior,
            valuation,
            algorithm,
        };
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::validation("agents", "must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::validation("replicas", "must be at least 1"));
        }
        if self.types.is_empty() {
            return Err(Error::validation("types", "type space is empty"));
        }
        if self.outcomes.is_empty() {
            return Err(Error::validation("outcomes", "outcome space is empty"));
        }
        let nt = self.types.len();
        let no = self.outcomes.len();
        if let Some(t) = self.prior.support().find(|t| t.0 >= nt) {
            return Err(Error::validation("prior", format!("unknown type {t}")));
        }
        let check_table = |key: &str, table: &Vec<Vec<Rational>>| -> Result<()> {
            if table.len() != nt || table.iter().any(|row| row.len() != no) {
                return Err(Error::validation(
                    key,
                    format!("expected a {nt} x {no} table"),
                ));
            }
            Ok(())
        };
        match &self.valuation {
            Valuation::Shared(t) => check_table("valuation", t)?,
            Valuation::PerAgent(ts) => {
                if ts.len() != self.n {
                    return Err(Error::validation(
                        "valuation",
                        format!("expected {} per-agent tables, got {}", self.n, ts.len()),
                    ));
                }
                for (i, t) in ts.iter().enumerate() {
                    check_table(&format!("valuation.per_agent[{i}]"), t)?;
                }
            }
        }
        let rows = self.profile_count();
        let outcome_ok = |o: &Outcome| o.0 < no;
        match &self.algorithm {
            Algorithm::Table(tab) => {
                if tab.len() != rows {
                    return Err(Error::validation(
                        "algorithm.rows",
                        format!("expected {rows} rows, got {}", tab.len()),
                    ));
                }
                if let Some(o) = tab.iter().find(|o| !outcome_ok(o)) {
                    return Err(Error::validation("algorithm.rows", format!("unknown outcome {o}")));
                }
            }
            Algorithm::Randomized(tab) => {
                if tab.len() != rows {
                    return Err(Error::validation(
                        "algorithm.rows",
                        format!("expected {rows} rows, got {}", tab.len()),
                    ));
                }
                if tab.iter().any(|d| d.support().any(|o| !outcome_ok(o))) {
                    return Err(Error::validation("algorithm.rows", "unknown outcome"));
                }
            }
            Algorithm::Constant(o) => {
                if !outcome_ok(o) {
                    return Err(Error::validation("algorithm.params.outcome", "unknown outcome"));
                }
            }
            Algorithm::WelfareMax => {}
        }
        Ok(())
    }

    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn profile_count(&self) -> usize {
        self.num_types().pow(self.n as u32)
    }

    /// Mixed-radix index of a profile, slot 1 most significant.
    pub fn profile_index(&self, profile: &[AgentType]) -> usize {
        let base = self.num_types();
        profile.iter().fold(0, |acc, t| acc * base + t.0)
    }

    pub fn profile_at(&self, mut index: usize) -> Profile {
        let base = self.num_types();
        let mut out = vec![AgentType(0); self.n];
        for slot in out.iter_mut().rev() {
            *slot = AgentType(index % base);
            index /= base;
        }
        Profile(out)
    }

    pub fn profiles(&self) -> impl Iterator<Item = Profile> + '_ {
        (0..self.profile_count()).map(|i| self.profile_at(i))
    }

    pub fn type_by_label(&self, label: &str) -> Option<AgentType> {
        self.types.iter().position(|l| l == label).map(AgentType)
    }

    pub fn outcome_by_label(&self, label: &str) -> Option<Outcome> {
        self.outcomes.iter().position(|l| l == label).map(Outcome)
    }

    pub fn type_label(&self, t: AgentType) -> &str {
        &self.types[t.0]
    }

    pub fn outcome_label(&self, o: Outcome) -> &str {
        &self.outcomes[o.0]
    }

    pub fn welfare(&self, profile: &[AgentType], o: Outcome) -> Rational {
        profile
            .iter()
            .enumerate()
            .fold(ratio::zero(), |acc, (i, t)| acc + self.valuation.value(i + 1, *t, o))
    }

    fn welfare_argmax(&self, profile: &[AgentType]) -> Outcome {
        let mut best = Outcome(0);
        let mut best_w = self.welfare(profile, best);
        for o in (1..self.outcomes.len()).map(Outcome) {
            let w = self.welfare(profile, o);
            if w > best_w {
                best = o;
                best_w = w;
            }
        }
        best
    }

    fn check_profile(&self, profile: &[AgentType]) -> Result<()> {
        if profile.len() != self.n || profile.iter().any(|t| t.0 >= self.num_types()) {
            let labels: Vec<String> = profile.iter().map(|t| t.to_string()).collect();
            return Err(Error::IncompleteAlgorithm(labels.join(",")));
        }
        Ok(())
    }

    /// Outcome law of the algorithm on `profile`.
    pub fn run_algorithm(&self, profile: &[AgentType]) -> Result<ExactDist<Outcome>> {
        self.check_profile(profile)?;
        Ok(match &self.algorithm {
            Algorithm::Table(tab) => ExactDist::point(tab[self.profile_index(profile)]),
            Algorithm::Randomized(tab) => tab[self.profile_index(profile)].clone(),
            Algorithm::WelfareMax => ExactDist::point(self.welfare_argmax(profile)),
            Algorithm::Constant(o) => ExactDist::point(*o),
        })
    }

    /// `E[f(A(profile))]`, avoiding a distribution allocation for
    /// deterministic algorithms.
    pub fn expect_outcome<F>(&self, profile: &[AgentType], mut f: F) -> Result<Rational>
    where
        F: FnMut(Outcome) -> Rational,
    {
        self.check_profile(profile)?;
        Ok(match &self.algorithm {
            Algorithm::Table(tab) => f(tab[self.profile_index(profile)]),
            Algorithm::Randomized(tab) => tab[self.profile_index(profile)].expectation(|o| f(*o)),
            Algorithm::WelfareMax => f(self.welfare_argmax(profile)),
            Algorithm::Constant(o) => f(*o),
        })
    }

    /// Reorders agents: new agent `k` (1-based) is old agent `order[k-1]`.
    /// The permuted algorithm satisfies `A'(x) = A(y)` with
    /// `y[order[k]] = x[k]`, and per-agent valuations move with their agent.
    pub fn permute_agents(&self, order: &[usize]) -> Result<Scenario> {
        let n = self.n;
        let mut seen = vec![false; n];
        for &o in order {
            check_slot(o, n)?;
            seen[o - 1] = true;
        }
        if order.len() != n || seen.iter().any(|s| !s) {
            return Err(Error::Config(format!("{order:?} is not a permutation of 1..={n}")));
        }
        let to_original = |x: &[AgentType]| -> Vec<AgentType> {
            let mut y = vec![AgentType(0); n];
            for (k, &o) in order.iter().enumerate() {
                y[o - 1] = x[k];
            }
            y
        };
        let algorithm = match &self.algorithm {
            Algorithm::Table(_) | Algorithm::Randomized(_) => {
                let mut det = Vec::new();
                let mut rnd = Vec::new();
                for x in self.profiles() {
                    let y = to_original(&x.0);
                    match &self.algorithm {
                        Algorithm::Table(tab) => det.push(tab[self.profile_index(&y)]),
                        Algorithm::Randomized(tab) => rnd.push(tab[self.profile_index(&y)].clone()),
                        _ => unreachable!(),
                    }
                }
                if matches!(self.algorithm, Algorithm::Table(_)) {
                    Algorithm::Table(det)
                } else {
                    Algorithm::Randomized(rnd)
                }
            }
            other => other.clone(),
        };
        let valuation = match &self.valuation {
            Valuation::Shared(t) => Valuation::Shared(t.clone()),
            Valuation::PerAgent(ts) => {
                Valuation::PerAgent(order.iter().map(|&o| ts[o - 1].clone()).collect())
            }
        };
        Ok(Scenario {
            algorithm,
            valuation,
            ..self.clone()
        })
    }

    /// Moves agent `j` to slot 1, keeping the others in their original order.
    pub fn rotate_to_front(&self, j: usize) -> Result<Scenario> {
        check_slot(j, self.n)?;
        self.permute_agents(&rotation_order(self.n, j))
    }
}

/// `[j, 1, .., j-1, j+1, .., n]`.
pub fn rotation_order(n: usize, j: usize) -> Vec<usize> {
    std::iter::once(j)
        .chain((1..=n).filter(|&k| k != j))
        .collect()
}

/// Inverse of a 1-based agent order.
pub fn inverse_order(order: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; order.len()];
    for (k, &o) in order.iter().enumerate() {
        inv[o - 1] = k + 1;
    }
    inv
}
