//! Exact finite probability distributions.
//!
//! An [`ExactDist`] is kept in canonical form: entries sorted by value,
//! duplicates merged, zero masses dropped, masses summing to exactly one.
//! Structural equality is therefore distribution equality.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactDist<X> {
    entries: Vec<(X, Rational)>,
}

impl<X: Ord + Clone> ExactDist<X> {
    pub fn point(x: X) -> Self {
        ExactDist {
            entries: vec![(x, ratio::one())],
        }
    }

    /// Each distinct value gets mass proportional to its multiplicity.
    pub fn uniform<I: IntoIterator<Item = X>>(xs: I) -> Result<Self> {
        let mut counts: BTreeMap<X, u64> = BTreeMap::new();
        let mut total = 0u64;
        for x in xs {
            *counts.entry(x).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::EmptySupport);
        }
        let entries = counts
            .into_iter()
            .map(|(x, c)| (x, ratio::frac(c as i64, total as i64)))
            .collect();
        Ok(ExactDist { entries })
    }

    /// Builds a distribution from explicit masses, rejecting negative masses
    /// and totals other than one.
    pub fn from_weighted<I: IntoIterator<Item = (X, Rational)>>(entries: I) -> Result<Self> {
        let mut total = ratio::zero();
        let mut acc: BTreeMap<X, Rational> = BTreeMap::new();
        for (x, p) in entries {
            if p.is_negative() {
                return Err(Error::BadMass(ratio::format(&p)));
            }
            total += &p;
            *acc.entry(x).or_insert_with(ratio::zero) += p;
        }
        if !total.is_one() {
            if acc.is_empty() || total.is_zero() {
                return Err(Error::EmptySupport);
            }
            return Err(Error::BadMass(ratio::format(&total)));
        }
        Ok(Self::from_map(acc))
    }

    /// Normalizes a map whose masses are already known to sum to one.
    fn from_map(acc: BTreeMap<X, Rational>) -> Self {
        let entries = acc.into_iter().filter(|(_, p)| !p.is_zero()).collect();
        ExactDist { entries }
    }

    /// Law of total probability: `P(y) = sum_x d(x) k(x)(y)`.
    pub fn bind<Y: Ord + Clone, F>(&self, mut k: F) -> ExactDist<Y>
    where
        F: FnMut(&X) -> ExactDist<Y>,
    {
        let mut acc: BTreeMap<Y, Rational> = BTreeMap::new();
        for (x, px) in &self.entries {
            let inner = k(x);
            for (y, py) in inner.entries {
                *acc.entry(y).or_insert_with(ratio::zero) += px * py;
            }
        }
        ExactDist::from_map(acc)
    }

    /// Push-forward through a deterministic function.
    pub fn map<Y: Ord + Clone, F>(&self, mut f: F) -> ExactDist<Y>
    where
        F: FnMut(&X) -> Y,
    {
        let mut acc: BTreeMap<Y, Rational> = BTreeMap::new();
        for (x, px) in &self.entries {
            *acc.entry(f(x)).or_insert_with(ratio::zero) += px;
        }
        ExactDist::from_map(acc)
    }

    /// Joint law of independent draws, in list order.
    pub fn product(ds: &[ExactDist<X>]) -> ExactDist<Vec<X>> {
        let mut acc: Vec<(Vec<X>, Rational)> = vec![(Vec::new(), ratio::one())];
        for d in ds {
            let mut next = Vec::with_capacity(acc.len() * d.len());
            for (prefix, p) in &acc {
                for (x, q) in &d.entries {
                    let mut tuple = Vec::with_capacity(prefix.len() + 1);
                    tuple.extend_from_slice(prefix);
                    tuple.push(x.clone());
                    next.push((tuple, p * q));
                }
            }
            acc = next;
        }
        // Lexicographic extension of sorted factors is already sorted and distinct.
        ExactDist { entries: acc }
    }

    /// `n` independent draws from `self`.
    pub fn power(&self, n: usize) -> ExactDist<Vec<X>> {
        ExactDist::product(&vec![self.clone(); n])
    }

    pub fn expectation<F>(&self, mut f: F) -> Rational
    where
        F: FnMut(&X) -> Rational,
    {
        self.entries
            .iter()
            .fold(ratio::zero(), |acc, (x, p)| acc + p * f(x))
    }

    pub fn prob(&self, x: &X) -> Rational {
        match self.entries.binary_search_by(|(y, _)| y.cmp(x)) {
            Ok(i) => self.entries[i].1.clone(),
            Err(_) => ratio::zero(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &X {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (x, p) in &self.entries {
            acc += ratio::to_f64(p);
            if u < acc {
                return x;
            }
        }
        &self.entries[self.entries.len() - 1].0
    }

    /// Precomputes cumulative masses for repeated sampling.
    pub fn sampler(&self) -> Sampler<'_, X> {
        let mut acc = 0.0;
        let cumulative = self
            .entries
            .iter()
            .map(|(_, p)| {
                acc += ratio::to_f64(p);
                acc
            })
            .collect();
        Sampler {
            dist: self,
            cumulative,
        }
    }
}

impl<X> ExactDist<X> {
    pub fn entries(&self) -> &[(X, Rational)] {
        &self.entries
    }

    pub fn support(&self) -> impl Iterator<Item = &X> {
        self.entries.iter().map(|(x, _)| x)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Semantic equality of two distributions.
pub fn dist_equal<X: PartialEq>(a: &ExactDist<X>, b: &ExactDist<X>) -> bool {
    a.entries == b.entries
}

pub struct Sampler<'a, X> {
    dist: &'a ExactDist<X>,
    cumulative: Vec<f64>,
}

impl<X> Sampler<'_, X> {
    pub fn sample_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &X {
        &self.dist.entries[self.sample_index(rng)].0
    }
}

/// Serializable view of a distribution with string-keyed support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistRecord(pub BTreeMap<String, String>);

impl<X: std::fmt::Display> From<&ExactDist<X>> for DistRecord {
    fn from(d: &ExactDist<X>) -> Self {
        DistRecord(
            d.entries
                .iter()
                .map(|(x, p)| (x.to_string(), ratio::format(p)))
                .collect(),
        )
    }
}
