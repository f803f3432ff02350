//! Vickrey-Clarke-Groves mechanisms.
//!
//! [`vcg_general`] picks a welfare-maximizing outcome from an explicit range and
//! charges Clarke pivot payments. [`vcg_matching`] is the assignment-market
//! specialization: buyers are matched one-to-one with goods, and buyer `j`
//! pays the welfare the other buyers lose because `j` is present.
//!
//! Ties are always broken toward the first maximizer in a fixed order
//! (position in the range, or lexicographic permutation order), which does
//! not depend on any bidder's report.
//!
//! Buyer and good positions are 0-based in this module.


use crate::error::{Error, Result};
use crate::ratio::{self, Rational};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VcgOutcome<O> {
    pub outcome: O,
    /// Position of `outcome` in the range.
    pub index: usize,
    pub prices: Vec<Rational>,
}

/// How the winner of a general VCG instance is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PaymentRule {
    /// Clarke pivot payments (VCG).
    #[default]
    Clarke,
    /// Each bidder pays its own reported value for the chosen outcome.
    /// Not truthful; used as a negative control.
    FirstPrice,
}

impl PaymentRule {
    pub fn name(self) -> &'static str {
        match self {
            PaymentRule::Clarke => "vcg",
            PaymentRule::FirstPrice => "first-price",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "vcg" | "clarke" => Some(PaymentRule::Clarke),
            "first-price" => Some(PaymentRule::FirstPrice),
            _ => None,
        }
    }
}

/// First position maximizing `objective` over `0..len`.
fn find_max<F: Fn(usize) -> Rational>(len: usize, objective: F) -> (usize, Rational) {
    let mut best = 0;
    let mut best_val = objective(0);
    for o in 1..len {
        let v = objective(o);
        if v > best_val {
            best = o;
            best_val = v;
        }
    }
    (best, best_val)
}

/// VCG over an arbitrary finite outcome range.
pub fn vcg_general<O, F>(values: &[F], range: &[O]) -> Result<VcgOutcome<O>>
where
    O: Clone,
    F: Fn(&O) -> Rational,
{
    let table: Vec<Vec<Rational>> = values
        .iter()
        .map(|v| range.iter().map(v).collect())
        .collect();
    let res = vcg_table(&table, range.len(), PaymentRule::Clarke)?;
    Ok(VcgOutcome {
        outcome: range[res.index].clone(),
        index: res.index,
        prices: res.prices,
    })
}

/// VCG where `values[j][o]` is bidder `j`'s value for the `o`-th outcome of
/// a range of length `range_len`.
pub fn vcg_table(
    values: &[Vec<Rational>],
    range_len: usize,
    rule: PaymentRule,
) -> Result<VcgOutcome<usize>> {
    if range_len == 0 {
        return Err(Error::EmptyRange);
    }
    let welfare_without = |skip: Option<usize>, o: usize| -> Rational {
        values
            .iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .fold(ratio::zero(), |acc, (_, v)| acc + &v[o])
    };
    let (outcome, _) = find_max(range_len, |o| welfare_without(None, o));
    let prices = (0..values.len())
        .map(|j| match rule {
            PaymentRule::Clarke => {
                let (_, best_without) = find_max(range_len, |o| welfare_without(Some(j), o));
                best_without - welfare_without(Some(j), outcome)
            }
            PaymentRule::FirstPrice => values[j][outcome].clone(),
        })
        .collect();
    Ok(VcgOutcome {
        outcome,
        index: outcome,
        prices,
    })
}

/// Square buyer-by-good value matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct WeightMatrix {
    rows: Vec<Vec<Rational>>,
}

impl WeightMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let m = rows.len();
        if let Some((row, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != m) {
            return Err(Error::NonSquare {
                rows: m,
                row: row + 1,
                cols: r.len(),
            });
        }
        Ok(WeightMatrix { rows })
    }

    pub fn from_ints(rows: &[&[i64]]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.iter().map(|&x| ratio::int(x)).collect())
                .collect(),
        )
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<Rational>] {
        &self.rows
    }

    #[inline]
    pub fn get(&self, buyer: usize, good: usize) -> &Rational {
        &self.rows[buyer][good]
    }

    pub fn with_row(&self, buyer: usize, row: Vec<Rational>) -> WeightMatrix {
        let mut rows = self.rows.clone();
        rows[buyer] = row;
        WeightMatrix { rows }
    }

    /// Total weight of an assignment.
    pub fn weight_of(&self, alloc: &[usize]) -> Rational {
        alloc
            .iter()
            .enumerate()
            .fold(ratio::zero(), |acc, (b, &g)| acc + &self.rows[b][g])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MatchingResult {
    /// `alloc[j]` is the good assigned to buyer `j`.
    pub alloc: Vec<usize>,
    pub pays: Vec<Rational>,
}

/// True iff `alloc` is a bijection on `0..alloc.len()`.
pub fn is_permutation(alloc: &[usize]) -> bool {
    let mut seen = vec![false; alloc.len()];
    for &g in alloc {
        if g >= alloc.len() || seen[g] {
            return false;
        }
        seen[g] = true;
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Solver {
    /// Enumerate permutations in lexicographic order.
    BruteForce,
    /// Dynamic program over subsets of assigned goods.
    Subset,
    /// Hungarian algorithm followed by a lexicographic repair pass.
    Hungarian,
    /// Subset program up to [`SUBSET_LIMIT`] buyers, Hungarian above.
    Auto,
}

pub const SUBSET_LIMIT: usize = 12;

/// Lexicographically smallest maximum-weight perfect matching, by
/// depth-first enumeration of permutations.
pub fn brute_force_matching(w: &WeightMatrix) -> (Vec<usize>, Rational) {
    struct Search<'a> {
        w: &'a WeightMatrix,
        used: Vec<bool>,
        current: Vec<usize>,
        best: Option<(Vec<usize>, Rational)>,
    }
    impl Search<'_> {
        fn go(&mut self, buyer: usize, acc: Rational) {
            let m = self.w.size();
            if buyer == m {
                let better = match &self.best {
                    None => true,
                    Some((_, b)) => acc > *b,
                };
                if better {
                    self.best = Some((self.current.clone(), acc));
                }
                return;
            }
            for g in 0..m {
                if !self.used[g] {
                    self.used[g] = true;
                    self.current.push(g);
                    let next = &acc + self.w.get(buyer, g);
                    self.go(buyer + 1, next);
                    self.current.pop();
                    self.used[g] = false;
                }
            }
        }
    }
    let mut s = Search {
        w,
        used: vec![false; w.size()],
        current: Vec::with_capacity(w.size()),
        best: None,
    };
    s.go(0, ratio::zero());
    s.best.unwrap_or((Vec::new(), ratio::zero()))
}

/// `best[mask]`: optimum weight for buyers `popcount(mask)..m` over the goods
/// not in `mask`.
fn subset_table(w: &WeightMatrix) -> Vec<Rational> {
    let m = w.size();
    let full = (1usize << m) - 1;
    let mut best = vec![ratio::zero(); 1 << m];
    for mask in (0..full).rev() {
        let buyer = mask.count_ones() as usize;
        best[mask] = (0..m)
            .filter(|g| mask & (1 << g) == 0)
            .map(|g| w.get(buyer, g) + &best[mask | (1 << g)])
            .max()
            .expect("a free good remains");
    }
    best
}

/// Lexicographically smallest maximum-weight perfect matching by dynamic
/// programming over subsets, `O(2^m m)`.
pub fn subset_matching(w: &WeightMatrix) -> (Vec<usize>, Rational) {
    let m = w.size();
    let best = subset_table(w);
    let mut mask = 0usize;
    let mut alloc = Vec::with_capacity(m);
    for buyer in 0..m {
        let g = (0..m)
            .find(|&g| mask & (1 << g) == 0 && w.get(buyer, g) + &best[mask | (1 << g)] == best[mask])
            .expect("some good attains the optimum");
        alloc.push(g);
        mask |= 1 << g;
    }
    (alloc, best[0].clone())
}

/// Maximum-weight perfect matching of a sub-matrix given by buyer and good
/// index lists (equal length), via the O(k^3) Hungarian method on negated
/// weights. Returns positions into `goods` per buyer and the optimum.
fn hungarian_on(w: &WeightMatrix, buyers: &[usize], goods: &[usize]) -> (Vec<usize>, Rational) {
    let k = buyers.len();
    if k == 0 {
        return (Vec::new(), ratio::zero());
    }
    let cost = |i: usize, j: usize| -> Rational { -w.get(buyers[i - 1], goods[j - 1]).clone() };
    let mut u = vec![ratio::zero(); k + 1];
    let mut v = vec![ratio::zero(); k + 1];
    // p[j]: row matched to column j (1-based, 0 = none).
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv: Vec<Option<Rational>> = vec![None; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta: Option<Rational> = None;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0, j) - &u[i0] - &v[j];
                if minv[j].as_ref().map_or(true, |m| cur < *m) {
                    minv[j] = Some(cur);
                    way[j] = j0;
                }
                let mj = minv[j].as_ref().unwrap();
                if delta.as_ref().map_or(true, |d| mj < d) {
                    delta = Some(mj.clone());
                    j1 = j;
                }
            }
            let delta = delta.expect("an unused column remains");
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += &delta;
                    v[j] -= &delta;
                } else if let Some(m) = minv[j].as_mut() {
                    *m -= &delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut alloc = vec![0; k];
    for j in 1..=k {
        alloc[p[j] - 1] = j - 1;
    }
    let total = alloc
        .iter()
        .enumerate()
        .fold(ratio::zero(), |acc, (b, &g)| acc + w.get(buyers[b], goods[g]));
    (alloc, total)
}

/// Optimal matching weight via the Hungarian method (no tie canonicalization).
pub fn hungarian_weight(w: &WeightMatrix) -> Rational {
    let all: Vec<usize> = (0..w.size()).collect();
    hungarian_on(w, &all, &all).1
}

/// Hungarian optimum, then the lexicographically smallest optimal
/// assignment: each buyer in turn takes the smallest good that still admits
/// a completion reaching the optimum.
pub fn hungarian_matching(w: &WeightMatrix) -> (Vec<usize>, Rational) {
    let m = w.size();
    let optimum = hungarian_weight(w);
    let mut remaining = optimum.clone();
    let mut free: Vec<usize> = (0..m).collect();
    let mut alloc = Vec::with_capacity(m);
    for buyer in 0..m {
        let rest_buyers: Vec<usize> = (buyer + 1..m).collect();
        let pick = free
            .iter()
            .position(|&g| {
                let rest_goods: Vec<usize> = free.iter().copied().filter(|&h| h != g).collect();
                let (_, sub) = hungarian_on(w, &rest_buyers, &rest_goods);
                w.get(buyer, g) + sub == remaining
            })
            .expect("some good extends an optimal matching");
        let g = free.remove(pick);
        remaining -= w.get(buyer, g);
        alloc.push(g);
    }
    (alloc, optimum)
}

pub fn max_weight_matching(w: &WeightMatrix, solver: Solver) -> (Vec<usize>, Rational) {
    match resolve(solver, w.size()) {
        Solver::BruteForce => brute_force_matching(w),
        Solver::Subset => subset_matching(w),
        _ => hungarian_matching(w),
    }
}

fn resolve(solver: Solver, m: usize) -> Solver {
    match solver {
        Solver::Auto if m <= SUBSET_LIMIT => Solver::Subset,
        Solver::Auto => Solver::Hungarian,
        s => s,
    }
}

fn optimum_weight(w: &WeightMatrix, solver: Solver) -> Rational {
    match resolve(solver, w.size()) {
        Solver::BruteForce => brute_force_matching(w).1,
        Solver::Subset => subset_table(w).swap_remove(0),
        _ => hungarian_weight(w),
    }
}

/// VCG on a matching market: maximum-weight perfect matching (lexicographic
/// tie-break) with Clarke payments.
pub fn vcg_matching(w: &WeightMatrix) -> MatchingResult {
    vcg_matching_with(w, Solver::Auto)
}

pub fn vcg_matching_with(w: &WeightMatrix, solver: Solver) -> MatchingResult {
    let (alloc, total) = max_weight_matching(w, solver);
    let m = w.size();
    let pays = (0..m)
        .map(|j| {
            // Buyer j absent: a zero row leaves every good equally free, so
            // the optimum equals the best matching of the others into m goods.
            let without = w.with_row(j, vec![ratio::zero(); m]);
            let best_without = optimum_weight(&without, solver);
            let others_at_chosen = &total - w.get(j, alloc[j]);
            best_without - others_at_chosen
        })
        .collect();
    MatchingResult { alloc, pays }
}

/// Matching market payments under `rule`. First-price charges each buyer its
/// own weight for the good it receives.
pub fn matching_with_rule(w: &WeightMatrix, rule: PaymentRule) -> MatchingResult {
    match rule {
        PaymentRule::Clarke => vcg_matching(w),
        PaymentRule::FirstPrice => {
            let (alloc, _) = max_weight_matching(w, Solver::Auto);
            let pays = alloc
                .iter()
                .enumerate()
                .map(|(b, &g)| w.get(b, g).clone())
                .collect();
            MatchingResult { alloc, pays }
        }
    }
}

/// Utility of buyer `j` with true row `truth` under `result`.
pub fn buyer_utility(truth: &[Rational], result: &MatchingResult, j: usize) -> Rational {
    &truth[result.alloc[j]] - &result.pays[j]
}
