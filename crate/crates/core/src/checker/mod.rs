//! Property checks that stand in for formal proofs: every universally
//! quantified inequality or distribution identity is evaluated on every
//! element of a finite domain, with exact arithmetic.
//!
//! A passing exact check certifies the property for the supplied scenario or
//! grid only, not for all priors and type spaces.

mod montecarlo;
mod report;
mod rsm_checks;
mod stages;
mod vcg_checks;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rsm::coin_count;
use crate::scenario::Scenario;

pub use montecarlo::{estimate_utility, hoeffding_radius, UtilityEstimate, UtilityEstimator};
pub use report::{CheckReport, Estimate, Stats, Verdict, Witness, MAX_WITNESSES};
pub use rsm_checks::{bic_margins, check_bic, check_bic_with, check_dist_preservation, BicMargin};
pub use stages::{check_stage_chain, check_stage_chain_with, stage_distributions, Stage3Slot, StageDists};
pub use vcg_checks::{
    check_vcg_perm, check_vcg_perm_with, check_vcg_truth, random_matrices, GeneralGrid, MatchingGrid,
    TruthGrid,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckConfig {
    pub mode: Mode,
    /// Samples per estimate in Monte Carlo mode.
    pub samples: u64,
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub jobs: usize,
    /// Maximum number of distribution entries exact mode may materialize.
    pub budget: u128,
    /// Two-sided confidence level for Monte Carlo radii.
    pub confidence: f64,
}

pub const DEFAULT_BUDGET: u128 = 10_000_000;

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            mode: Mode::Exact,
            samples: 100_000,
            seed: 0,
            jobs: 1,
            budget: DEFAULT_BUDGET,
            confidence: 0.99,
        }
    }
}

impl CheckConfig {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn monte_carlo(samples: u64, seed: u64) -> Self {
        CheckConfig {
            mode: Mode::MonteCarlo,
            samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mode == Mode::MonteCarlo && self.samples == 0 {
            return Err(Error::Config("samples must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::Config("confidence must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Order-preserving map over `items` on `cfg.jobs` workers.
pub(crate) fn par_map<T, R, F>(cfg: &CheckConfig, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    if cfg.jobs <= 1 || items.len() <= 1 {
        return items.iter().map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(&f).collect()),
        Err(_) => items.iter().map(f).collect(),
    }
}

/// Entries materialized by one surrogate-law computation per agent and
/// input type: `|supp|^(2m-1) * m * |T|^(n-1)`.
pub fn dist_cost(sc: &Scenario) -> u128 {
    let others = (sc.num_types() as u128).saturating_pow(sc.n as u32 - 1);
    coin_count(sc).saturating_mul(others)
}

/// BIC additionally evaluates every (type, bid) pair for every position.
pub fn bic_cost(sc: &Scenario) -> u128 {
    dist_cost(sc)
        .saturating_mul(sc.n as u128)
        .saturating_mul(sc.prior.len() as u128)
}

pub fn check_budget(needed: u128, cfg: &CheckConfig) -> Result<()> {
    if needed > cfg.budget {
        Err(Error::BudgetExceeded {
            needed,
            budget: cfg.budget,
        })
    } else {
        Ok(())
    }
}

/// Deterministic per-task seed derivation (SplitMix64 finalizer).
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
