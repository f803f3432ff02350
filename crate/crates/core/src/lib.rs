//! Exact verification of VCG and the replica-surrogate-matching (RSM)
//! reduction over finite type spaces.

pub mod checker;
pub mod dist;
pub mod document;
pub mod error;
pub mod fixtures;
pub mod ratio;
pub mod rsm;
pub mod scenario;
pub mod vcg;

pub use dist::{dist_equal, ExactDist};
pub use error::{Error, Result};
pub use ratio::Rational;
pub use scenario::{insert_at, remove_at, Algorithm, AgentType, Outcome, Profile, Scenario, Valuation};
