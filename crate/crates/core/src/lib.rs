//! Two-choice greedy online bipartite matching with online correlated
//! selection (OCS).
//!
//! The crate is organised around the pieces of the analysis:
//!
//! - [`instances`]: the bipartite instance model, its JSON document format,
//!   adversarial generators and the offline optimum.
//! - [`matcher`]: two-choice greedy with a pluggable selector, plus exact
//!   expectation engines for independent coins and perfect negative
//!   correlation.
//! - [`ocs`]: the online correlated selection subroutine and the `f_k`
//!   recurrence behind its guarantee.
//! - [`oracle`]: brute-force enumeration of OCS randomness with exact
//!   rational probabilities, dependence graphs and the perfect-correlation
//!   feasibility checker.
//! - [`certify`]: the competitive-ratio LP and online primal-dual
//!   certificates.
//! - [`harness`]: seeded trial runner and CSV/JSON reporting used by the
//!   `ocslab` binary.

pub mod bits;
pub mod certify;
pub mod harness;
pub mod instances;
pub mod matcher;
pub mod ocs;
pub mod oracle;
pub mod rational;
pub mod simplex;

pub use instances::Instance;
pub use matcher::{Level, RoundKind, TieBreak, Trace};
pub use rational::Exact;
