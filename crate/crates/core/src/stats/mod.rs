//! Oracles and statistical tests linking finite-`N` simulations to their
//! limits.

pub mod collapse;
pub mod ensemble;
pub mod ks;
pub mod oracle;
pub mod regression;

pub use collapse::{collapse_test, CollapseTestSpec, CollapseVerdict};
pub use ensemble::{mean_and_variance, run_ensemble, SampleSummary};
pub use ks::{distributional_convergence_test, kolmogorov_q, ks_one_sample, ks_two_sample, KsLadderReport, KsResult};
pub use oracle::{exact_gibbs_oracle, simulate_cw_per_spin, ExactOracleResult, MAX_ORACLE_SPINS};
pub use regression::{slope_regression, SlopeReport};
