//! Independent verification routes for the closed-form variances: the exact
//! covariance-matrix evaluation of `Var(β̂₃)` and a Monte Carlo simulator of
//! the mixed model with completely-at-random loss and replacement.

mod check;
mod covariance;
mod sim;

pub use check::{equivalence_report, random_configuration, EquivalenceReport, EquivalenceRow};
pub use covariance::{arm_cell_moments, build_cluster_covariance, exact_did_variance, CellMoments, ClusterCovariance};
pub use sim::{
    monte_carlo_replicates, monte_carlo_summary, replicate_seed, simulate_trial, summarize_replicates, CellMeans,
    FixedEffects, MonteCarloSummary, SimReplicate, TestStatistic,
};
