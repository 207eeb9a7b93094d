//! Design analysis for difference-in-difference (DID) cluster randomized trials.
//!
//! The crate computes the variance of the DID interaction estimator under
//! cohort, cross-sectional and mixture designs (loss to follow-up with full,
//! partial or no replacement), turns variances into power and minimum sample
//! sizes, compares designs, and checks every closed form against two
//! independent oracles: an exact covariance-matrix evaluation and a Monte
//! Carlo simulator of the underlying mixed model.
//!
//! ```
//! use didpower_core::{did_variance, DesignKind, FollowUpPattern, TrialDesign, VarianceComponents};
//!
//! let vc = VarianceComponents::new(0.015, 0.035, 0.76, 0.19).unwrap();
//! let design = TrialDesign::balanced(30, 100, FollowUpPattern::full_replacement(0.1, 0.1), DesignKind::FullReplacement);
//! let var = did_variance(&design, &vc).unwrap();
//! assert!((var.total - 0.005_021_333_333).abs() < 1e-12);
//! ```

pub mod compare;
pub mod dist;
mod error;
pub mod model;
pub mod oracle;
pub mod power;
pub mod variance;

pub use compare::{
    preferred_design, re_grid, region_boundary, region_grid, relative_efficiency, DesignRegionPoint, PreferredDesign,
    ReCell, ReComparison, RegionGrid,
};
pub use dist::{t_cdf, t_quantile};
pub use error::{Error, Result};
pub use model::{
    components_from_correlations, correlations_from_components, validate_design, Arm, ArmCounts, CorrelationProfile,
    DesignKind, FollowUpPattern, PowerSpec, Severity, TrialDesign, ValidatedDesign, ValidationIssue,
    VarianceComponents,
};
pub use oracle::{
    build_cluster_covariance, exact_did_variance, monte_carlo_summary, simulate_trial, ClusterCovariance, FixedEffects,
    MonteCarloSummary, SimReplicate, TestStatistic,
};
pub use power::{power, power_curve, required_clusters, required_subjects, PowerPoint, PowerResult};
pub use variance::{
    did_variance, rho_star_full_replacement, rho_star_general, rho_star_no_replacement, VarianceBreakdown,
    VarianceDiagnostics,
};
