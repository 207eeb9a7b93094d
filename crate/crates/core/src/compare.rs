//! Relative efficiency of DID designs and the reduced-cohort versus
//! loss-without-replacement classifier.
//!
//! With follow-up rates `f1 <= f2` (the arm with the smaller follow-up rate
//! first), the reduced cohort at size `K f1` has the smaller variance exactly
//! when
//!
//! ```text
//! f1 > f2 (3 - 4ρ_S) / (f2 (2 - 4ρ_S) + 1)
//! ```
//!
//! The classifier evaluates the cross-multiplied form
//! `f1 (f2 (2 - 4ρ_S) + 1) - f2 (3 - 4ρ_S)`, whose sign is the same wherever
//! the denominator is positive and which stays meaningful for `ρ_S >= 0.75`.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{DesignKind, FollowUpPattern, TrialDesign, VarianceComponents};
use crate::variance::did_variance;

pub fn relative_efficiency(numerator: &TrialDesign, denominator: &TrialDesign, vc: &VarianceComponents) -> Result<f64> {
    Ok(did_variance(numerator, vc)?.total / did_variance(denominator, vc)?.total)
}

/// Which variance ratio a relative-efficiency grid holds. The first design
/// named is the numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReComparison {
    /// Full replacement over the cohort without loss.
    RepVsCohort,
    /// No replacement over the cohort without loss.
    NorepVsCohort,
    /// No replacement over full replacement.
    NorepVsRep,
}

impl ReComparison {
    pub const ALL: [ReComparison; 3] = [
        ReComparison::RepVsCohort,
        ReComparison::NorepVsCohort,
        ReComparison::NorepVsRep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReComparison::RepVsCohort => "rep-vs-cohort",
            ReComparison::NorepVsCohort => "norep-vs-cohort",
            ReComparison::NorepVsRep => "norep-vs-rep",
        }
    }

    fn kinds(self) -> (DesignKind, DesignKind) {
        match self {
            ReComparison::RepVsCohort => (DesignKind::FullReplacement, DesignKind::CohortNoLtf),
            ReComparison::NorepVsCohort => (DesignKind::NoReplacement, DesignKind::CohortNoLtf),
            ReComparison::NorepVsRep => (DesignKind::NoReplacement, DesignKind::FullReplacement),
        }
    }
}

impl std::str::FromStr for ReComparison {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ReComparison::ALL.into_iter().find(|c| c.as_str() == s).ok_or_else(|| {
            format!("unknown comparison `{s}` (expected rep-vs-cohort, norep-vs-cohort or norep-vs-rep)")
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReCell {
    pub lambda1: f64,
    pub lambda2: f64,
    pub rho_s: f64,
    pub value: f64,
}

/// `0, step, 2 step, ...` up to and including `max` (within rounding).
pub fn lattice(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step + 1e-9).floor() as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Relative efficiency over every `(lambda1, lambda2)` pair from `lambdas`,
/// with clusters and cluster size taken from `base`. Rows are ordered with
/// `lambda1` outermost.
pub fn re_grid(
    comparison: ReComparison,
    vc: &VarianceComponents,
    base: &TrialDesign,
    lambdas: &[f64],
) -> Result<Vec<ReCell>> {
    let (num_kind, den_kind) = comparison.kinds();
    let rho_s = vc.rho_s();
    let mut out = Vec::with_capacity(lambdas.len() * lambdas.len());
    for &lambda1 in lambdas {
        for &lambda2 in lambdas {
            let losses = TrialDesign {
                pattern: FollowUpPattern::no_replacement(lambda1, lambda2),
                ..*base
            };
            let value = relative_efficiency(&losses.with_kind(num_kind), &losses.with_kind(den_kind), vc)?;
            out.push(ReCell {
                lambda1,
                lambda2,
                rho_s,
                value,
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreferredDesign {
    ReducedCohort,
    LtfNoReplacement,
    Tie,
}

impl PreferredDesign {
    pub fn as_str(self) -> &'static str {
        match self {
            PreferredDesign::ReducedCohort => "reduced-cohort",
            PreferredDesign::LtfNoReplacement => "ltf-no-replacement",
            PreferredDesign::Tie => "tie",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignRegionPoint {
    /// Follow-up rate of the arm that keeps fewer subjects.
    pub f1: f64,
    /// Follow-up rate of the other arm; always `>= f1`.
    pub f2: f64,
    pub rho_s: f64,
    pub preferred: PreferredDesign,
    /// `f1` value at which both designs have equal variance, for this `f2`.
    pub threshold: f64,
}

/// Classifies a pair of follow-up rates. Requires `0 < f <= 1` and
/// `0 <= rho_s <= 1`; the rates may be given in either order.
pub fn preferred_design(f1: f64, f2: f64, rho_s: f64) -> DesignRegionPoint {
    let (f1, f2) = if f1 <= f2 { (f1, f2) } else { (f2, f1) };
    let margin = f1 * (f2 * (2.0 - 4.0 * rho_s) + 1.0) - f2 * (3.0 - 4.0 * rho_s);
    let preferred = if margin > 0.0 {
        PreferredDesign::ReducedCohort
    } else if margin < 0.0 {
        PreferredDesign::LtfNoReplacement
    } else {
        PreferredDesign::Tie
    };
    DesignRegionPoint {
        f1,
        f2,
        rho_s,
        preferred,
        threshold: region_boundary(f2, rho_s),
    }
}

/// The `f1` threshold above which the reduced cohort wins. Zero for
/// `rho_s >= 0.75`, where the reduced cohort wins everywhere below the
/// identity line.
pub fn region_boundary(f2: f64, rho_s: f64) -> f64 {
    if rho_s >= 0.75 {
        return 0.0;
    }
    (f2 * (3.0 - 4.0 * rho_s) / (f2 * (2.0 - 4.0 * rho_s) + 1.0)).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub rho_s: f64,
    pub f2: f64,
    pub f1_threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionGrid {
    pub boundary: Vec<BoundaryPoint>,
    pub points: Vec<DesignRegionPoint>,
}

/// For each `rho_s`: the boundary curve over the lattice and the
/// classification of every lattice pair with `f1 <= f2`.
pub fn region_grid(rho_values: &[f64], f_lattice: &[f64]) -> RegionGrid {
    let mut grid = RegionGrid::default();
    for &rho_s in rho_values {
        for &f2 in f_lattice {
            grid.boundary.push(BoundaryPoint {
                rho_s,
                f2,
                f1_threshold: region_boundary(f2, rho_s),
            });
            for &f1 in f_lattice.iter().filter(|&&f1| f1 <= f2) {
                grid.points.push(preferred_design(f1, f2, rho_s));
            }
        }
    }
    grid
}
