//! Covariance matrix of one cluster's observations at both periods, and the
//! DID variance obtained from it as a quadratic form.
//!
//! Rows and columns are ordered as: baseline subjects (the `l` lost subjects
//! first, then the stayers), then follow-up subjects (the stayers in the same
//! order, then the `g` new subjects).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_design, Arm, ArmCounts, TrialDesign, VarianceComponents};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterCovariance {
    pub baseline_size: u32,
    pub followup_size: u32,
    pub lost: u32,
    pub gained: u32,
    pub matrix: DMatrix<f64>,
}

impl ClusterCovariance {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn quadratic_form(&self, w: &DVector<f64>) -> f64 {
        w.dot(&(&self.matrix * w))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.matrix.clone())
            .eigenvalues
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// True when no eigenvalue is below `-tol` times the largest diagonal entry.
    pub fn is_positive_semidefinite(&self, tol: f64) -> bool {
        let scale = self.matrix.diagonal().max().max(f64::MIN_POSITIVE);
        self.min_eigenvalue() >= -tol * scale
    }

    /// Weights that average the baseline and the follow-up observations:
    /// `baseline_weight / K` on each baseline entry and
    /// `followup_weight / K'` on each follow-up entry.
    pub fn mean_contrast(&self, baseline_weight: f64, followup_weight: f64) -> DVector<f64> {
        let k = self.baseline_size as usize;
        let kf = self.followup_size as usize;
        DVector::from_fn(k + kf, |i, _| {
            if i < k {
                baseline_weight / k as f64
            } else {
                followup_weight / kf as f64
            }
        })
    }
}

pub fn build_cluster_covariance(k: u32, l: u32, g: u32, vc: &VarianceComponents) -> Result<ClusterCovariance> {
    if k == 0 {
        return Err(Error::InvalidParameter {
            field: "k",
            message: "cluster needs at least one baseline subject".into(),
        });
    }
    if l > k {
        return Err(Error::InvalidParameter {
            field: "l",
            message: format!("cannot lose {l} of {k} subjects"),
        });
    }
    let followup = k - l + g;
    if followup == 0 {
        return Err(Error::EmptyFollowUpCluster {
            arm: Arm::Control,
            size: 0.0,
        });
    }

    let (k_us, l_us) = (k as usize, l as usize);
    let stayers = k_us - l_us;
    let dim = k_us + followup as usize;
    let total = vc.total();
    let same_time = vc.sigma_c2 + vc.sigma_ct2;
    let same_subject = vc.sigma_c2 + vc.sigma_s2;

    let matrix = DMatrix::from_fn(dim, dim, |r, c| {
        if r == c {
            return total;
        }
        let (r_base, c_base) = (r < k_us, c < k_us);
        if r_base == c_base {
            return same_time;
        }
        let (b, f) = if r_base { (r, c - k_us) } else { (c, r - k_us) };
        // Baseline stayer b - l is follow-up subject f when b >= l.
        if b >= l_us && f < stayers && b - l_us == f {
            same_subject
        } else {
            vc.sigma_c2
        }
    });

    Ok(ClusterCovariance {
        baseline_size: k,
        followup_size: followup,
        lost: l,
        gained: g,
        matrix,
    })
}

fn checked_counts(d: &TrialDesign) -> Result<[ArmCounts; 2]> {
    validate_design(d).map_err(Error::InvalidDesign)?;
    d.counts()
}

/// `Var(β̂₃)` as `Σ_i J_i wᵀΣw`, with one cluster covariance per arm and
/// weights `±1/(J_i K)` on baseline and `∓1/(J_i K')` on follow-up entries.
/// Clusters are independent and exchangeable, so one matrix per arm suffices.
pub fn exact_did_variance(d: &TrialDesign, vc: &VarianceComponents) -> Result<f64> {
    vc.validate()?;
    let counts = checked_counts(d)?;
    let mut total = 0.0;
    for arm in Arm::BOTH {
        let c = counts[arm.index()];
        let cov = build_cluster_covariance(c.baseline, c.lost, c.gained, vc)?;
        let j = f64::from(d.clusters(arm));
        // δ: arm 1 is (+1 baseline, -1 follow-up), arm 2 is (-1, +1).
        let sign = if arm == Arm::Control { 1.0 } else { -1.0 };
        let w = cov.mean_contrast(sign / j, -sign / j);
        total += j * cov.quadratic_form(&w);
    }
    Ok(total)
}

/// Variances and covariance of an arm's baseline and follow-up means `ȳ_i1`, `ȳ_i2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMoments {
    pub var_baseline: f64,
    pub var_followup: f64,
    pub covariance: f64,
}

pub fn arm_cell_moments(d: &TrialDesign, vc: &VarianceComponents) -> Result<[CellMoments; 2]> {
    let counts = checked_counts(d)?;
    let mut out = [CellMoments {
        var_baseline: 0.0,
        var_followup: 0.0,
        covariance: 0.0,
    }; 2];
    for arm in Arm::BOTH {
        let c = counts[arm.index()];
        let cov = build_cluster_covariance(c.baseline, c.lost, c.gained, vc)?;
        let j = f64::from(d.clusters(arm));
        let base = cov.mean_contrast(1.0, 0.0);
        let follow = cov.mean_contrast(0.0, 1.0);
        out[arm.index()] = CellMoments {
            var_baseline: cov.quadratic_form(&base) / j,
            var_followup: cov.quadratic_form(&follow) / j,
            covariance: base.dot(&(&cov.matrix * &follow)) / j,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DesignKind, FollowUpPattern};

    fn unit() -> VarianceComponents {
        VarianceComponents::new(1.0, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn two_subject_cluster_with_one_replacement() {
        let cov = build_cluster_covariance(2, 1, 1, &unit()).unwrap();
        let m = &cov.matrix;
        assert_eq!(cov.dim(), 4);
        // Baseline block and follow-up block.
        assert_eq!([m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]], [4.0, 2.0, 2.0, 4.0]);
        assert_eq!([m[(2, 2)], m[(2, 3)], m[(3, 2)], m[(3, 3)]], [4.0, 2.0, 2.0, 4.0]);
        // Rows (lost, stayer) by columns (stayer, new).
        assert_eq!([m[(0, 2)], m[(0, 3)], m[(1, 2)], m[(1, 3)]], [1.0, 1.0, 2.0, 1.0]);
        assert_eq!(m.transpose(), *m);
    }

    #[test]
    fn pure_cohort_cross_block() {
        let vc = VarianceComponents::new(0.3, 0.2, 0.5, 0.7).unwrap();
        let cov = build_cluster_covariance(4, 0, 0, &vc).unwrap();
        for b in 0..4 {
            for f in 0..4 {
                let want = if b == f { 0.8 } else { 0.3 };
                assert_eq!(cov.matrix[(b, 4 + f)], want);
            }
        }
    }

    #[test]
    fn everyone_lost_leaves_only_cluster_covariance() {
        let vc = VarianceComponents::new(0.3, 0.2, 0.5, 0.7).unwrap();
        let cov = build_cluster_covariance(3, 3, 2, &vc).unwrap();
        for b in 0..3 {
            for f in 0..2 {
                assert_eq!(cov.matrix[(b, 3 + f)], 0.3);
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let vc = unit();
        assert!(build_cluster_covariance(3, 4, 0, &vc).is_err());
        assert!(build_cluster_covariance(3, 3, 0, &vc).is_err());
        assert!(build_cluster_covariance(0, 0, 1, &vc).is_err());
    }

    #[test]
    fn positive_semidefinite() {
        let vc = VarianceComponents::new(0.3, 0.0, 0.5, 0.0).unwrap();
        let cov = build_cluster_covariance(6, 2, 3, &vc).unwrap();
        assert!(cov.is_positive_semidefinite(1e-12));
        assert!(cov.min_eigenvalue() > -1e-12);
    }

    #[test]
    fn single_subject_cohort() {
        let vc = VarianceComponents::new(0.3, 0.2, 0.5, 0.7).unwrap();
        let d = TrialDesign::balanced(1, 1, FollowUpPattern::none(), DesignKind::CohortNoLtf);
        let v = exact_did_variance(&d, &vc).unwrap();
        assert!((v - 2.0 * (2.0 * 0.2 + 2.0 * 0.7)).abs() < 1e-14);
    }

    #[test]
    fn reference_cohort() {
        let vc = VarianceComponents::new(0.015, 0.035, 0.76, 0.19).unwrap();
        let d = TrialDesign::balanced(30, 100, FollowUpPattern::none(), DesignKind::CohortNoLtf);
        assert!((exact_did_variance(&d, &vc).unwrap() - 0.00492).abs() < 1e-10 * 0.00492);
    }

    #[test]
    fn non_integral_counts_rejected() {
        let vc = unit();
        let d = TrialDesign::balanced(
            3,
            10,
            FollowUpPattern::no_replacement(0.85, 0.0),
            DesignKind::NoReplacement,
        );
        assert!(matches!(
            exact_did_variance(&d, &vc),
            Err(Error::NonIntegralCount { .. })
        ));
    }

    #[test]
    fn cell_moments_for_cohort() {
        let vc = VarianceComponents::new(0.3, 0.2, 0.5, 0.7).unwrap();
        let d = TrialDesign::balanced(5, 4, FollowUpPattern::none(), DesignKind::CohortNoLtf);
        let m = arm_cell_moments(&d, &vc).unwrap()[0];
        let var = (0.5 + 1.2 / 4.0) / 5.0;
        assert!((m.var_baseline - var).abs() < 1e-14);
        assert!((m.var_followup - var).abs() < 1e-14);
        assert!((m.covariance - (0.3 + 0.5 / 4.0) / 5.0).abs() < 1e-14);
    }
}
