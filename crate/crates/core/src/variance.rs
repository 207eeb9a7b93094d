//! Closed-form variance of the DID estimator.
//!
//! Every design kind goes through one per-arm formula. For arm `i` with `J_i`
//! clusters, baseline analysis size `K`, follow-up size `K'_i = K(1 - λ_i + γ_i)`
//! and stay fraction `f_i = (1 - λ_i) / (1 - λ_i + γ_i)`:
//!
//! ```text
//! contrib_i = (2σ²_CT + (σ²_S + σ²_ST)/K + (σ²_S + σ²_ST)/K'_i - 2 f_i σ²_S / K) / J_i
//! ```
//!
//! and `Var(β̂₃) = contrib_1 + contrib_2`. With `J_1 = J_2 = J` this is
//! `4[σ²_CT/J + (1 - ρ*_S)(σ²_S + σ²_ST)/(JK)]`, where `ρ*_S` is the effective
//! subject autocorrelation returned by the `rho_star_*` functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{validate_design, Arm, DesignKind, FollowUpPattern, TrialDesign, VarianceComponents};

/// Quantities behind a variance evaluation, for `variance --explain`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceDiagnostics {
    /// Stay-fraction sum minus one; absent for cross-sectional designs.
    pub eta: Option<f64>,
    pub rho_s_star: f64,
    /// Baseline cluster size used in the analysis (the reduced size for a reduced cohort).
    pub analysis_size: f64,
    pub stay_fraction: [f64; 2],
    pub followup_size: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceBreakdown {
    /// `Var(β̂₃)`.
    pub total: f64,
    pub per_arm: [f64; 2],
    /// `Σ_i 2σ²_CT / J_i`, the part that does not shrink with cluster size.
    pub cluster_time_term: f64,
    pub subject_term: f64,
    pub rho_s_star: f64,
    pub diagnostics: VarianceDiagnostics,
}

/// `ρ*_S = (1 - λ̄) ρ_S` for loss with full replacement.
pub fn rho_star_full_replacement(rho_s: f64, pattern: &FollowUpPattern) -> Result<f64> {
    for arm in Arm::BOTH {
        if pattern.gain(arm) != pattern.loss(arm) {
            return Err(Error::PatternMismatch {
                expected: "full replacement",
                detail: format!(
                    "gamma{arm} = {} differs from lambda{arm} = {}",
                    pattern.gain(arm),
                    pattern.loss(arm)
                ),
            });
        }
    }
    Ok((1.0 - pattern.mean_loss()) * rho_s)
}

/// `ρ*_S = ρ_S - [λ_1/(1-λ_1) + λ_2/(1-λ_2)] / 4` for loss without
/// replacement. May be negative; only `1 - ρ*_S` enters the variance.
pub fn rho_star_no_replacement(rho_s: f64, pattern: &FollowUpPattern) -> Result<f64> {
    let mut odds = 0.0;
    for arm in Arm::BOTH {
        if pattern.gain(arm) != 0.0 {
            return Err(Error::PatternMismatch {
                expected: "no replacement",
                detail: format!("gamma{arm} = {} is not zero", pattern.gain(arm)),
            });
        }
        let lambda = pattern.loss(arm);
        if lambda >= 1.0 {
            return Err(Error::EmptyFollowUpCluster {
                arm,
                size: 1.0 - lambda,
            });
        }
        odds += lambda / (1.0 - lambda);
    }
    Ok(rho_s - 0.25 * odds)
}

/// `η = Σ_i (1 - λ_i)/(1 - λ_i + γ_i) - 1`.
pub fn eta(pattern: &FollowUpPattern) -> Result<f64> {
    followup_fractions(pattern)?;
    Ok(pattern.stay_fraction(Arm::Control) + pattern.stay_fraction(Arm::Treatment) - 1.0)
}

fn followup_fractions(pattern: &FollowUpPattern) -> Result<[f64; 2]> {
    let mut out = [0.0; 2];
    for arm in Arm::BOTH {
        let size = pattern.followup_fraction(arm);
        if size.is_nan() || size <= 0.0 {
            return Err(Error::EmptyFollowUpCluster { arm, size });
        }
        out[arm.index()] = size;
    }
    Ok(out)
}

/// Effective subject autocorrelation for arbitrary loss and gain rates.
pub fn rho_star_general(vc: &VarianceComponents, pattern: &FollowUpPattern) -> Result<f64> {
    let [phi1, phi2] = followup_fractions(pattern)?;
    let eta = eta(pattern)?;
    let subject = vc.subject_total();
    let bracket = 1.0 / phi1 + 1.0 / phi2 - 2.0 * (eta * vc.sigma_s2 + vc.sigma_st2) / subject;
    Ok(vc.rho_s() - 0.25 * bracket)
}

pub fn did_variance(d: &TrialDesign, vc: &VarianceComponents) -> Result<VarianceBreakdown> {
    vc.validate()?;
    if let Err(issues) = validate_design(d) {
        if d.kind == DesignKind::ReducedCohort && d.k > 0 && d.reduced_cohort_size() < 1.0 {
            return Err(Error::ReducedCohortTooSmall {
                size: d.reduced_cohort_size(),
            });
        }
        return Err(Error::InvalidDesign(issues));
    }

    let k = f64::from(d.k);
    let p = &d.pattern;
    // (analysis size, follow-up sizes, stay fractions, eta, rho*_S)
    let (size, followup, stay, eta, rho_s_star) = match d.kind {
        DesignKind::CohortNoLtf => (k, [k, k], [1.0, 1.0], Some(1.0), vc.rho_s()),
        DesignKind::CrossSectional => (k, [k, k], [0.0, 0.0], None, 0.0),
        DesignKind::ReducedCohort => {
            let r = d.reduced_cohort_size();
            (r, [r, r], [1.0, 1.0], Some(1.0), vc.rho_s())
        }
        DesignKind::FullReplacement | DesignKind::NoReplacement | DesignKind::PartialReplacement => {
            let phi = followup_fractions(p)?;
            let rho_star = match d.kind {
                DesignKind::FullReplacement => rho_star_full_replacement(vc.rho_s(), p)?,
                DesignKind::NoReplacement => rho_star_no_replacement(vc.rho_s(), p)?,
                _ => rho_star_general(vc, p)?,
            };
            (
                k,
                [k * phi[0], k * phi[1]],
                [p.stay_fraction(Arm::Control), p.stay_fraction(Arm::Treatment)],
                Some(eta(p)?),
                rho_star,
            )
        }
    };

    let subject = vc.subject_total();
    let mut per_arm = [0.0; 2];
    let mut cluster_time_term = 0.0;
    for arm in Arm::BOTH {
        let i = arm.index();
        let j = f64::from(d.clusters(arm));
        let ct = 2.0 * vc.sigma_ct2;
        let subj = subject / size + subject / followup[i] - 2.0 * stay[i] * vc.sigma_s2 / size;
        per_arm[i] = (ct + subj) / j;
        cluster_time_term += ct / j;
    }
    let total = per_arm[0] + per_arm[1];

    Ok(VarianceBreakdown {
        total,
        per_arm,
        cluster_time_term,
        subject_term: total - cluster_time_term,
        rho_s_star,
        diagnostics: VarianceDiagnostics {
            eta,
            rho_s_star,
            analysis_size: size,
            stay_fraction: stay,
            followup_size: followup,
        },
    })
}
