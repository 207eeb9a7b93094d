//! Domain types: variance components, their correlation parameterization,
//! follow-up patterns, trial designs and power specifications.
//!
//! Arm 1 is the control arm and arm 2 the treatment arm. Loss and gain at
//! follow-up are carried as rates relative to the baseline cluster size `k`;
//! the exact oracle and the simulator need whole subjects, so the rates can
//! be converted to counts with an integrality check.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when deciding whether `k * rate` is a whole number.
const COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    /// Arm 1 (A = 0).
    Control,
    /// Arm 2 (A = 1).
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index() + 1)
    }
}

/// The four independent random-effect variances of the DID mixed model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Time-invariant cluster effect.
    pub sigma_c2: f64,
    /// Cluster-by-time effect.
    pub sigma_ct2: f64,
    /// Time-invariant subject effect.
    pub sigma_s2: f64,
    /// Subject-by-time effect (residual when subjects are measured once per period).
    pub sigma_st2: f64,
}

impl VarianceComponents {
    pub fn new(sigma_c2: f64, sigma_ct2: f64, sigma_s2: f64, sigma_st2: f64) -> Result<Self> {
        let vc = Self {
            sigma_c2,
            sigma_ct2,
            sigma_s2,
            sigma_st2,
        };
        vc.validate()?;
        Ok(vc)
    }

    /// Checks the invariants on a value that was built field by field
    /// (for example, deserialized).
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("sigma_c2", self.sigma_c2),
            ("sigma_ct2", self.sigma_ct2),
            ("sigma_s2", self.sigma_s2),
            ("sigma_st2", self.sigma_st2),
        ];
        for (field, value) in fields {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::InvalidParameter {
                    field,
                    message: format!("variance must be finite and nonnegative, got {value}"),
                });
            }
        }
        if self.subject_total() <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "sigma_s2",
                message: "sigma_s2 + sigma_st2 must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.sigma_c2 + self.sigma_ct2 + self.sigma_s2 + self.sigma_st2
    }

    /// Within-period cluster variance, `sigma_c2 + sigma_ct2`.
    pub fn cluster_total(&self) -> f64 {
        self.sigma_c2 + self.sigma_ct2
    }

    /// Within-period subject variance, `sigma_s2 + sigma_st2`.
    pub fn subject_total(&self) -> f64 {
        self.sigma_s2 + self.sigma_st2
    }

    /// Subject autocorrelation.
    pub fn rho_s(&self) -> f64 {
        self.sigma_s2 / self.subject_total()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            sigma_c2: self.sigma_c2 * factor,
            sigma_ct2: self.sigma_ct2 * factor,
            sigma_s2: self.sigma_s2 * factor,
            sigma_st2: self.sigma_st2 * factor,
        }
    }
}

/// Total variance plus the intracluster correlation and the cluster and
/// subject autocorrelations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationProfile {
    pub sigma_total2: f64,
    /// Intracluster correlation.
    pub rho: f64,
    /// Cluster autocorrelation.
    pub rho_c: f64,
    /// Subject autocorrelation.
    pub rho_s: f64,
    /// Set when `sigma_c2 + sigma_ct2 == 0`; `rho_c` is then reported as 0.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub degenerate_cluster_variance: bool,
}

impl CorrelationProfile {
    pub fn new(sigma_total2: f64, rho: f64, rho_c: f64, rho_s: f64) -> Result<Self> {
        let cp = Self {
            sigma_total2,
            rho,
            rho_c,
            rho_s,
            degenerate_cluster_variance: false,
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.sigma_total2.is_finite() || self.sigma_total2 <= 0.0 {
            return Err(Error::InvalidParameter {
                field: "sigma_total2",
                message: format!("total variance must be positive, got {}", self.sigma_total2),
            });
        }
        for (field, value) in [("rho", self.rho), ("rho_c", self.rho_c), ("rho_s", self.rho_s)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::InvalidParameter {
                    field,
                    message: format!("correlation must lie in [0, 1], got {value}"),
                });
            }
        }
        // All variance at cluster level leaves no subject variance.
        if self.rho >= 1.0 {
            return Err(Error::InvalidParameter {
                field: "rho",
                message: "rho = 1 leaves zero subject-level variance".into(),
            });
        }
        Ok(())
    }
}

pub fn correlations_from_components(vc: &VarianceComponents) -> CorrelationProfile {
    let total = vc.total();
    let cluster = vc.cluster_total();
    let degenerate = cluster == 0.0;
    CorrelationProfile {
        sigma_total2: total,
        rho: cluster / total,
        rho_c: if degenerate { 0.0 } else { vc.sigma_c2 / cluster },
        rho_s: vc.rho_s(),
        degenerate_cluster_variance: degenerate,
    }
}

pub fn components_from_correlations(cp: &CorrelationProfile) -> Result<VarianceComponents> {
    cp.validate()?;
    let cluster = cp.rho * cp.sigma_total2;
    let subject = (1.0 - cp.rho) * cp.sigma_total2;
    VarianceComponents::new(
        cp.rho_c * cluster,
        (1.0 - cp.rho_c) * cluster,
        cp.rho_s * subject,
        (1.0 - cp.rho_s) * subject,
    )
}

/// Per-arm loss (`lambda`) and gain (`gamma`) rates at follow-up, as
/// fractions of the baseline cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FollowUpPattern {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl FollowUpPattern {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn full_replacement(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            gamma1: lambda1,
            gamma2: lambda2,
        }
    }

    pub fn no_replacement(lambda1: f64, lambda2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            gamma1: 0.0,
            gamma2: 0.0,
        }
    }

    pub fn partial(lambda1: f64, lambda2: f64, gamma1: f64, gamma2: f64) -> Self {
        Self {
            lambda1,
            lambda2,
            gamma1,
            gamma2,
        }
    }

    pub fn loss(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.lambda1,
            Arm::Treatment => self.lambda2,
        }
    }

    pub fn gain(&self, arm: Arm) -> f64 {
        match arm {
            Arm::Control => self.gamma1,
            Arm::Treatment => self.gamma2,
        }
    }

    /// Follow-up cluster size as a fraction of baseline, `1 - lambda + gamma`.
    pub fn followup_fraction(&self, arm: Arm) -> f64 {
        1.0 - self.loss(arm) + self.gain(arm)
    }

    /// Fraction of the follow-up cluster that was also measured at baseline.
    pub fn stay_fraction(&self, arm: Arm) -> f64 {
        (1.0 - self.loss(arm)) / self.followup_fraction(arm)
    }

    pub fn mean_loss(&self) -> f64 {
        0.5 * (self.lambda1 + self.lambda2)
    }

    fn issues(&self, out: &mut Vec<ValidationIssue>) {
        for arm in Arm::BOTH {
            let (lambda, gamma) = (self.loss(arm), self.gain(arm));
            if !lambda.is_finite() || !(0.0..1.0).contains(&lambda) {
                out.push(ValidationIssue::error(
                    format!("pattern.lambda{arm}"),
                    format!("lambda must lie in [0, 1), got {lambda}"),
                ));
            }
            if !gamma.is_finite() || gamma < 0.0 {
                out.push(ValidationIssue::error(
                    format!("pattern.gamma{arm}"),
                    format!("gamma must be finite and nonnegative, got {gamma}"),
                ));
            }
        }
    }
}

/// Which DID design (and therefore which variance formula) a trial uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignKind {
    /// Same subjects at both periods, nobody lost.
    CohortNoLtf,
    /// Disjoint subjects at baseline and follow-up.
    CrossSectional,
    /// Every lost subject is replaced by a new one (`gamma = lambda`).
    FullReplacement,
    /// Lost subjects keep their baseline measurement, nobody is added.
    NoReplacement,
    /// Arbitrary loss and gain rates.
    PartialReplacement,
    /// Completers only: a cohort at the smaller follow-up cluster size.
    ReducedCohort,
}

impl DesignKind {
    pub const ALL: [DesignKind; 6] = [
        DesignKind::CohortNoLtf,
        DesignKind::CrossSectional,
        DesignKind::FullReplacement,
        DesignKind::NoReplacement,
        DesignKind::PartialReplacement,
        DesignKind::ReducedCohort,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::CohortNoLtf => "cohort-no-ltf",
            DesignKind::CrossSectional => "cross-sectional",
            DesignKind::FullReplacement => "full-replacement",
            DesignKind::NoReplacement => "no-replacement",
            DesignKind::PartialReplacement => "partial-replacement",
            DesignKind::ReducedCohort => "reduced-cohort",
        }
    }

    /// The pattern this kind implies, taking loss rates (and, for partial
    /// replacement, gain rates) from `base`.
    pub fn canonical_pattern(self, base: &FollowUpPattern) -> FollowUpPattern {
        match self {
            DesignKind::CohortNoLtf => FollowUpPattern::none(),
            DesignKind::CrossSectional | DesignKind::PartialReplacement => *base,
            DesignKind::FullReplacement => FollowUpPattern::full_replacement(base.lambda1, base.lambda2),
            DesignKind::NoReplacement | DesignKind::ReducedCohort => {
                FollowUpPattern::no_replacement(base.lambda1, base.lambda2)
            }
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        DesignKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = DesignKind::ALL.iter().map(|k| k.as_str()).collect();
            format!("unknown design kind `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// Clusters per arm, baseline cluster size, follow-up pattern and design kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialDesign {
    pub j1: u32,
    pub j2: u32,
    pub k: u32,
    pub pattern: FollowUpPattern,
    pub kind: DesignKind,
}

/// Whole-subject counts for one cluster of an arm.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub baseline: u32,
    pub lost: u32,
    pub gained: u32,
}

impl ArmCounts {
    pub fn followup(&self) -> u32 {
        self.baseline - self.lost + self.gained
    }
}

impl TrialDesign {
    pub fn new(j1: u32, j2: u32, k: u32, pattern: FollowUpPattern, kind: DesignKind) -> Self {
        Self {
            j1,
            j2,
            k,
            pattern,
            kind,
        }
    }

    /// Equal number of clusters `j` in both arms.
    pub fn balanced(j: u32, k: u32, pattern: FollowUpPattern, kind: DesignKind) -> Self {
        Self::new(j, j, k, pattern, kind)
    }

    pub fn clusters(&self, arm: Arm) -> u32 {
        match arm {
            Arm::Control => self.j1,
            Arm::Treatment => self.j2,
        }
    }

    /// Same trial analysed as `kind`, with the pattern made consistent with it.
    pub fn with_kind(&self, kind: DesignKind) -> Self {
        Self {
            kind,
            pattern: kind.canonical_pattern(&self.pattern),
            ..*self
        }
    }

    pub fn with_k(&self, k: u32) -> Self {
        Self { k, ..*self }
    }

    pub fn with_clusters(&self, j: u32) -> Self {
        Self { j1: j, j2: j, ..*self }
    }

    /// Analysis cluster size of the reduced cohort, `k * min(1 - lambda1, 1 - lambda2)`.
    pub fn reduced_cohort_size(&self) -> f64 {
        let stay = (1.0 - self.pattern.lambda1).min(1.0 - self.pattern.lambda2);
        let size = f64::from(self.k) * stay;
        // Rates like m / K should give back whole subjects exactly.
        match integral(size) {
            Some(n) => f64::from(n),
            None => size,
        }
    }

    /// Per-cluster subject counts for each arm, as used by the exact oracle
    /// and the simulator. Cross-sectional designs lose and replace everyone;
    /// the reduced cohort is a cohort of the reduced size.
    pub fn counts(&self) -> Result<[ArmCounts; 2]> {
        let mut out = [ArmCounts {
            baseline: self.k,
            lost: 0,
            gained: 0,
        }; 2];
        for arm in Arm::BOTH {
            out[arm.index()] = match self.kind {
                DesignKind::CohortNoLtf => ArmCounts {
                    baseline: self.k,
                    lost: 0,
                    gained: 0,
                },
                DesignKind::CrossSectional => ArmCounts {
                    baseline: self.k,
                    lost: self.k,
                    gained: self.k,
                },
                DesignKind::ReducedCohort => {
                    let size = whole(self.reduced_cohort_size(), "reduced cohort", arm)?;
                    ArmCounts {
                        baseline: size,
                        lost: 0,
                        gained: 0,
                    }
                }
                DesignKind::FullReplacement | DesignKind::NoReplacement | DesignKind::PartialReplacement => {
                    let k = f64::from(self.k);
                    ArmCounts {
                        baseline: self.k,
                        lost: whole(k * self.pattern.loss(arm), "loss", arm)?,
                        gained: whole(k * self.pattern.gain(arm), "gain", arm)?,
                    }
                }
            };
        }
        Ok(out)
    }

    /// Snaps each loss and gain rate to the nearest multiple of `1 / k`, so
    /// that [`TrialDesign::counts`] succeeds.
    pub fn with_rounded_counts(&self) -> Self {
        let k = f64::from(self.k);
        let snap = |rate: f64| (rate * k).round() / k;
        let p = &self.pattern;
        Self {
            pattern: FollowUpPattern {
                lambda1: snap(p.lambda1),
                lambda2: snap(p.lambda2),
                gamma1: snap(p.gamma1),
                gamma2: snap(p.gamma2),
            },
            ..*self
        }
    }
}

fn whole(value: f64, what: &'static str, arm: Arm) -> Result<u32> {
    match integral(value) {
        Some(n) => Ok(n),
        None => Err(Error::NonIntegralCount { what, arm, value }),
    }
}

fn integral(value: f64) -> Option<u32> {
    let rounded = value.round();
    let ok = value.is_finite()
        && rounded >= 0.0
        && rounded <= f64::from(u32::MAX)
        && (value - rounded).abs() <= COUNT_TOLERANCE * rounded.max(1.0);
    ok.then_some(rounded as u32)
}

/// Effect size, significance level and (for the solvers) target power.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerSpec {
    /// DID effect in outcome units.
    pub beta3: f64,
    /// Two-sided significance level.
    pub alpha: f64,
    pub target_power: f64,
}

impl PowerSpec {
    pub fn new(beta3: f64, alpha: f64, target_power: f64) -> Result<Self> {
        let spec = Self {
            beta3,
            alpha,
            target_power,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.beta3.is_finite() {
            return Err(Error::InvalidParameter {
                field: "beta3",
                message: format!("effect must be finite, got {}", self.beta3),
            });
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter {
                field: "alpha",
                message: format!("alpha must lie in (0, 1), got {}", self.alpha),
            });
        }
        if !(self.target_power > 0.0 && self.target_power < 1.0) {
            return Err(Error::InvalidParameter {
                field: "target_power",
                message: format!("target power must lie in (0, 1), got {}", self.target_power),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    /// The design is usable by the closed forms but not by the exact oracle or simulator.
    Warning,
}

/// One violated invariant, with the path of the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub field: String,
    pub message: String,
    pub severity: Severity,
}

impl ValidationIssue {
    fn error(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
            severity: Severity::Error,
        }
    }

    fn warning(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
            severity: Severity::Warning,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedDesign {
    pub design: TrialDesign,
    pub warnings: Vec<ValidationIssue>,
}

/// Reports every violated invariant at once. Non-integral loss or gain
/// counts are warnings, not errors.
pub fn validate_design(d: &TrialDesign) -> Result<ValidatedDesign, Vec<ValidationIssue>> {
    let mut issues = Vec::new();
    for (field, value) in [("j1", d.j1), ("j2", d.j2), ("k", d.k)] {
        if value == 0 {
            issues.push(ValidationIssue::error(field, "must be a positive integer"));
        }
    }

    let p = &d.pattern;
    if d.kind != DesignKind::CrossSectional {
        p.issues(&mut issues);
    }
    for arm in Arm::BOTH {
        let (lambda, gamma) = (p.loss(arm), p.gain(arm));
        match d.kind {
            DesignKind::CohortNoLtf => {
                if lambda != 0.0 {
                    issues.push(ValidationIssue::error(
                        format!("pattern.lambda{arm}"),
                        "lambda must be zero for a cohort without loss to follow-up",
                    ));
                }
                if gamma != 0.0 {
                    issues.push(ValidationIssue::error(
                        format!("pattern.gamma{arm}"),
                        "gamma must be zero",
                    ));
                }
            }
            DesignKind::FullReplacement if gamma != lambda => {
                issues.push(ValidationIssue::error(
                    format!("pattern.gamma{arm}"),
                    "gamma must equal lambda for full replacement",
                ));
            }
            DesignKind::NoReplacement | DesignKind::ReducedCohort if gamma != 0.0 => {
                issues.push(ValidationIssue::error(
                    format!("pattern.gamma{arm}"),
                    "gamma must be zero",
                ));
            }
            _ => {}
        }
    }
    if d.kind == DesignKind::ReducedCohort && d.k > 0 {
        let size = d.reduced_cohort_size();
        if size < 1.0 {
            issues.push(ValidationIssue::error(
                "k",
                format!("reduced cohort size {size} is below one subject"),
            ));
        }
    }

    if issues.iter().any(|i| i.severity == Severity::Error) {
        return Err(issues);
    }

    let mut warnings = Vec::new();
    if matches!(
        d.kind,
        DesignKind::FullReplacement
            | DesignKind::NoReplacement
            | DesignKind::PartialReplacement
            | DesignKind::ReducedCohort
    ) {
        let k = f64::from(d.k);
        for arm in Arm::BOTH {
            for (name, rate) in [("lambda", p.loss(arm)), ("gamma", p.gain(arm))] {
                let count = k * rate;
                if integral(count).is_none() {
                    let what = if name == "lambda" { "loss" } else { "gain" };
                    warnings.push(ValidationIssue::warning(
                        format!("pattern.{name}{arm}"),
                        format!("non-integer {what} count {count}; oracle unavailable"),
                    ));
                }
            }
        }
    }
    Ok(ValidatedDesign { design: *d, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn school_components_give_expected_correlations() {
        let vc = VarianceComponents::new(0.0218, 0.0047, 0.3342, 0.2567).unwrap();
        let cp = correlations_from_components(&vc);
        assert!((cp.sigma_total2 - 0.6174).abs() < 1e-12);
        assert!((cp.rho - 0.0429).abs() < 1e-4);
        assert!((cp.rho_c - 0.8226).abs() < 1e-4);
        assert!((cp.rho_s - 0.5656).abs() < 1e-4);
        assert!(!cp.degenerate_cluster_variance);
    }

    #[test]
    fn efficiency_components_give_round_correlations() {
        let vc = VarianceComponents::new(0.015, 0.035, 0.76, 0.19).unwrap();
        let cp = correlations_from_components(&vc);
        assert!(rel(cp.sigma_total2, 1.0) < 1e-12);
        assert!(rel(cp.rho, 0.05) < 1e-12);
        assert!(rel(cp.rho_c, 0.3) < 1e-12);
        assert!(rel(cp.rho_s, 0.8) < 1e-12);
    }

    #[test]
    fn zero_time_invariant_cluster_variance() {
        let vc = VarianceComponents::new(0.0, 0.2, 0.5, 0.3).unwrap();
        assert_eq!(correlations_from_components(&vc).rho_c, 0.0);
    }

    #[test]
    fn degenerate_cluster_variance_is_flagged_not_nan() {
        let vc = VarianceComponents::new(0.0, 0.0, 0.5, 0.3).unwrap();
        let cp = correlations_from_components(&vc);
        assert_eq!(cp.rho, 0.0);
        assert_eq!(cp.rho_c, 0.0);
        assert!(cp.degenerate_cluster_variance);
    }

    #[test]
    fn correlations_back_to_components() {
        let cp = CorrelationProfile::new(1.0, 0.05, 0.3, 0.8).unwrap();
        let vc = components_from_correlations(&cp).unwrap();
        let want = [0.015, 0.035, 0.76, 0.19];
        let got = [vc.sigma_c2, vc.sigma_ct2, vc.sigma_s2, vc.sigma_st2];
        for (g, w) in got.iter().zip(want) {
            assert!(rel(*g, w) < 1e-12, "{got:?}");
        }

        let cp = CorrelationProfile::new(1.0, 0.0, 0.4, 0.5).unwrap();
        let vc = components_from_correlations(&cp).unwrap();
        assert_eq!(
            (vc.sigma_c2, vc.sigma_ct2, vc.sigma_s2, vc.sigma_st2),
            (0.0, 0.0, 0.5, 0.5)
        );
    }

    #[test]
    fn rounded_correlations_round_trip_within_rounding() {
        let cp = CorrelationProfile::new(0.6174, 0.0429, 0.8226, 0.5656).unwrap();
        let vc = components_from_correlations(&cp).unwrap();
        let got = [vc.sigma_c2, vc.sigma_ct2, vc.sigma_s2, vc.sigma_st2];
        for (g, w) in got.iter().zip([0.0218, 0.0047, 0.3342, 0.2567]) {
            assert!((g - w).abs() < 1e-3, "{got:?}");
        }
    }

    #[test]
    fn invalid_components_rejected() {
        assert!(VarianceComponents::new(-0.1, 0.0, 1.0, 1.0).is_err());
        assert!(VarianceComponents::new(0.1, 0.1, 0.0, 0.0).is_err());
        assert!(VarianceComponents::new(f64::NAN, 0.1, 1.0, 0.0).is_err());
        assert!(CorrelationProfile::new(1.0, 1.2, 0.3, 0.3).is_err());
        assert!(CorrelationProfile::new(0.0, 0.1, 0.3, 0.3).is_err());
    }

    #[test]
    fn no_replacement_with_gain_is_rejected() {
        let d = TrialDesign::balanced(
            10,
            10,
            FollowUpPattern::partial(0.1, 0.1, 0.1, 0.0),
            DesignKind::NoReplacement,
        );
        let issues = validate_design(&d).unwrap_err();
        assert_eq!(issues.len(), 1);
        assert_eq!(issues[0].field, "pattern.gamma1");
        assert_eq!(issues[0].message, "gamma must be zero");
    }

    #[test]
    fn integral_loss_count_has_no_warning() {
        let d = TrialDesign::balanced(
            10,
            10,
            FollowUpPattern::no_replacement(0.9, 0.0),
            DesignKind::NoReplacement,
        );
        assert!(validate_design(&d).unwrap().warnings.is_empty());
    }

    #[test]
    fn fractional_loss_count_warns() {
        let d = TrialDesign::balanced(
            10,
            10,
            FollowUpPattern::no_replacement(0.85, 0.0),
            DesignKind::NoReplacement,
        );
        let v = validate_design(&d).unwrap();
        assert_eq!(v.warnings.len(), 1);
        assert_eq!(v.warnings[0].field, "pattern.lambda1");
        assert_eq!(v.warnings[0].message, "non-integer loss count 8.5; oracle unavailable");
        assert!(d.counts().is_err());
    }

    #[test]
    fn every_violation_is_reported() {
        let d = TrialDesign::new(
            0,
            3,
            10,
            FollowUpPattern::partial(1.0, 0.2, -0.1, 0.1),
            DesignKind::CohortNoLtf,
        );
        let issues = validate_design(&d).unwrap_err();
        let fields: Vec<_> = issues.iter().map(|i| i.field.as_str()).collect();
        for f in [
            "j1",
            "pattern.lambda1",
            "pattern.gamma1",
            "pattern.lambda2",
            "pattern.gamma2",
        ] {
            assert!(fields.contains(&f), "{fields:?}");
        }
    }

    #[test]
    fn reduced_cohort_needs_a_subject() {
        let d = TrialDesign::balanced(
            5,
            4,
            FollowUpPattern::no_replacement(0.8, 0.1),
            DesignKind::ReducedCohort,
        );
        assert!(validate_design(&d).is_err());
    }

    #[test]
    fn cross_sectional_ignores_pattern() {
        let d = TrialDesign::balanced(
            5,
            4,
            FollowUpPattern::partial(3.0, 0.1, 0.0, 0.0),
            DesignKind::CrossSectional,
        );
        assert!(validate_design(&d).is_ok());
        assert_eq!(
            d.counts().unwrap()[0],
            ArmCounts {
                baseline: 4,
                lost: 4,
                gained: 4
            }
        );
    }

    #[test]
    fn counts_and_rounding() {
        let d = TrialDesign::balanced(
            15,
            171,
            FollowUpPattern::full_replacement(0.05, 0.16),
            DesignKind::FullReplacement,
        );
        assert!(d.counts().is_err());
        let r = d.with_rounded_counts();
        let c = r.counts().unwrap();
        assert_eq!(
            c[0],
            ArmCounts {
                baseline: 171,
                lost: 9,
                gained: 9
            }
        );
        assert_eq!(
            c[1],
            ArmCounts {
                baseline: 171,
                lost: 27,
                gained: 27
            }
        );
        assert_eq!(c[1].followup(), 171);
    }

    #[test]
    fn kind_names_parse() {
        for kind in DesignKind::ALL {
            assert_eq!(kind.as_str().parse::<DesignKind>().unwrap(), kind);
        }
        assert!("cohort".parse::<DesignKind>().is_err());
    }
}
