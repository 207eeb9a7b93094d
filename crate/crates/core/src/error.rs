use thiserror::Error;

use crate::model::{Arm, ValidationIssue};

/// Errors raised by the design-analysis engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {message}")]
    InvalidParameter { field: &'static str, message: String },
    #[error("invalid design: {}", format_issues(.0))]
    InvalidDesign(Vec<ValidationIssue>),
    #[error("follow-up cluster in arm {arm} is empty (1 - lambda + gamma = {size})")]
    EmptyFollowUpCluster { arm: Arm, size: f64 },
    #[error("reduced cohort analysis size {size} is below one subject")]
    ReducedCohortTooSmall { size: f64 },
    #[error("follow-up pattern does not match {expected}: {detail}")]
    PatternMismatch { expected: &'static str, detail: String },
    #[error("non-integral {what} count {value} in arm {arm}; exact oracle and simulator need whole subjects")]
    NonIntegralCount { what: &'static str, arm: Arm, value: f64 },
    #[error("target power {target} is unattainable; supremum power is {supremum}")]
    UnattainablePower { target: f64, supremum: f64 },
    #[error("at least {needed} degrees of freedom required, design gives {df}")]
    InsufficientDegreesOfFreedom { needed: u64, df: u64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_issues(issues: &[ValidationIssue]) -> String {
    issues
        .iter()
        .map(|i| format!("{}: {}", i.field, i.message))
        .collect::<Vec<_>>()
        .join("; ")
}
