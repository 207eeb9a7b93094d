//! Benchmark fixtures shared by the criterion benches.

use didpower_core::{DesignKind, FollowUpPattern, PowerSpec, TrialDesign, VarianceComponents};

/// Components from a school-based trial with modest cluster correlation.
pub fn school_components() -> VarianceComponents {
    VarianceComponents::new(0.0218, 0.0047, 0.3342, 0.2567).expect("valid components")
}

/// Fifteen schools per arm, full replacement of 5% and 16% losses.
pub fn school_design(k: u32) -> TrialDesign {
    TrialDesign::balanced(
        15,
        k,
        FollowUpPattern::full_replacement(0.05, 0.16),
        DesignKind::FullReplacement,
    )
}

pub fn school_spec() -> PowerSpec {
    PowerSpec::new(0.12, 0.05, 0.8).expect("valid spec")
}

/// A partial replacement design whose loss and gain counts are whole for any
/// `k` divisible by 20.
pub fn partial_design(j: u32, k: u32) -> TrialDesign {
    TrialDesign::balanced(
        j,
        k,
        FollowUpPattern::partial(0.2, 0.1, 0.05, 0.15),
        DesignKind::PartialReplacement,
    )
}
